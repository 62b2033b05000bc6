//! CSV time-series ingestion with lagged feature maps.
//!
//! Files have a mandatory header row, one row per time step in time order, and
//! plain decimal numbers.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SupervisedSequence;
use crate::error::{Error, Result};

/// Column names the file must provide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub inputs: Vec<String>,
    pub target: String,
}

impl CsvSchema {
    pub fn new<S: Into<String>>(inputs: impl IntoIterator<Item = S>, target: impl Into<String>) -> Self {
        CsvSchema {
            inputs: inputs.into_iter().map(Into::into).collect(),
            target: target.into(),
        }
    }
}

/// One model input built from the raw columns at time `n - lag`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LagFeature {
    Channel { channel: String, lag: usize },
    Mean { mean: Vec<String>, lag: usize },
}

impl LagFeature {
    pub fn channel(name: &str, lag: usize) -> Self {
        LagFeature::Channel {
            channel: name.to_string(),
            lag,
        }
    }

    fn lag(&self) -> usize {
        match self {
            LagFeature::Channel { lag, .. } | LagFeature::Mean { lag, .. } => *lag,
        }
    }

    fn columns(&self) -> Vec<&str> {
        match self {
            LagFeature::Channel { channel, .. } => vec![channel.as_str()],
            LagFeature::Mean { mean, .. } => mean.iter().map(String::as_str).collect(),
        }
    }
}

/// Feature maps for the two industrial datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagPreset {
    /// u1..u5, u5 at lags 1..3, (u1+u2)/2, y at lags 1..4.
    DebutanizerFull,
    /// u1..u5 and y(n-1).
    DebutanizerReduced,
    /// u1..u4 and y(n-1).
    PowerLoad,
}

impl LagPreset {
    pub fn schema(self) -> CsvSchema {
        match self {
            LagPreset::DebutanizerFull | LagPreset::DebutanizerReduced => {
                CsvSchema::new((1..=7).map(|i| format!("u{i}")), "y")
            }
            LagPreset::PowerLoad => CsvSchema::new((1..=4).map(|i| format!("u{i}")), "y"),
        }
    }

    pub fn features(self) -> Vec<LagFeature> {
        let ch = LagFeature::channel;
        match self {
            LagPreset::DebutanizerFull => {
                let mut f: Vec<LagFeature> = (1..=5).map(|i| ch(&format!("u{i}"), 0)).collect();
                f.extend((1..=3).map(|lag| ch("u5", lag)));
                f.push(LagFeature::Mean {
                    mean: vec!["u1".into(), "u2".into()],
                    lag: 0,
                });
                f.extend((1..=4).map(|lag| ch("y", lag)));
                f
            }
            LagPreset::DebutanizerReduced => {
                let mut f: Vec<LagFeature> = (1..=5).map(|i| ch(&format!("u{i}"), 0)).collect();
                f.push(ch("y", 1));
                f
            }
            LagPreset::PowerLoad => {
                let mut f: Vec<LagFeature> = (1..=4).map(|i| ch(&format!("u{i}"), 0)).collect();
                f.push(ch("y", 1));
                f
            }
        }
    }

    pub fn default_washout(self) -> usize {
        match self {
            LagPreset::DebutanizerFull | LagPreset::DebutanizerReduced => 100,
            LagPreset::PowerLoad => 30,
        }
    }
}

impl std::str::FromStr for LagPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "debutanizer_full" => Ok(LagPreset::DebutanizerFull),
            "debutanizer_reduced" => Ok(LagPreset::DebutanizerReduced),
            "power_load" => Ok(LagPreset::PowerLoad),
            other => Err(Error::InvalidConfig(format!("unknown lag preset {other:?}"))),
        }
    }
}

/// Reads a CSV file and builds lagged inputs with the schema target at lag 0
/// as the single output. The first `max lag` rows, whose lags do not exist,
/// are dropped. The returned sequence has washout 0.
pub fn load_csv(path: &Path, schema: &CsvSchema, lags: &[LagFeature]) -> Result<SupervisedSequence> {
    let file = std::fs::File::open(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("csv").to_string();
    read_csv(file, schema, lags, &name)
}

pub(crate) fn read_csv(reader: impl std::io::Read, schema: &CsvSchema, lags: &[LagFeature], name: &str) -> Result<SupervisedSequence> {
    if lags.is_empty() {
        return Err(Error::InvalidConfig("lag specification is empty".into()));
    }
    let mut rdr = ::csv::ReaderBuilder::new().has_headers(true).trim(::csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let index: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();

    for col in schema.inputs.iter().chain(std::iter::once(&schema.target)) {
        if !index.contains_key(col.as_str()) {
            return Err(Error::Schema(format!("missing column {col:?} (header: {})", header.join(","))));
        }
    }
    for feat in lags {
        for col in feat.columns() {
            if col != schema.target && !schema.inputs.iter().any(|c| c == col) {
                return Err(Error::Schema(format!("lag feature references column {col:?} outside the schema")));
            }
        }
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {:?}: cannot parse {field:?} as a number", header[i]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {:?}: non-finite value", header[i]),
                });
            }
            columns[i].push(v);
        }
    }

    let rows = columns.first().map_or(0, Vec::len);
    let max_lag = lags.iter().map(LagFeature::lag).max().unwrap_or(0);
    if rows <= max_lag + 1 {
        return Err(Error::Schema(format!(
            "{rows} data rows cannot support a maximum lag of {max_lag}"
        )));
    }
    let count = rows - max_lag;
    let col = |name: &str| &columns[index[name]];

    let mut inputs = DMatrix::zeros(lags.len(), count);
    for (i, feat) in lags.iter().enumerate() {
        let lag = feat.lag();
        match feat {
            LagFeature::Channel { channel, .. } => {
                let src = col(channel);
                for j in 0..count {
                    inputs[(i, j)] = src[j + max_lag - lag];
                }
            }
            LagFeature::Mean { mean, .. } => {
                let k = mean.len() as f64;
                for j in 0..count {
                    inputs[(i, j)] = mean.iter().map(|c| col(c)[j + max_lag - lag]).sum::<f64>() / k;
                }
            }
        }
    }
    let target = col(&schema.target);
    let targets = DMatrix::from_fn(1, count, |_, j| target[j + max_lag]);
    SupervisedSequence::new(inputs, targets, 0, name)
}

/// Writes `u1..uK` and `y` (or `y1..yL`) columns, one row per step. Numbers
/// use the shortest representation that parses back to the same double.
pub fn write_csv(seq: &SupervisedSequence, out: &mut impl Write) -> Result<()> {
    let k = seq.n_inputs();
    let l = seq.n_outputs();
    let mut wtr = ::csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=k).map(|i| format!("u{i}")).collect();
    if l == 1 {
        header.push("y".into());
    } else {
        header.extend((1..=l).map(|i| format!("y{i}")));
    }
    wtr.write_record(&header)?;
    for t in 0..seq.len() {
        let row: Vec<String> = seq
            .inputs
            .column(t)
            .iter()
            .chain(seq.targets.column(t).iter())
            .map(|v| format!("{v}"))
            .collect();
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
