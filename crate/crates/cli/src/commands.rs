use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use rand::Rng;
use rscn::eval::{apply_point, grid_search_on, parse_grid, GridRow};
use rscn::seeds::{rng_for, Stream};
use rscn::tasks::{write_csv, Generator, MgVariant};
use rscn::{
    emit_report, nrmse, online_run, run_trials_on, scale_feedback, split_nrmse, two_trajectory_gap, BaselineConfig,
    DMatrix, DVector, ModelSpec, ReportFormat, ReservoirModel, RhoEstimator, ScaleMode, Split, Task, TaskManifest, TrialReport,
};

use crate::args::{Cli, ModelKind};
use crate::manifest::{apply_model_flags, model_kind, Resolved};
use crate::{write_atomic, CliError};

const ESP_TOLERANCE: f64 = 1e-8;

fn out_path(r: &Resolved, name: &str) -> PathBuf {
    r.out.join(name)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_run_manifest(r: &Resolved) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(&r.to_manifest()).map_err(|e| CliError::data(e.to_string()))?;
    write_file(&out_path(r, "run.json"), json.as_bytes())
}

fn load_model(r: &Resolved) -> Result<ReservoirModel, CliError> {
    let path = r
        .model_file
        .as_ref()
        .ok_or_else(|| CliError::usage(format!("{} needs --model-file", command_name(r))))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(ReservoirModel::from_json(&text)?)
}

fn command_name(r: &Resolved) -> String {
    use clap::ValueEnum;
    r.command.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    }
}

fn check_dims(model: &ReservoirModel, task: &Task) -> Result<(), CliError> {
    if model.n_inputs() != task.n_inputs() || model.n_outputs() != task.n_outputs() {
        return Err(CliError::data(format!(
            "model maps {} inputs to {} outputs but task {} has {} and {}",
            model.n_inputs(),
            model.n_outputs(),
            task.name,
            task.n_inputs(),
            task.n_outputs()
        )));
    }
    Ok(())
}

pub fn gen(r: &Resolved) -> Result<(), CliError> {
    let task = r.task.build()?;
    let label = r.task.label();
    for (split, seq) in [("train", &task.train), ("val", &task.val), ("test", &task.test)] {
        let mut buf = Vec::new();
        write_csv(seq, &mut buf)?;
        let path = out_path(r, &format!("{label}_{split}.csv"));
        write_file(&path, &buf)?;
        println!("{}", path.display());
    }
    write_run_manifest(r)
}

pub fn train(r: &Resolved) -> Result<(), CliError> {
    let task = r.task.build()?;
    let (model, history) = r.model.fit(&task)?;
    write_file(&out_path(r, "model.json"), model.to_json()?.as_bytes())?;
    if let Some(h) = &history {
        let mut buf = Vec::new();
        h.write_csv(&mut buf)?;
        write_file(&out_path(r, "history.csv"), &buf)?;
    }
    write_run_manifest(r)?;
    let mut line = format!("model={} nodes={}", r.model.name(), model.n_nodes());
    for (name, seq) in [("train", &task.train), ("val", &task.val), ("test", &task.test)] {
        write!(line, " {name}_nrmse={:.6}", split_nrmse(&model, seq)?).unwrap();
    }
    if let Some(h) = &history {
        write!(line, " stop={:?}", h.stop_reason).unwrap();
    }
    println!("{line}");
    Ok(())
}

pub fn eval(r: &Resolved) -> Result<(), CliError> {
    let model = load_model(r)?;
    let task = r.task.build()?;
    check_dims(&model, &task)?;
    let value = split_nrmse(&model, task.split(r.split))?;
    println!("task={} split={} nrmse={value:.6}", task.name, split_name(r.split));
    Ok(())
}

pub fn online(r: &Resolved) -> Result<(), CliError> {
    let task = r.task.build()?;
    let model = match &r.model_file {
        Some(_) => load_model(r)?,
        None => r.model.fit(&task)?.0,
    };
    check_dims(&model, &task)?;
    let stream = task.split(r.split);
    let run = online_run(&model, stream, &r.online, Some(model.readout()))?;
    let mut buf = Vec::new();
    run.write_csv(&mut buf)?;
    write_file(&out_path(r, "online.csv"), &buf)?;
    write_run_manifest(r)?;
    let w = stream.washout();
    let score = nrmse(
        &run.predictions.columns(w, stream.n_effective()).into_owned(),
        &stream.effective_targets(),
    )?;
    let gap = run.state.diagnostics.last().and_then(|d| d.weight_gap).unwrap_or(0.0);
    println!(
        "mode={} split={} updates={} nrmse={score:.6} final_weight_gap={gap:.6e}",
        r.online.mode,
        split_name(r.split),
        run.state.step,
    );
    Ok(())
}

/// Default baseline reservoir sizes for the built-in benchmark tasks.
fn baseline_size(task: &TaskManifest, kind: ModelKind) -> Option<usize> {
    let idx = match (task.generator, task.variant.unwrap_or_default()) {
        (Some(Generator::MackeyGlass), MgVariant::Mg) => 0,
        (Some(Generator::MackeyGlass), MgVariant::Mg1) => 1,
        (Some(Generator::MackeyGlass), MgVariant::Mg2) => 2,
        (Some(Generator::Plant), _) => 3,
        _ => return None,
    };
    match kind {
        ModelKind::Esn => Some([98, 124, 135, 157][idx]),
        ModelKind::Scr => Some([79, 103, 111, 136][idx]),
        ModelKind::Rscn => None,
    }
}

fn bench_spec(cli: &Cli, r: &Resolved, task: &TaskManifest, kind: ModelKind) -> Result<ModelSpec, CliError> {
    let from_run = model_kind(&r.model) == kind;
    let base = if from_run {
        r.model.clone()
    } else {
        match kind {
            ModelKind::Rscn => ModelSpec::Rscn(Default::default()),
            ModelKind::Esn => ModelSpec::esn(BaselineConfig::default()),
            ModelKind::Scr => ModelSpec::scr(BaselineConfig::default()),
        }
    };
    let mut spec = apply_model_flags(base, cli)?;
    if cli.nodes.is_none() && !(from_run && r.model_from_manifest) {
        if let Some(n) = baseline_size(task, kind) {
            spec = spec.with_param("n_nodes", n as f64)?;
        }
    }
    Ok(spec.with_seed(r.seed))
}

fn point_label(point: &[(String, f64)]) -> String {
    point.iter().map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(";")
}

pub fn bench(cli: &Cli, r: &Resolved) -> Result<(), CliError> {
    let tasks: Vec<TaskManifest> = if r.task_given {
        vec![r.task.clone()]
    } else {
        [MgVariant::Mg, MgVariant::Mg1, MgVariant::Mg2]
            .into_iter()
            .map(|v| TaskManifest::mackey_glass(v, r.seed))
            .chain(std::iter::once(TaskManifest::plant(r.seed)))
            .collect()
    };
    let kinds: Vec<ModelKind> = match cli.model {
        Some(k) => vec![k],
        None => vec![ModelKind::Esn, ModelKind::Scr, ModelKind::Rscn],
    };
    let grid = r.grid.as_deref().map(parse_grid).transpose()?;

    let mut reports: Vec<TrialReport> = Vec::new();
    let mut grid_rows: Vec<(String, GridRow)> = Vec::new();
    for tm in &tasks {
        let task = tm.build()?;
        let label = tm.label();
        for &kind in &kinds {
            let mut spec = bench_spec(cli, r, tm, kind)?;
            if let Some(g) = &grid {
                let (best, table) = grid_search_on(&task, &spec, g, r.trials, r.seed)?;
                info!("{label} {}: best grid point {}", spec.name(), point_label(&best.point));
                spec = apply_point(&spec, &best.point)?;
                grid_rows.extend(table.into_iter().map(|row| (label.clone(), row)));
            }
            let mut report = run_trials_on(&task, &spec, r.trials, r.seed)?;
            report.task_name = label.clone();
            if !report.is_complete() {
                log::warn!("{label} {}: {} of {} trials failed", spec.name(), report.failed, report.n_trials);
            }
            reports.push(report);
        }
    }

    let text = emit_report(&reports, ReportFormat::Text)?;
    write_file(&out_path(r, "report.csv"), emit_report(&reports, ReportFormat::Csv)?.as_bytes())?;
    write_file(&out_path(r, "report.txt"), text.as_bytes())?;
    if !grid_rows.is_empty() {
        let mut csv = String::from("dataset,model,point,mean_val_nrmse,test_nrmse_mean\n");
        for (label, row) in &grid_rows {
            writeln!(
                csv,
                "{label},{},\"{}\",{:.6},{:.6}",
                row.report.model_name,
                point_label(&row.point),
                row.mean_val_nrmse,
                row.report.test_nrmse.mean
            )
            .unwrap();
        }
        write_file(&out_path(r, "grid.csv"), csv.as_bytes())?;
    }
    write_run_manifest(r)?;
    print!("{text}");
    Ok(())
}

pub fn esp_check(cli: &Cli, r: &Resolved) -> Result<(), CliError> {
    let mut model = load_model(r)?;
    if let Some(alpha) = cli.alpha {
        model = scale_feedback(&model, alpha, ScaleMode::Contraction, RhoEstimator::SigmaBound)?.model;
    }
    if cli.steps == 0 || cli.pairs == 0 {
        return Err(CliError::usage("--steps and --pairs must be positive"));
    }
    let mut rng = rng_for(r.seed, Stream::Noise);
    let inputs = if r.task_given {
        let task = r.task.build()?;
        check_dims(&model, &task)?;
        let u = task.split(r.split).inputs();
        u.columns(0, cli.steps.min(u.ncols())).into_owned()
    } else {
        DMatrix::from_fn(model.n_inputs(), cli.steps, |_, _| rng.random_range(-1.0..=1.0))
    };
    let n = model.n_nodes();
    let steps = inputs.ncols();
    let mut max_gap = vec![0.0f64; steps];
    let mut sum_gap = vec![0.0f64; steps];
    let mut converged = 0;
    let mut slowest = 0;
    for _ in 0..cli.pairs {
        let xa = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        let xb = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        let trace = two_trajectory_gap(&model, &inputs, &xa, &xb, ESP_TOLERANCE)?;
        for (t, g) in trace.gaps.iter().enumerate() {
            max_gap[t] = max_gap[t].max(*g);
            sum_gap[t] += g;
        }
        if let Some(step) = trace.converged_at {
            converged += 1;
            slowest = slowest.max(step);
        }
    }
    let mut csv = String::from("step,max_gap,mean_gap\n");
    for t in 0..steps {
        writeln!(csv, "{},{:e},{:e}", t + 1, max_gap[t], sum_gap[t] / cli.pairs as f64).unwrap();
    }
    write_file(&out_path(r, "esp.csv"), csv.as_bytes())?;
    write_run_manifest(r)?;
    println!(
        "nodes={n} sigma_max={:.6} steps={steps} pairs={} converged={converged} slowest_step={slowest} final_max_gap={:.3e} all_converged={}",
        rscn::max_singular_value(model.feedback()),
        cli.pairs,
        max_gap.last().copied().unwrap_or(0.0),
        converged == cli.pairs
    );
    Ok(())
}
