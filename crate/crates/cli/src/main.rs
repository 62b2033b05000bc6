fn main() {
    std::process::exit(rscn_cli::cmd_dispatch(std::env::args_os()));
}
