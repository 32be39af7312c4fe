fn main() {
    std::process::exit(oqn_harness::cli::run_cli(std::env::args_os()));
}
