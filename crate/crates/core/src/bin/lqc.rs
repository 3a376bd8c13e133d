fn main() {
    std::process::exit(lqc::cli::run_cli(std::env::args_os()));
}
