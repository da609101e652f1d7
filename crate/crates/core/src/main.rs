fn main() {
    std::process::exit(sat_core::cli::run_cli(std::env::args_os()));
}
