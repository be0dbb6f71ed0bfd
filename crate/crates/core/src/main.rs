fn main() {
    std::process::exit(herzkit::cli::run_from_args(std::env::args_os()));
}
