fn main() {
    std::process::exit(gasurf::cli::run_from_args(std::env::args_os()));
}
