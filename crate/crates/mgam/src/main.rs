fn main() {
    std::process::exit(mgam::cli::run_from(std::env::args_os()));
}
