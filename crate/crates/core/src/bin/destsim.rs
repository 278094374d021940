fn main() {
    std::process::exit(destsim::cli::run_from(std::env::args_os()));
}
