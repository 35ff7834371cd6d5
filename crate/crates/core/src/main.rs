fn main() {
    std::process::exit(fogfair::cli::run(std::env::args_os()));
}
