fn main() {
    std::process::exit(gridmarket::cli::run(std::env::args_os()));
}
