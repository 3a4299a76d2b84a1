fn main() {
    std::process::exit(conewright::cli::run(std::env::args_os()));
}
