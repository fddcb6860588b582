fn main() {
    std::process::exit(cuspforms_cli::run(std::env::args_os()));
}
