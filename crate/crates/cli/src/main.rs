fn main() {
    std::process::exit(collapse_cli::run(std::env::args_os()));
}
