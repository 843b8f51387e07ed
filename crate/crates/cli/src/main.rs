fn main() {
    std::process::exit(maxrun_cli::run(std::env::args_os()));
}
