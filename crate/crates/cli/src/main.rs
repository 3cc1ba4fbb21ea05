fn main() {
    std::process::exit(regot_cli::run(std::env::args_os()));
}
