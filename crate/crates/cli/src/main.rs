fn main() {
    std::process::exit(lipbound_cli::run(std::env::args_os()));
}
