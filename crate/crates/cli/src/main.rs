fn main() {
    std::process::exit(ehgo_cli::run_command(std::env::args_os()));
}
