fn main() {
    std::process::exit(prescale_cli::run_cli(std::env::args_os()));
}
