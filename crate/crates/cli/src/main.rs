fn main() {
    std::process::exit(rtmixed_cli::run_cli(std::env::args_os()));
}
