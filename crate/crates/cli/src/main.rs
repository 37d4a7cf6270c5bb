fn main() {
    std::process::exit(beliefnet_cli::run_cli(std::env::args_os()));
}
