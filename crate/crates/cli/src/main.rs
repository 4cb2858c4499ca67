fn main() {
    std::process::exit(crystalwalk_cli::run_cli(std::env::args_os()));
}
