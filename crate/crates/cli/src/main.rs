fn main() {
    std::process::exit(brse_cli::run(std::env::args_os()));
}
