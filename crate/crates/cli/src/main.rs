fn main() {
    std::process::exit(palmjog_cli::run(std::env::args_os()));
}
