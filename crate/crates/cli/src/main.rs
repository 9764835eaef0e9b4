fn main() {
    std::process::exit(linekit_cli::run(std::env::args_os()));
}
