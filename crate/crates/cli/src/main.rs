fn main() {
    std::process::exit(phi4lab_cli::run(std::env::args_os()));
}
