fn main() {
    std::process::exit(maxfactor_cli::run(std::env::args_os()));
}
