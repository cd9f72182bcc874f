fn main() {
    std::process::exit(pkmdyn_cli::run(std::env::args_os()));
}
