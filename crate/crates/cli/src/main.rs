fn main() {
    std::process::exit(ordreg_cli::run(std::env::args_os()));
}
