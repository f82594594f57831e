fn main() {
    std::process::exit(tmdl_cli::run(std::env::args_os()));
}
