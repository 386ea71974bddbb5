fn main() {
    std::process::exit(mmspace_cli::run(std::env::args_os()));
}
