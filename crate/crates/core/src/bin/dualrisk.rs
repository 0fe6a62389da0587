fn main() {
    std::process::exit(dualrisk::cli::main_with_args(std::env::args_os()));
}
