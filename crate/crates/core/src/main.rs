fn main() {
    std::process::exit(thaicurate::cli::main_with_args(std::env::args_os()));
}
