fn main() {
    std::process::exit(misig::cli::main_with_args(std::env::args_os()));
}
