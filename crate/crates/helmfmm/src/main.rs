fn main() {
    std::process::exit(helmfmm::cli::main_with_args(std::env::args_os()));
}
