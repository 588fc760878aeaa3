fn main() {
    std::process::exit(rydberg_nqs::cli::main_with_args(std::env::args_os()));
}
