fn main() {
    std::process::exit(bistab_core::cli::main_with_args(std::env::args_os()));
}
