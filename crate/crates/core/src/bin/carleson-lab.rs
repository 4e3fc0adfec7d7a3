fn main() {
    std::process::exit(carleson_core::cli::main_with_args(std::env::args_os()));
}
