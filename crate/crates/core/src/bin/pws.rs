fn main() {
    std::process::exit(pws_core::cli::main_with_args(std::env::args_os()));
}
