fn main() {
    std::process::exit(uno_cli::main_with_args(std::env::args_os()));
}
