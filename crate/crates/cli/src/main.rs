fn main() {
    std::process::exit(sara_cli::main_with_args(std::env::args_os()));
}
