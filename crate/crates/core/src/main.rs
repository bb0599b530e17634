fn main() {
    std::process::exit(fastosc::cli::main_with_args(std::env::args_os()));
}
