fn main() {
    std::process::exit(oscillab::cli::main_with_args(std::env::args_os()));
}
