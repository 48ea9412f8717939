fn main() {
    std::process::exit(qpsearch::cli::main_with_args(std::env::args_os()));
}
