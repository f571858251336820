fn main() {
    std::process::exit(hypschwarz::cli::main_with_args(std::env::args_os()));
}
