fn main() {
    std::process::exit(netbandit::cli::main_with_args(std::env::args_os()));
}
