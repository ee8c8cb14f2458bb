fn main() {
    std::process::exit(parshare::harness::cli::main_with_args(std::env::args_os()));
}
