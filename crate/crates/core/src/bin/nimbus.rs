fn main() {
    std::process::exit(nimbus::harness::cli::main_with_args(std::env::args_os()));
}
