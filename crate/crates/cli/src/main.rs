fn main() {
    std::process::exit(disttest_cli::main_with_args(std::env::args_os()));
}
