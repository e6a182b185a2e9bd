fn main() {
    std::process::exit(lpvmpc::cli::main_with_args(std::env::args_os()));
}
