fn main() {
    std::process::exit(mflqg::cli::main_with_args(std::env::args_os()));
}
