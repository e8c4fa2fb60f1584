fn main() {
    std::process::exit(hsys::cli::main_with_args(std::env::args_os()));
}
