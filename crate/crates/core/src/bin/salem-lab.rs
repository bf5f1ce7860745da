fn main() {
    std::process::exit(salem_lab::cli::main_with_args(std::env::args_os()));
}
