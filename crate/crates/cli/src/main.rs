fn main() {
    std::process::exit(holomoment_cli::main_with_args(std::env::args_os()));
}
