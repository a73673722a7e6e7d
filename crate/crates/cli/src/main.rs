fn main() {
    std::process::exit(curvlab_cli::run_command(std::env::args_os()));
}
