fn main() {
    std::process::exit(frogsim_cli::main_with_args(std::env::args_os()));
}
