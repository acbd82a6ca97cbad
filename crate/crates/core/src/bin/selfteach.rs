fn main() {
    std::process::exit(selfteach::cli::main_with_args(std::env::args_os()));
}
