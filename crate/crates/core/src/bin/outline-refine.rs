fn main() {
    std::process::exit(outline_refine::cli::main_with_args(std::env::args_os()));
}
