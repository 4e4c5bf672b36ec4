fn main() {
    std::process::exit(darwin_fit::cli::main_with(std::env::args_os()));
}
