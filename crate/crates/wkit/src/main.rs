fn main() {
    std::process::exit(wkit::cli::main_with(std::env::args_os()));
}
