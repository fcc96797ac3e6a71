fn main() {
    std::process::exit(ebmine::cli::run(std::env::args_os()));
}
