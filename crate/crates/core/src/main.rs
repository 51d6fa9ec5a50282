fn main() {
    std::process::exit(cvhssr::cli::run(std::env::args_os()));
}
