fn main() {
    std::process::exit(hypobridge::cli::run(std::env::args_os()));
}
