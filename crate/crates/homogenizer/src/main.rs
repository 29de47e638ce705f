fn main() {
    std::process::exit(homogenizer::cli::run(std::env::args_os()));
}
