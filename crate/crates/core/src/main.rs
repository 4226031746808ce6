fn main() {
    std::process::exit(semiparse::cli::run(std::env::args_os()));
}
