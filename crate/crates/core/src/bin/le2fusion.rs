fn main() {
    std::process::exit(le2fusion::cli::run(std::env::args_os()));
}
