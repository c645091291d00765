fn main() {
    std::process::exit(partppo::cli::run(std::env::args_os()));
}
