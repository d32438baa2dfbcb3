fn main() {
    std::process::exit(hlab::cli::run(std::env::args_os()));
}
