fn main() {
    std::process::exit(memclass::cli::run(std::env::args_os()));
}
