fn main() {
    std::process::exit(cochlea_core::cli::run(std::env::args_os()));
}
