fn main() {
    std::process::exit(lada_core::cli::run(std::env::args_os()));
}
