fn main() {
    std::process::exit(nelson_eff::cli::run(std::env::args_os()));
}
