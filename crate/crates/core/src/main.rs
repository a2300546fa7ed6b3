fn main() {
    std::process::exit(soccer_summary::cli::run(std::env::args_os()));
}
