fn main() {
    std::process::exit(segaudit::cli::run_from(std::env::args_os()));
}
