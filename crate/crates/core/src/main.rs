fn main() {
    std::process::exit(bivkrylov::cli::run(std::env::args_os()));
}
