fn main() {
    std::process::exit(quasihom::cli::run(std::env::args_os()));
}
