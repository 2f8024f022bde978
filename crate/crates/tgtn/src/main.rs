fn main() {
    std::process::exit(tgtn::cli::run(std::env::args_os()));
}
