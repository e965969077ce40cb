fn main() {
    std::process::exit(xfl::cli::run(std::env::args_os()));
}
