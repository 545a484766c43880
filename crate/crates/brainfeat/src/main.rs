fn main() {
    std::process::exit(brainfeat::cli::run(std::env::args_os()));
}
