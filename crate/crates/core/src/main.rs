fn main() {
    std::process::exit(p2attractor::cli::execute(std::env::args_os()));
}
