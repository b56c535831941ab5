fn main() {
    std::process::exit(dotcavity::cli::run(std::env::args_os()));
}
