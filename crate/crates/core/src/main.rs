fn main() {
    std::process::exit(thor::cli::run(std::env::args()));
}
