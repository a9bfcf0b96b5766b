fn main() {
    std::process::exit(gadi::cli::run(std::env::args()));
}
