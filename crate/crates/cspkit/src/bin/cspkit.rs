fn main() {
    std::process::exit(cspkit::cli::run());
}
