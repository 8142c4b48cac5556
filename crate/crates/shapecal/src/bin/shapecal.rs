fn main() {
    std::process::exit(shapecal::cli::run());
}
