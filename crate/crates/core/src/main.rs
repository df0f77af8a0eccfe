fn main() {
    std::process::exit(stataction::cli::run());
}
