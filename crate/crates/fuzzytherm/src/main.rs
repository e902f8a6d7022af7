fn main() {
    std::process::exit(fuzzytherm::cli::main());
}
