fn main() {
    std::process::exit(wrgas::cli::main());
}
