fn main() {
    std::process::exit(emoshare::cli::main());
}
