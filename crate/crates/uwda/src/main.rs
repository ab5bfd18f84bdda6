fn main() {
    std::process::exit(uwda::cli::main());
}
