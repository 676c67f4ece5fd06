fn main() {
    std::process::exit(catlab::cli::main());
}
