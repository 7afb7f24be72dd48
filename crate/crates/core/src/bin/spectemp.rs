fn main() {
    std::process::exit(spectemp::cli::main());
}
