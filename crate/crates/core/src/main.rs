fn main() {
    std::process::exit(privfair::cli::main());
}
