fn main() {
    std::process::exit(superglobal::cli::main());
}
