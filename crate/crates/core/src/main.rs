fn main() {
    std::process::exit(risa::cli::main())
}
