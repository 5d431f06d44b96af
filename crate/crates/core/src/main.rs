fn main() {
    std::process::exit(dynrep::cli::main_with_args());
}
