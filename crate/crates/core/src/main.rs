fn main() { std::process::exit(handforge::cli::main()); }
