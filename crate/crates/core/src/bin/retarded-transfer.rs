fn main() {
    std::process::exit(retarded_transfer::cli::main_with(std::env::args_os()));
}
