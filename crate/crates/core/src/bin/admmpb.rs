fn main() {
    std::process::exit(admmpb::cli::main(std::env::args_os()));
}
