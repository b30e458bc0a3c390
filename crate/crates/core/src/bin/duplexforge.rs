fn main() {
    std::process::exit(duplexforge::cli::main_exit_code());
}
