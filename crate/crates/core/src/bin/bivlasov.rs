fn main() {
    std::process::exit(bivlasov::cli::main_with(std::env::args_os()));
}
