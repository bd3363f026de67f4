fn main() {
    std::process::exit(bk_cli::main_with(std::env::args_os()));
}
