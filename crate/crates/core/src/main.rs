fn main() {
    std::process::exit(chdamage::cli::main_with_args(std::env::args_os()));
}
