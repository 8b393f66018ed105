fn main() {
    std::process::exit(ksreg::cli::run(std::env::args_os()));
}
