fn main() {
    std::process::exit(varheat::cli::run(std::env::args_os()));
}
