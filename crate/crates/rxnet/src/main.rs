fn main() {
    std::process::exit(rxnet::cli::run(std::env::args_os()));
}
