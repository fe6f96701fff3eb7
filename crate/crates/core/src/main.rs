fn main() {
    std::process::exit(hoaxnet::cli::main(std::env::args_os()));
}
