fn main() {
    std::process::exit(typoline::cli::run(std::env::args_os()));
}
