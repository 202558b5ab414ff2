fn main() {
    std::process::exit(nhtopo::cli::run(std::env::args_os()));
}
