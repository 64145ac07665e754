fn main() {
    std::process::exit(helimag::cli::cli_main(std::env::args_os()));
}
