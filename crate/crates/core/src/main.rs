fn main() {
    std::process::exit(emaopt::cli::cli_main(std::env::args_os()));
}
