fn main() {
    std::process::exit(pso_esn_cli::cli_main(std::env::args_os()));
}
