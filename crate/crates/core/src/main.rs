fn main() {
    std::process::exit(sbm_recover::harness::cli::cli_main(std::env::args_os()));
}
