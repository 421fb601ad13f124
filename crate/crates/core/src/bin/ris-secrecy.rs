fn main() {
    std::process::exit(ris_secrecy::harness::cli_main(std::env::args_os()));
}
