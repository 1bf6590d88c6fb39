fn main() {
    std::process::exit(gikf::harness::cli_main(std::env::args_os()));
}
