fn main() {
    std::process::exit(ofdm_isac::cli::main_with_args(std::env::args_os()));
}
