fn main() {
    std::process::exit(mgdm_spp::cli::main(std::env::args_os()));
}
