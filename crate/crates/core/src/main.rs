fn main() {
    std::process::exit(photon_shadow::cli::run(std::env::args_os()));
}
