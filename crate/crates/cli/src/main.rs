fn main() {
    std::process::exit(transport_noise_cli::run(std::env::args_os()));
}
