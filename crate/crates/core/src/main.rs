fn main() {
    std::process::exit(qr_spacings::cli::run());
}
