fn main() {
    std::process::exit(adg_service::cli::run(std::env::args_os()));
}
