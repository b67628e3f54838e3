fn main() {
    env_logger::init();
    std::process::exit(smoothcomp::cli::run());
}
