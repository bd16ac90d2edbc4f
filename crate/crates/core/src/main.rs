fn main() {
    std::process::exit(uav::cli::run(std::env::args_os()));
}
