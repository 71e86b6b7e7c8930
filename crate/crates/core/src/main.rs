fn main() {
    std::process::exit(sbmq::cli::run(std::env::args_os()));
}
