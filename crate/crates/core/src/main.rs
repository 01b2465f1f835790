fn main() {
    std::process::exit(fcslab::harness::cli::run(std::env::args_os()));
}
