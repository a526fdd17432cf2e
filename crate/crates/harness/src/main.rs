fn main() {
    std::process::exit(rdd_harness::cli::run(std::env::args_os()));
}
