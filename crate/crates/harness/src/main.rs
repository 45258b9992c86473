fn main() {
    std::process::exit(mslln_harness::cli::run(std::env::args_os()));
}
