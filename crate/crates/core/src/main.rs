fn main() {
    std::process::exit(srvmatch::cli::run(std::env::args_os()));
}
