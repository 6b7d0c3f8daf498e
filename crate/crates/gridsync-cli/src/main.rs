fn main() {
    std::process::exit(gridsync_cli::run(std::env::args_os()));
}
