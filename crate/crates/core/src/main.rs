fn main() {
    std::process::exit(stereocal::cli::run(std::env::args_os()));
}
