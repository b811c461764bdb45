fn main() {
    std::process::exit(demkit::cli::run(std::env::args_os()));
}
