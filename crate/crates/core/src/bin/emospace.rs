fn main() {
    std::process::exit(emospace::cli::dispatch(std::env::args_os()));
}
