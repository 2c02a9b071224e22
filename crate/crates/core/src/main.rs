fn main() {
    std::process::exit(wfl_core::cli::run(std::env::args_os()));
}
