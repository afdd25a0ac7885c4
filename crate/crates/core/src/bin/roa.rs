fn main() {
    env_logger::init();
    std::process::exit(roacert::cli::main_with(std::env::args_os()));
}
