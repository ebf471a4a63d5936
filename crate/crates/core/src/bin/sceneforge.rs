fn main() {
    std::process::exit(sceneforge::cli::run(std::env::args_os()));
}
