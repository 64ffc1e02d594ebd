fn main() {
    std::process::exit(forge::commands::run(std::env::args_os()));
}
