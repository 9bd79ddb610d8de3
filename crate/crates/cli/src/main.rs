fn main() {
    std::process::exit(rtv_cli::run(std::env::args_os()));
}
