fn main() {
    std::process::exit(turboreg_cli::run(std::env::args_os()));
}
