fn main() -> std::process::ExitCode {
    towerforge::cli::run(std::env::args_os())
}
