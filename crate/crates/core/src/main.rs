fn main() -> std::process::ExitCode {
    tinregion::cli::run(std::env::args_os())
}
