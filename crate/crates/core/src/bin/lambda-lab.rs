fn main() -> std::process::ExitCode {
    lambda_lab::cli::main_with(std::env::args_os())
}
