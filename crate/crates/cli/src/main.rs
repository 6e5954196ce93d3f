fn main() -> std::process::ExitCode {
    maats_cli::main_with_args(std::env::args_os())
}
