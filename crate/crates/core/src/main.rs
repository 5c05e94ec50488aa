fn main() -> std::process::ExitCode {
    argmine::cli::main_with_args(std::env::args_os())
}
