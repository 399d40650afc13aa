fn main() -> std::process::ExitCode {
    fasura::cli::main()
}
