fn main() -> std::process::ExitCode {
    tandem_iv::app::main()
}
