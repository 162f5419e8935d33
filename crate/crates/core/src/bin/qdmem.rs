fn main() -> std::process::ExitCode {
    qdmem::cli::main()
}
