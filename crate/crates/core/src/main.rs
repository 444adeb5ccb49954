fn main() {
    std::process::exit(cnfem::cli::main_with_args(std::env::args_os()));
}
