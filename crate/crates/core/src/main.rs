fn main() {
    std::process::exit(mipl_cdl::cli::main_with_args(std::env::args_os()));
}
