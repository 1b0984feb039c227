fn main() {
    std::process::exit(coop_anneal::cli::main_with_args(std::env::args_os()));
}
