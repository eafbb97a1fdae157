fn main() {
    std::process::exit(twlp_core::cli::main_from_env());
}
