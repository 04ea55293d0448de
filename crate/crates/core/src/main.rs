fn main() {
    let code = rodskel_core::cli::run(std::env::args_os());
    std::process::exit(code);
}
