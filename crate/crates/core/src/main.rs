fn main() {
    let code = twotime_core::cli::run(std::env::args_os(), &mut std::io::stderr());
    std::process::exit(code);
}
