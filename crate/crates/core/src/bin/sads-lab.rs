fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = sads_dirac::cli::run(&args, std::env::var(sads_dirac::cli::OUT_DIR_ENV).ok());
    std::process::exit(code);
}
