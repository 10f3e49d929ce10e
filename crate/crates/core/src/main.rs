fn main() {
    let seed = std::env::var(varcalc::cli::SEED_VAR).ok();
    let code = varcalc::cli::run(std::env::args_os(), seed.as_deref(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
