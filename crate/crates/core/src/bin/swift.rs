fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = swift_core::harness::cli::main_with(std::env::args().collect());
    std::process::exit(code);
}
