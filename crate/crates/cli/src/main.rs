fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ISSUEBERT_LOG", "warn")).init();
    std::process::exit(issuebert_cli::run(std::env::args_os()));
}
