use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = mteval_cli::Cli::parse();
    if let Err(e) = mteval_cli::run(cli) {
        eprintln!("mteval: {e}");
        std::process::exit(e.exit_code());
    }
}
