use clap::Parser;
use uam_ecosim_cli::{configure_threads, execute, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads().and_then(|()| execute(cli)) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
