use clap::Parser;
use monodual::cli::{execute, RunConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cfg = RunConfig::parse();
    std::process::exit(execute(&cfg));
}
