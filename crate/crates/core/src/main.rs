use clap::Parser;

use nnsampler::cli::{run, Cli};
use nnsampler::par::init_thread_pool;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Ok(v) = std::env::var("NNSAMPLER_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                if !init_thread_pool(n) {
                    log::warn!("could not cap the thread pool at {n}");
                }
            }
            _ => log::warn!("ignoring NNSAMPLER_THREADS={v:?}; expected a positive integer"),
        }
    }
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
