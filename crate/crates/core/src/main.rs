use clap::Parser;
use modelkit_core::cli::{run, Cli};

fn main() {
    if let Some(n) = std::env::var("MODELKIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    std::process::exit(run(Cli::parse()));
}
