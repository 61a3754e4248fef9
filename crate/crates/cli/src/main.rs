use clap::Parser;
use stiefel_laplace_cli::{run_and_write, Cli};

fn main() {
    let cli = Cli::parse();
    std::process::exit(run_and_write(&cli));
}
