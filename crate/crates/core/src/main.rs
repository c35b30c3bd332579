use clap::Parser;
use sfa::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
