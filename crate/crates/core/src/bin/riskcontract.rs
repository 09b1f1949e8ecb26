use clap::Parser;
use riskcontract::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
