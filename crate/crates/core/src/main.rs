use clap::Parser;

use bessel_snake::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
