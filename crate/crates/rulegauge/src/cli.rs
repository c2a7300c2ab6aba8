//! Command-line front end (placeholder while the library is scaffolded).

use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "rulegauge")]
pub struct Cli {}

pub fn run(_cli: Cli) -> crate::error::Result<()> {
    Ok(())
}
