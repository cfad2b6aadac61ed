//! Command-line front end for `compandor`: argument parsing, configuration
//! resolution and the CSV/JSON writers behind each subcommand.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod settings;

use args::{Cli, Command};
use error::CliError;
use settings::FileSettings;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let file = FileSettings::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Design(a) => commands::design(a, &file),
        Command::Tables(a) => commands::tables(a, &file),
        Command::Figure(a) => commands::figure(a, &file),
        Command::Montecarlo(a) => commands::montecarlo(a, &file),
        Command::Sweep(a) => commands::sweep(a, &file),
    }
}
