//! Command-line driver: config resolution, subcommand dispatch and the
//! model check on external data.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    cmd_dispatch, cmd_test, parse_xy, read_xy, ExitStatus, TestOptions, TestReport,
};
pub use config::{
    parse_config, resolve, Cli, Command, CommandKind, FileConfig, Flags, RunConfig, Settings,
};
pub use error::{CliError, CliResult};

/// Parses an argument vector (including the program name) and runs it.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (kind, flags) = cli.command.split();
    match parse_config(kind, flags).and_then(|run| cmd_dispatch(&run)) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
