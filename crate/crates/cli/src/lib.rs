//! Command-line driver for meta-learned PINN experiments.
//!
//! Five subcommands share one set of configuration keys (see
//! [`config::KEYS`]). Each run writes its CSV outputs, any snapshots or
//! field files, and a `manifest.txt` that reproduces it when passed back
//! through `--config`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod seeds;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches};

pub use commands::{execute, RunReport};
pub use config::{Command, RunConfig, KEYS, OUT_ENV};
pub use error::{CliError, CliResult};

/// The clap definition of the `gampinn` binary.
pub fn cli() -> clap::Command {
    let mut root = clap::Command::new("gampinn")
        .about("Meta-learned PINN initializations with GAM residual losses")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for cmd in Command::ALL {
        let mut sub = clap::Command::new(cmd.name()).about(cmd.about()).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key = value configuration file, for example a previous run's manifest"),
        );
        for k in KEYS.iter().filter(|k| k.name != "command") {
            let mut arg = Arg::new(k.name)
                .long(k.name.replace('_', "-"))
                .value_name("VALUE")
                .help(k.help)
                .action(ArgAction::Set);
            if k.name == "fixed_task_pool" {
                arg = arg.num_args(0..=1).default_missing_value("true");
            }
            if k.name == "out_dir" {
                arg = arg.alias("out");
            }
            sub = sub.arg(arg);
        }
        root = root.subcommand(sub);
    }
    root
}

fn flags_of(m: &ArgMatches) -> Vec<(String, String)> {
    KEYS.iter()
        .filter(|k| k.name != "command")
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect()
}

/// Parse arguments into a resolved configuration. `env_out` stands in for
/// the output-directory environment variable.
pub fn parse_args<I, T>(args: I, env_out: Option<&str>) -> CliResult<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = cli().try_get_matches_from(args)?;
    let (name, sub) = matches
        .subcommand()
        .ok_or_else(|| CliError::Config("a subcommand is required".into()))?;
    let cmd: Command = name.parse()?;
    let file = match sub.get_one::<String>("config") {
        Some(path) => config::read_config_file(&PathBuf::from(path))?,
        None => Vec::new(),
    };
    RunConfig::resolve(cmd, &file, &flags_of(sub), env_out)
}

/// Resolve the configuration and execute it on a pool of `threads` workers
/// (0 picks one per core).
pub fn run<I, T>(args: I, env_out: Option<&str>) -> CliResult<RunReport>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = parse_args(args, env_out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", cfg.threads)))?;
    let report = pool.install(|| execute(&cfg))?;
    if report.diverged > 0 {
        return Err(CliError::Diverged(report.diverged));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clap_definition_is_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn flags_map_to_keys() {
        let cfg = parse_args(
            [
                "gampinn",
                "meta-train",
                "--equation",
                "burgers",
                "--arm",
                "gampinn",
                "--epochs",
                "10",
                "--seed",
                "1",
            ],
            None,
        )
        .unwrap();
        assert_eq!(cfg.epochs, 10);
        assert_eq!(cfg.arms.len(), 1);
        let cfg = parse_args(["gampinn", "meta-train", "--fixed-task-pool", "--out", "x"], None).unwrap();
        assert!(cfg.meta.fixed_task_pool);
        assert_eq!(cfg.out_dir, PathBuf::from("x"));
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let err = parse_args(["gampinn", "meta-train", "--bogus", "1"], None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
