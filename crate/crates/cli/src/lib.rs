//! `leadlag` command-line pipeline: simulate → compute → cluster → network → enrich.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};

pub mod commands;
pub mod config;

pub use config::{RunConfig, KEYS};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config values.
    Usage(String),
    /// Missing, unreadable or invalid input data.
    Data(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Data(m) => f.write_str(m),
        }
    }
}

impl From<leadlag_core::Error> for CliError {
    fn from(e: leadlag_core::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
        }
    }
}

const SUBCOMMANDS: [(&str, &str); 6] = [
    ("simulate", "simulate a cohort: expression.csv, truth_prior.csv"),
    ("compute", "all-pairs metrics: similarity.csv, pair_metrics.tsv, prior.csv"),
    ("cluster", "Ward clustering: clusters.csv, dendrogram.json"),
    ("network", "thresholded network: edges.tsv, degrees.tsv, network.dot"),
    ("enrich", "annotation enrichment per cluster: enrichment.csv"),
    ("run", "every stage in order"),
];

fn key_args() -> Vec<Arg> {
    let mut args = vec![Arg::new("config")
        .long("config")
        .value_name("PATH")
        .value_parser(clap::value_parser!(PathBuf))
        .help("key = value config file")];
    for k in KEYS {
        let help = match k.default {
            Some(d) => format!("{} [default: {d}]", k.help),
            None => k.help.to_string(),
        };
        args.push(
            Arg::new(k.key)
                .long(k.key)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .help(help)
                .help_heading("Config keys"),
        );
    }
    args
}

pub fn command() -> Command {
    let mut cmd = Command::new("leadlag")
        .about("Lead-lag association analysis of short time courses")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(name).about(about).args(key_args()));
    }
    cmd
}

fn resolve(m: &ArgMatches) -> Result<RunConfig, CliError> {
    let overrides: Vec<(String, String)> = KEYS
        .iter()
        .filter_map(|k| m.get_one::<String>(k.key).map(|v| (k.key.to_string(), v.clone())))
        .collect();
    config::load(m.get_one::<PathBuf>("config").map(PathBuf::as_path), &overrides)
}

/// Parses `args` and runs one subcommand, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let result = resolve(sub).and_then(|config| match name {
        "simulate" => commands::simulate(&config),
        "compute" => commands::compute(&config),
        "cluster" => commands::cluster(&config),
        "network" => commands::network(&config),
        "enrich" => commands::enrich(&config),
        _ => commands::run_all(&config),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
