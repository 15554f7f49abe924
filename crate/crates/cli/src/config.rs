//! Run configuration.
//!
//! Values come from three layers, later ones winning: built-in defaults, an
//! optional `key = value` file (`#` starts a comment) and command-line
//! flags. Every key is a flag of the same name with dashes, so
//! `support_nf = 20` in a file and `--support-nf 20` are equivalent.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gampinn_core::gam::{GamConfig, LossMode};
use gampinn_core::meta_trainer::{Arm, MetaConfig, OuterMode};
use gampinn_core::oracle_solvers::{BURGERS_EVAL, BURGERS_NT, BURGERS_NX, HEAT_EVAL, HEAT_NT, HEAT_NX};
use gampinn_core::pde_tasks::{Equation, IcFamily};

use crate::error::{config_err, CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "GAMPINN_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    MetaTrain,
    FineTune,
    Denoise,
    SolveOracle,
    ExportFiguresData,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::MetaTrain,
        Command::FineTune,
        Command::Denoise,
        Command::SolveOracle,
        Command::ExportFiguresData,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::MetaTrain => "meta-train",
            Command::FineTune => "fine-tune",
            Command::Denoise => "denoise",
            Command::SolveOracle => "solve-oracle",
            Command::ExportFiguresData => "export-figures-data",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::MetaTrain => "Meta-train PINN initializations and save one snapshot per arm and seed",
            Command::FineTune => "Fine-tune each arm on held-out tasks and score against oracle fields",
            Command::Denoise => "Train on a noisy Burgers task with and without the GAM residual correction",
            Command::SolveOracle => "Solve one task with the finite-difference oracle and save the field",
            Command::ExportFiguresData => "Aggregate fine-tuning metrics into convergence and table data",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown command `{s}`")))
    }
}

pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, help: &'static str) -> Key {
    Key { name, help }
}

/// Every recognised configuration key.
pub const KEYS: &[Key] = &[
    key("command", "subcommand the configuration belongs to"),
    key("equation", "burgers or heat2d"),
    key("ic_family", "sincos, sin, amplitude, frequency, frequency-y or auto"),
    key("arm", "comma-separated arms: random, maml, gampinn"),
    key("seed", "comma-separated master seeds"),
    key("threads", "worker threads, 0 uses every core"),
    key("out_dir", "output directory"),
    key(
        "snapshot_dir",
        "directory with meta-trained snapshots, defaults to out_dir",
    ),
    key("epochs", "meta-epochs for meta-train, training epochs otherwise"),
    key("log_every", "epochs between logged metrics rows"),
    key("tasks", "tasks per meta-batch"),
    key("inner_steps", "inner gradient steps per task"),
    key("inner_lr", "inner learning rate"),
    key("outer_lr", "outer Adam learning rate"),
    key("outer_mode", "first-order or second-order"),
    key("epsilon", "stop meta-training once the meta loss reaches this"),
    key("fixed_task_pool", "reuse one task batch for every meta-epoch"),
    key("support_nf", "support collocation points"),
    key("support_nib", "support initial/boundary points"),
    key("query_nf", "query collocation points"),
    key("query_nib", "query initial/boundary points"),
    key("gam_basis", "B-spline basis functions per feature"),
    key("gam_lambda", "smoothing penalty"),
    key("gam_tolerance", "backfitting tolerance"),
    key("gam_max_cycles", "backfitting cycle limit"),
    key("gam_loss", "smoothed or literal"),
    key("lr", "fine-tuning Adam learning rate"),
    key("eval_tasks", "number of sampled held-out tasks"),
    key(
        "theta_list",
        "comma-separated held-out parameters for one-parameter families",
    ),
    key("task_params", "comma-separated task parameters for solve-oracle"),
    key("random_nf", "collocation points when fine-tuning the random arm"),
    key("random_nib", "initial/boundary points when fine-tuning the random arm"),
    key("adapted_nf", "collocation points when fine-tuning a meta-trained arm"),
    key(
        "adapted_nib",
        "initial/boundary points when fine-tuning a meta-trained arm",
    ),
    key("noise_p", "equation noise weight for denoise"),
    key("burgers_nx", "oracle intervals in x for Burgers"),
    key("burgers_nt", "oracle time steps for Burgers"),
    key("heat_n", "oracle intervals per spatial axis for the heat equation"),
    key("heat_nt", "oracle time steps for the heat equation"),
    key("inputs", "comma-separated run directories for export-figures-data"),
];

pub fn is_key(name: &str) -> bool {
    KEYS.iter().any(|k| k.name == name)
}

fn default_value(name: &str, cmd: Command, env_out: Option<&str>) -> String {
    let s = match name {
        "command" => cmd.name(),
        "equation" => "burgers",
        "ic_family" => "auto",
        "arm" => match cmd {
            Command::MetaTrain => "maml,gampinn",
            _ => "random,maml,gampinn",
        },
        "seed" => "1",
        "threads" => "0",
        "out_dir" => env_out.unwrap_or("runs"),
        "snapshot_dir" => "",
        "epochs" => match cmd {
            Command::MetaTrain => "7000",
            _ => "2000",
        },
        "log_every" => "50",
        "tasks" => "5",
        "inner_steps" => "1",
        "inner_lr" | "outer_lr" | "lr" => "0.005",
        "outer_mode" => "first-order",
        "epsilon" => "0.001",
        "fixed_task_pool" => "false",
        "support_nf" | "query_nf" | "adapted_nf" => "20",
        "support_nib" | "query_nib" | "adapted_nib" => "10",
        "gam_basis" => "12",
        "gam_lambda" => "0.001",
        "gam_tolerance" => "0.000001",
        "gam_max_cycles" => "100",
        "gam_loss" => "smoothed",
        "eval_tasks" => "10",
        "theta_list" | "task_params" | "inputs" => "",
        "random_nf" => "10000",
        "random_nib" => "100",
        "noise_p" => "0",
        "burgers_nx" => return BURGERS_NX.to_string(),
        "burgers_nt" => return BURGERS_NT.to_string(),
        "heat_n" => return HEAT_NX.to_string(),
        "heat_nt" => return HEAT_NT.to_string(),
        _ => unreachable!("every key has a default"),
    };
    s.to_string()
}

/// Parse `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return config_err(format!("line {}: expected `key = value`", n + 1));
        };
        let k = k.trim();
        if !is_key(k) {
            return config_err(format!("line {}: unknown key `{k}`", n + 1));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> CliResult<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_text(&text)
}

/// Fully resolved and validated configuration of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub equation: Equation,
    pub family: IcFamily,
    pub arms: Vec<Arm>,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub snapshot_dir: PathBuf,
    pub epochs: usize,
    pub log_every: usize,
    /// Meta-training settings; `meta_epochs` equals `epochs` for meta-train.
    pub meta: MetaConfig,
    pub lr: f64,
    pub eval_tasks: usize,
    pub theta_list: Vec<f64>,
    pub task_params: Vec<f64>,
    pub random_points: (usize, usize),
    pub adapted_points: (usize, usize),
    pub noise_p: f64,
    /// Oracle intervals in x and time steps.
    pub burgers_grid: (usize, usize),
    /// Oracle intervals per spatial axis and time steps.
    pub heat_grid: (usize, usize),
    pub inputs: Vec<PathBuf>,
    /// The resolved value of every key, as written to the manifest.
    pub values: BTreeMap<String, String>,
}

fn parse<T: FromStr>(values: &BTreeMap<String, String>, k: &str) -> CliResult<T> {
    let v = &values[k];
    v.parse()
        .map_err(|_| CliError::Config(format!("invalid value `{v}` for {k}")))
}

fn parse_list<T: FromStr>(values: &BTreeMap<String, String>, k: &str) -> CliResult<Vec<T>> {
    values[k]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Config(format!("invalid entry `{s}` in {k}")))
        })
        .collect()
}

fn parse_bool(values: &BTreeMap<String, String>, k: &str) -> CliResult<bool> {
    match values[k].as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => config_err(format!("invalid value `{v}` for {k}, expected true or false")),
    }
}

fn positive(n: usize, k: &str) -> CliResult<usize> {
    if n == 0 {
        return config_err(format!("{k} must be at least 1"));
    }
    Ok(n)
}

fn default_family(equation: Equation, cmd: Command) -> IcFamily {
    match (equation, cmd) {
        (Equation::Burgers1D, Command::Denoise) => IcFamily::BurgersSinOnly,
        (Equation::Burgers1D, _) => IcFamily::BurgersSinCos,
        (Equation::Heat2D, _) => IcFamily::HeatAmplitude,
    }
}

impl RunConfig {
    /// Layer defaults, file entries and flags, then validate.
    pub fn resolve(
        cmd: Command,
        file: &[(String, String)],
        flags: &[(String, String)],
        env_out: Option<&str>,
    ) -> CliResult<RunConfig> {
        let mut values: BTreeMap<String, String> = KEYS
            .iter()
            .map(|k| (k.name.to_string(), default_value(k.name, cmd, env_out)))
            .collect();
        for (k, v) in file.iter().chain(flags) {
            if !is_key(k) {
                return config_err(format!("unknown key `{k}`"));
            }
            values.insert(k.clone(), v.clone());
        }
        if values["command"] != cmd.name() {
            return config_err(format!(
                "configuration is for `{}`, not `{}`",
                values["command"],
                cmd.name()
            ));
        }

        let equation: Equation = values["equation"].parse()?;
        let family = match values["ic_family"].as_str() {
            "auto" => default_family(equation, cmd),
            s => s.parse::<IcFamily>()?,
        };
        if family.equation() != equation {
            return config_err(format!(
                "family {} does not belong to {}",
                family.name(),
                equation.name()
            ));
        }
        values.insert("equation".into(), equation.name().to_string());
        values.insert("ic_family".into(), family.name().to_string());

        let arms: Vec<Arm> = values["arm"]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        if arms.is_empty() {
            return config_err("at least one arm is required");
        }
        let seeds: Vec<u64> = parse_list(&values, "seed")?;
        if seeds.is_empty() {
            return config_err("at least one seed is required");
        }
        let out_dir = PathBuf::from(&values["out_dir"]);
        if values["snapshot_dir"].is_empty() {
            values.insert("snapshot_dir".into(), values["out_dir"].clone());
        }
        let snapshot_dir = PathBuf::from(&values["snapshot_dir"]);

        let epochs: usize = parse(&values, "epochs")?;
        let log_every = positive(parse(&values, "log_every")?, "log_every")?;
        let gam = GamConfig {
            n_basis: parse(&values, "gam_basis")?,
            lambda: parse(&values, "gam_lambda")?,
            tolerance: parse(&values, "gam_tolerance")?,
            max_cycles: parse(&values, "gam_max_cycles")?,
        };
        let meta = MetaConfig {
            family,
            arm: arms
                .iter()
                .copied()
                .find(|a| *a != Arm::Random)
                .unwrap_or(Arm::MamlPinn),
            outer_mode: parse::<OuterMode>(&values, "outer_mode")?,
            n_tasks: parse(&values, "tasks")?,
            inner_steps: parse(&values, "inner_steps")?,
            inner_lr: parse(&values, "inner_lr")?,
            outer_lr: parse(&values, "outer_lr")?,
            meta_epochs: epochs,
            support_nf: parse(&values, "support_nf")?,
            support_nib: parse(&values, "support_nib")?,
            query_nf: parse(&values, "query_nf")?,
            query_nib: parse(&values, "query_nib")?,
            epsilon: parse(&values, "epsilon")?,
            fixed_task_pool: parse_bool(&values, "fixed_task_pool")?,
            gam,
            loss_mode: parse::<LossMode>(&values, "gam_loss")?,
        };
        meta.validate()?;

        let lr: f64 = parse(&values, "lr")?;
        if !(lr > 0.0 && lr.is_finite()) {
            return config_err("lr must be positive");
        }
        let noise_p: f64 = parse(&values, "noise_p")?;
        if !(noise_p >= 0.0 && noise_p.is_finite()) {
            return config_err("noise_p must be finite and non-negative");
        }

        let burgers_grid = (parse(&values, "burgers_nx")?, parse(&values, "burgers_nt")?);
        let heat_grid = (parse(&values, "heat_n")?, parse(&values, "heat_nt")?);
        check_grid("burgers_nx", burgers_grid.0, BURGERS_EVAL.0)?;
        check_grid("burgers_nt", burgers_grid.1, BURGERS_EVAL.1)?;
        check_grid("heat_n", heat_grid.0, HEAT_EVAL.0)?;
        check_grid("heat_nt", heat_grid.1, HEAT_EVAL.2)?;

        let theta_list: Vec<f64> = parse_list(&values, "theta_list")?;
        if !theta_list.is_empty() && family.arity() != 1 {
            return config_err(format!(
                "theta_list needs a one-parameter family, {} takes {}",
                family.name(),
                family.arity()
            ));
        }
        let inputs: Vec<PathBuf> = values["inputs"]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(PathBuf::from)
            .collect();

        let cfg = RunConfig {
            command: cmd,
            equation,
            family,
            arms,
            seeds,
            threads: parse(&values, "threads")?,
            out_dir,
            snapshot_dir,
            epochs,
            log_every,
            meta,
            lr,
            eval_tasks: parse(&values, "eval_tasks")?,
            theta_list,
            task_params: parse_list(&values, "task_params")?,
            random_points: (
                positive(parse(&values, "random_nf")?, "random_nf")?,
                positive(parse(&values, "random_nib")?, "random_nib")?,
            ),
            adapted_points: (
                positive(parse(&values, "adapted_nf")?, "adapted_nf")?,
                positive(parse(&values, "adapted_nib")?, "adapted_nib")?,
            ),
            noise_p,
            burgers_grid,
            heat_grid,
            inputs,
            values,
        };
        cfg.check_command()?;
        Ok(cfg)
    }

    fn check_command(&self) -> CliResult<()> {
        match self.command {
            Command::FineTune => {
                if self.theta_list.is_empty() && self.eval_tasks == 0 {
                    return config_err("eval_tasks must be at least 1");
                }
            }
            Command::Denoise => {
                if !(self.noise_p > 0.0) {
                    return config_err("denoise needs noise_p > 0; use fine-tune for clean tasks");
                }
                if self.family != IcFamily::BurgersSinOnly {
                    return config_err("denoise runs on the Burgers `sin` family");
                }
            }
            Command::SolveOracle => {
                if !self.task_params.is_empty() && self.task_params.len() != self.family.arity() {
                    return config_err(format!(
                        "family {} takes {} parameter(s), task_params has {}",
                        self.family.name(),
                        self.family.arity(),
                        self.task_params.len()
                    ));
                }
            }
            Command::MetaTrain | Command::ExportFiguresData => {}
        }
        Ok(())
    }

    /// Arms that go through meta-training.
    pub fn meta_arms(&self) -> Vec<Arm> {
        self.arms.iter().copied().filter(|a| *a != Arm::Random).collect()
    }

    /// Meta-training settings for one arm.
    pub fn meta_for(&self, arm: Arm) -> MetaConfig {
        MetaConfig {
            arm,
            ..self.meta.clone()
        }
    }

    /// Text of a configuration file reproducing this run.
    pub fn to_config_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn check_grid(k: &str, n: usize, eval: usize) -> CliResult<()> {
    if n < eval || !n.is_multiple_of(eval) {
        return config_err(format!("{k} = {n} must be a positive multiple of {eval}"));
    }
    Ok(())
}
