use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use gampinn_core::meta_trainer::{
    denoise_run_observed, fine_tune_observed, meta_train, Arm, DenoiseArm, FineTuneConfig, FineTuneRecord,
    MetaEpochRecord,
};
use gampinn_core::network::{init_params, pinn_layer_sizes, read_snapshot, write_snapshot, AdamConfig, MlpParams};
use gampinn_core::oracle_solvers::{solve_burgers, solve_heat2d, write_field, SolutionField, BURGERS_EVAL, HEAT_EVAL};
use gampinn_core::pde_tasks::{sample_task, Equation, IcFamily, TaskSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Command, RunConfig};
use crate::error::{config_err, CliError, CliResult};
use crate::manifest::write_manifest;
use crate::metrics::{
    write_csv, write_meta_trace, write_metrics, write_summary, MetaTraceRecord, MetricsRecord, Status, SummaryRecord,
    Table, META_TRACE_FILE, METRICS_FILE, SCHEMA_VERSION, SUMMARY_FILE,
};
use crate::seeds::{self, derive_seed};

/// Fine-tuning epochs reported in the summary when they were logged.
pub const SUMMARY_EPOCHS: [usize; 3] = [1000, 1500, 2000];

#[derive(Debug, Clone)]
pub struct RunReport {
    pub artifacts: Vec<PathBuf>,
    pub manifest: PathBuf,
    /// Number of training runs that stopped on a non-finite value.
    pub diverged: usize,
}

/// Run the configured command, write the manifest and report artifacts.
pub fn execute(cfg: &RunConfig) -> CliResult<RunReport> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    let (artifacts, diverged) = match cfg.command {
        Command::MetaTrain => meta_train_cmd(cfg)?,
        Command::FineTune => fine_tune_cmd(cfg)?,
        Command::Denoise => denoise_cmd(cfg)?,
        Command::SolveOracle => (solve_oracle_cmd(cfg)?, 0),
        Command::ExportFiguresData => (export_cmd(cfg)?, 0),
    };
    let manifest = write_manifest(cfg, &artifacts)?;
    Ok(RunReport {
        artifacts,
        manifest,
        diverged,
    })
}

fn is_divergence(e: &gampinn_core::Error) -> bool {
    matches!(
        e,
        gampinn_core::Error::NonFinite(_) | gampinn_core::Error::NonFiniteGradient { .. }
    )
}

pub fn snapshot_path(dir: &Path, arm: Arm, family: IcFamily, seed: u64) -> PathBuf {
    dir.join(format!("meta-{}-{}-s{seed}.params", arm.name(), family.name()))
}

/// Oracle solution of `task` on the evaluation grid.
pub fn evaluation_field(task: &TaskSpec, cfg: &RunConfig) -> CliResult<SolutionField> {
    let field = match task.equation {
        Equation::Burgers1D => {
            let (nx, nt) = cfg.burgers_grid;
            solve_burgers(task, nx, nt)?.restrict(&[nt / BURGERS_EVAL.1, nx / BURGERS_EVAL.0])?
        }
        Equation::Heat2D => {
            let (n, nt) = cfg.heat_grid;
            let s = n / HEAT_EVAL.0;
            solve_heat2d(task, n, n, nt)?.restrict(&[nt / HEAT_EVAL.2, s, s])?
        }
    };
    Ok(field)
}

/// Held-out tasks of one master seed.
pub fn eval_tasks(cfg: &RunConfig, seed: u64) -> CliResult<Vec<TaskSpec>> {
    if cfg.theta_list.is_empty() {
        return Ok((0..cfg.eval_tasks)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, seeds::EVAL_TASKS, i as u64));
                sample_task(cfg.family, &mut rng)
            })
            .collect());
    }
    cfg.theta_list
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let s = derive_seed(seed, seeds::EVAL_TASKS, i as u64);
            Ok(TaskSpec::new(cfg.equation, cfg.family, vec![theta], 0.0, s)?)
        })
        .collect()
}

fn elapsed_ms(start: Instant) -> u128 {
    start.elapsed().as_millis()
}

fn fine_tune_config(cfg: &RunConfig, points: (usize, usize)) -> FineTuneConfig {
    FineTuneConfig {
        epochs: cfg.epochs,
        n_collocation: points.0,
        n_ib: points.1,
        adam: AdamConfig {
            learning_rate: cfg.lr,
            ..AdamConfig::default()
        },
        log_every: cfg.log_every,
    }
}

fn network_sizes(cfg: &RunConfig) -> Vec<usize> {
    pinn_layer_sizes(cfg.equation.input_dim())
}

struct MetaJob {
    metrics: Vec<MetricsRecord>,
    trace: Vec<MetaTraceRecord>,
    params: Option<MlpParams>,
}

fn meta_job(cfg: &RunConfig, seed: u64, arm: Arm) -> CliResult<MetaJob> {
    let run_id = format!("meta-train-{}-{}-s{seed}", cfg.family.name(), arm.name());
    let meta = cfg.meta_for(arm);
    let init = init_params(&network_sizes(cfg), derive_seed(seed, seeds::META_INIT, 0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, seeds::META_TRAIN, 0));
    let start = Instant::now();
    let mut metrics = Vec::new();
    let mut trace = Vec::new();
    let last = cfg.epochs.saturating_sub(1);
    let on_epoch = |r: &MetaEpochRecord| {
        let wall_ms = elapsed_ms(start);
        trace.push(MetaTraceRecord {
            run_id: run_id.clone(),
            arm: arm.name().to_string(),
            seed,
            epoch: r.epoch,
            l_meta: r.l_meta,
            gam_calls_support: r.gam_calls.support,
            gam_calls_query: r.gam_calls.query,
            wall_ms,
        });
        if !r.epoch.is_multiple_of(cfg.log_every) && r.epoch != last {
            return;
        }
        for t in &r.tasks {
            let mut row = MetricsRecord::new(&run_id, arm.name(), seed, "meta");
            row.task_index = Some(t.task_index);
            row.task = t.task.record();
            row.epoch = r.epoch;
            row.l_pde = Some(t.query.pde);
            row.l_data = t.query.data;
            row.l_gam = t.support.gam;
            row.l_support = Some(t.support.total);
            row.l_query = Some(t.query.total);
            row.wall_ms = wall_ms;
            metrics.push(row);
        }
    };
    match meta_train(&meta, init, &mut rng, on_epoch) {
        Ok(out) => Ok(MetaJob {
            metrics,
            trace,
            params: Some(out.params),
        }),
        Err(e) if is_divergence(&e) => {
            let mut row = MetricsRecord::new(&run_id, arm.name(), seed, "meta");
            row.status = Status::Diverged;
            row.epoch = trace.len();
            row.wall_ms = elapsed_ms(start);
            metrics.push(row);
            Ok(MetaJob {
                metrics,
                trace,
                params: None,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn meta_train_cmd(cfg: &RunConfig) -> CliResult<(Vec<PathBuf>, usize)> {
    let arms = cfg.meta_arms();
    if arms.is_empty() {
        return config_err("meta-train needs at least one of the maml and gampinn arms");
    }
    for &arm in &arms {
        cfg.meta_for(arm).validate()?;
    }
    let jobs: Vec<(u64, Arm)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| arms.iter().map(move |&a| (s, a)))
        .collect();
    let results: Vec<CliResult<MetaJob>> = jobs.par_iter().map(|&(s, a)| meta_job(cfg, s, a)).collect();

    let mut metrics = Vec::new();
    let mut trace = Vec::new();
    let mut artifacts = Vec::new();
    let mut diverged = 0;
    for (res, &(seed, arm)) in results.into_iter().zip(&jobs) {
        let job = res?;
        match &job.params {
            Some(p) => {
                let path = snapshot_path(&cfg.out_dir, arm, cfg.family, seed);
                write_snapshot(&path, p)?;
                artifacts.push(path);
            }
            None => diverged += 1,
        }
        metrics.extend(job.metrics);
        trace.extend(job.trace);
    }
    let m = cfg.out_dir.join(METRICS_FILE);
    write_metrics(&m, &metrics)?;
    let t = cfg.out_dir.join(META_TRACE_FILE);
    write_meta_trace(&t, &trace)?;
    artifacts.push(m);
    artifacts.push(t);
    Ok((artifacts, diverged))
}

struct TuneJob {
    metrics: Vec<MetricsRecord>,
    trace: Option<Vec<FineTuneRecord>>,
}

#[allow(clippy::too_many_arguments)]
fn tune_rows(
    run_id: &str,
    arm: &str,
    seed: u64,
    task_index: usize,
    task: &TaskSpec,
    phase: &str,
    record: &FineTuneRecord,
    wall_ms: u128,
) -> MetricsRecord {
    let mut row = MetricsRecord::new(run_id, arm, seed, phase);
    row.task_index = Some(task_index);
    row.task = task.record();
    row.epoch = record.epoch;
    row.l_pde = Some(record.pde);
    row.l_data = Some(record.data);
    row.field_mse = Some(record.field_mse);
    row.wall_ms = wall_ms;
    row
}

fn diverged_row(
    run_id: &str,
    arm: &str,
    seed: u64,
    task: Option<(usize, &TaskSpec)>,
    phase: &str,
    epoch: usize,
    start: Instant,
) -> MetricsRecord {
    let mut row = MetricsRecord::new(run_id, arm, seed, phase);
    if let Some((i, t)) = task {
        row.task_index = Some(i);
        row.task = t.record();
    }
    row.status = Status::Diverged;
    row.epoch = epoch;
    row.wall_ms = elapsed_ms(start);
    row
}

fn next_logged(trace: &[FineTuneRecord], log_every: usize) -> usize {
    trace.last().map_or(0, |r| r.epoch + log_every)
}

#[allow(clippy::too_many_arguments)]
fn tune_job(
    cfg: &RunConfig,
    seed: u64,
    arm: Arm,
    index: usize,
    task: &TaskSpec,
    oracle: &SolutionField,
    start_params: &MlpParams,
) -> CliResult<TuneJob> {
    let run_id = format!("fine-tune-{}-{}-s{seed}", cfg.family.name(), arm.name());
    let points = match arm {
        Arm::Random => cfg.random_points,
        _ => cfg.adapted_points,
    };
    let ft = fine_tune_config(cfg, points);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, seeds::FINETUNE_POINTS, index as u64));
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut seen = Vec::new();
    let res = fine_tune_observed(start_params, task, oracle, &ft, &mut rng, |r| {
        rows.push(tune_rows(
            &run_id,
            arm.name(),
            seed,
            index,
            task,
            "finetune",
            r,
            elapsed_ms(start),
        ));
        seen.push(*r);
    });
    match res {
        Ok(out) => Ok(TuneJob {
            metrics: rows,
            trace: Some(out.trace),
        }),
        Err(e) if is_divergence(&e) => {
            let epoch = next_logged(&seen, cfg.log_every);
            rows.push(diverged_row(
                &run_id,
                arm.name(),
                seed,
                Some((index, task)),
                "finetune",
                epoch,
                start,
            ));
            Ok(TuneJob {
                metrics: rows,
                trace: None,
            })
        }
        Err(e) => Err(e.into()),
    }
}

/// Epochs reported in the summary: the standard checkpoints that were
/// logged, then the final epoch.
pub fn summary_epochs(epochs: usize, log_every: usize) -> Vec<usize> {
    let mut out: Vec<usize> = SUMMARY_EPOCHS
        .iter()
        .copied()
        .filter(|&e| e < epochs && e % log_every == 0)
        .collect();
    out.push(epochs);
    out
}

fn summarize(
    run_id: &str,
    arm: &str,
    phase: &str,
    seed: u64,
    traces: &[&[FineTuneRecord]],
    epochs: &[usize],
) -> Vec<SummaryRecord> {
    epochs
        .iter()
        .filter_map(|&epoch| {
            let recs: Vec<&FineTuneRecord> = traces
                .iter()
                .filter_map(|t| t.iter().find(|r| r.epoch == epoch))
                .collect();
            if recs.is_empty() {
                return None;
            }
            let n = recs.len() as f64;
            Some(SummaryRecord {
                run_id: run_id.to_string(),
                arm: arm.to_string(),
                phase: phase.to_string(),
                seed,
                epoch,
                n_tasks: recs.len(),
                mean_field_mse: recs.iter().map(|r| r.field_mse).sum::<f64>() / n,
                mean_l_pde: recs.iter().map(|r| r.pde).sum::<f64>() / n,
                mean_l_data: recs.iter().map(|r| r.data).sum::<f64>() / n,
                max_abs: None,
            })
        })
        .collect()
}

fn fine_tune_cmd(cfg: &RunConfig) -> CliResult<(Vec<PathBuf>, usize)> {
    // every snapshot is loaded before any training starts
    let mut snapshots: BTreeMap<(u64, &'static str), MlpParams> = BTreeMap::new();
    for &seed in &cfg.seeds {
        for arm in cfg.meta_arms() {
            let path = snapshot_path(&cfg.snapshot_dir, arm, cfg.family, seed);
            if !path.exists() {
                return config_err(format!(
                    "no snapshot for arm {} and seed {seed} at {}; run meta-train first",
                    arm.name(),
                    path.display()
                ));
            }
            let p = read_snapshot(&path)?;
            if p.layer_sizes() != network_sizes(cfg).as_slice() {
                return config_err(format!(
                    "{} does not match the {} network",
                    path.display(),
                    cfg.equation.name()
                ));
            }
            snapshots.insert((seed, arm.name()), p);
        }
    }

    let tasks: Vec<(u64, usize, TaskSpec)> = cfg
        .seeds
        .iter()
        .map(|&s| Ok(eval_tasks(cfg, s)?.into_iter().enumerate().map(move |(i, t)| (s, i, t))))
        .collect::<CliResult<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let oracles: Vec<SolutionField> = tasks
        .par_iter()
        .map(|(_, _, t)| evaluation_field(t, cfg))
        .collect::<CliResult<_>>()?;

    let jobs: Vec<(usize, Arm)> = (0..tasks.len())
        .flat_map(|k| cfg.arms.iter().map(move |&a| (k, a)))
        .collect();
    let results: Vec<CliResult<TuneJob>> = jobs
        .par_iter()
        .map(|&(k, arm)| {
            let (seed, index, task) = &tasks[k];
            let start = match arm {
                Arm::Random => init_params(
                    &network_sizes(cfg),
                    derive_seed(*seed, seeds::RANDOM_INIT, *index as u64),
                )?,
                _ => snapshots[&(*seed, arm.name())].clone(),
            };
            tune_job(cfg, *seed, arm, *index, task, &oracles[k], &start)
        })
        .collect();

    let mut metrics = Vec::new();
    let mut traces: BTreeMap<(u64, usize), Vec<Vec<FineTuneRecord>>> = BTreeMap::new();
    let mut diverged = 0;
    for (res, &(k, arm)) in results.into_iter().zip(&jobs) {
        let job = res?;
        metrics.extend(job.metrics);
        let arm_pos = cfg.arms.iter().position(|&a| a == arm).expect("job arm is configured");
        match job.trace {
            Some(t) => traces.entry((tasks[k].0, arm_pos)).or_default().push(t),
            None => diverged += 1,
        }
    }
    // rows grouped by seed, then arm in configured order, then task
    let arm_rank = |name: &str| cfg.arms.iter().position(|a| a.name() == name).unwrap_or(usize::MAX);
    metrics.sort_by_key(|r| (r.seed, arm_rank(&r.arm), r.task_index));

    let epochs = summary_epochs(cfg.epochs, cfg.log_every);
    let mut summary = Vec::new();
    for &seed in &cfg.seeds {
        for (pos, arm) in cfg.arms.iter().enumerate() {
            let run_id = format!("fine-tune-{}-{}-s{seed}", cfg.family.name(), arm.name());
            let ts: Vec<&[FineTuneRecord]> = traces
                .get(&(seed, pos))
                .map(|v| v.iter().map(Vec::as_slice).collect())
                .unwrap_or_default();
            summary.extend(summarize(&run_id, arm.name(), "finetune", seed, &ts, &epochs));
        }
    }

    let m = cfg.out_dir.join(METRICS_FILE);
    write_metrics(&m, &metrics)?;
    let s = cfg.out_dir.join(SUMMARY_FILE);
    write_summary(&s, &summary)?;
    Ok((vec![m, s], diverged))
}

struct DenoiseJob {
    metrics: Vec<MetricsRecord>,
    summary: Vec<SummaryRecord>,
    fields: Vec<(String, SolutionField)>,
    diverged: bool,
}

fn denoise_job(cfg: &RunConfig, seed: u64) -> CliResult<DenoiseJob> {
    let run_id = format!("denoise-s{seed}");
    let task = TaskSpec::new(
        Equation::Burgers1D,
        IcFamily::BurgersSinOnly,
        vec![],
        cfg.noise_p,
        derive_seed(seed, seeds::DENOISE_TASK, 0),
    )?;
    let mut clean_task = task.clone();
    clean_task.noise_weight = 0.0;
    let clean = evaluation_field(&clean_task, cfg)?;
    let init = init_params(&network_sizes(cfg), derive_seed(seed, seeds::DENOISE_INIT, 0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, seeds::DENOISE_POINTS, 0));
    let ft = fine_tune_config(cfg, cfg.random_points);
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut seen: Vec<(DenoiseArm, FineTuneRecord)> = Vec::new();
    let res = denoise_run_observed(&task, &init, &clean, &ft, &cfg.meta.gam, &mut rng, |arm, r| {
        let phase = format!("denoise-{}", arm.name());
        rows.push(tune_rows(
            &run_id,
            "random",
            seed,
            0,
            &task,
            &phase,
            r,
            elapsed_ms(start),
        ));
        seen.push((arm, *r));
    });
    match res {
        Ok(out) => {
            let final_epoch = [cfg.epochs];
            let mut summary = Vec::new();
            for (arm, o, field) in [
                (DenoiseArm::Noisy, &out.noisy, &out.noisy_field),
                (DenoiseArm::Corrected, &out.corrected, &out.corrected_field),
            ] {
                let phase = format!("denoise-{}", arm.name());
                let mut s = summarize(&run_id, "random", &phase, seed, &[o.trace.as_slice()], &final_epoch);
                for r in &mut s {
                    r.max_abs = Some(field.max_abs());
                }
                summary.extend(s);
            }
            Ok(DenoiseJob {
                metrics: rows,
                summary,
                fields: vec![
                    (format!("denoise-s{seed}-clean.field"), clean),
                    (format!("denoise-s{seed}-noisy.field"), out.noisy_field),
                    (format!("denoise-s{seed}-corrected.field"), out.corrected_field),
                ],
                diverged: false,
            })
        }
        Err(e) if is_divergence(&e) => {
            let arm = seen.last().map_or(DenoiseArm::Noisy, |(a, _)| *a);
            let arm_trace: Vec<FineTuneRecord> = seen.iter().filter(|(a, _)| *a == arm).map(|(_, r)| *r).collect();
            let phase = format!("denoise-{}", arm.name());
            let epoch = next_logged(&arm_trace, cfg.log_every);
            rows.push(diverged_row(
                &run_id,
                "random",
                seed,
                Some((0, &task)),
                &phase,
                epoch,
                start,
            ));
            Ok(DenoiseJob {
                metrics: rows,
                summary: Vec::new(),
                fields: vec![(format!("denoise-s{seed}-clean.field"), clean)],
                diverged: true,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn denoise_cmd(cfg: &RunConfig) -> CliResult<(Vec<PathBuf>, usize)> {
    let results: Vec<CliResult<DenoiseJob>> = cfg.seeds.par_iter().map(|&s| denoise_job(cfg, s)).collect();
    let mut metrics = Vec::new();
    let mut summary = Vec::new();
    let mut artifacts = Vec::new();
    let mut diverged = 0;
    for res in results {
        let job = res?;
        metrics.extend(job.metrics);
        summary.extend(job.summary);
        diverged += job.diverged as usize;
        for (name, field) in job.fields {
            let path = cfg.out_dir.join(name);
            write_field(&path, &field)?;
            artifacts.push(path);
        }
    }
    let m = cfg.out_dir.join(METRICS_FILE);
    write_metrics(&m, &metrics)?;
    let s = cfg.out_dir.join(SUMMARY_FILE);
    write_summary(&s, &summary)?;
    artifacts.push(m);
    artifacts.push(s);
    Ok((artifacts, diverged))
}

fn solve_oracle_cmd(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let params = if cfg.task_params.is_empty() {
        vec![0.0; cfg.family.arity()]
    } else {
        cfg.task_params.clone()
    };
    let task = TaskSpec::new(cfg.equation, cfg.family, params.clone(), 0.0, 0)?;
    let field = match cfg.equation {
        Equation::Burgers1D => solve_burgers(&task, cfg.burgers_grid.0, cfg.burgers_grid.1)?,
        Equation::Heat2D => solve_heat2d(&task, cfg.heat_grid.0, cfg.heat_grid.0, cfg.heat_grid.1)?,
    };
    let tag: Vec<String> = params.iter().map(|v| format!("{v:?}")).collect();
    let mut name = format!("oracle-{}", cfg.family.name());
    if !tag.is_empty() {
        name.push('-');
        name.push_str(&tag.join("_"));
    }
    let path = cfg.out_dir.join(format!("{name}.field"));
    write_field(&path, &field)?;
    Ok(vec![path])
}

#[derive(Default)]
struct Samples(Vec<f64>);

impl Samples {
    fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Sample standard deviation, zero for a single value.
    fn sd(&self) -> f64 {
        let n = self.0.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.0.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

fn f(v: f64) -> String {
    crate::metrics::num(Some(v))
}

fn export_cmd(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let inputs = if cfg.inputs.is_empty() {
        vec![cfg.out_dir.clone()]
    } else {
        cfg.inputs.clone()
    };
    // (family, arm, epoch) -> field MSE over every task and seed
    let mut curves: BTreeMap<(String, String, usize), Samples> = BTreeMap::new();
    // (family, arm, task parameters, epoch)
    let mut cells: BTreeMap<(String, String, String, usize), Samples> = BTreeMap::new();
    for dir in &inputs {
        let table = Table::read(&dir.join(METRICS_FILE))?;
        let (c_arm, c_task, c_phase, c_status, c_epoch, c_mse) = (
            table.column("arm")?,
            table.column("task")?,
            table.column("phase")?,
            table.column("status")?,
            table.column("epoch")?,
            table.column("field_mse")?,
        );
        for row in &table.rows {
            if row[c_phase] != "finetune" || row[c_status] != Status::Ok.name() {
                continue;
            }
            let task = TaskSpec::from_str(&row[c_task])?;
            let bad =
                |what: &str| CliError::Core(gampinn_core::Error::Format(format!("bad {what} in {}", dir.display())));
            let epoch: usize = row[c_epoch].parse().map_err(|_| bad("epoch"))?;
            let mse: f64 = row[c_mse].parse().map_err(|_| bad("field_mse"))?;
            let family = task.ic_family.name().to_string();
            let arm = row[c_arm].clone();
            curves
                .entry((family.clone(), arm.clone(), epoch))
                .or_default()
                .0
                .push(mse);
            if SUMMARY_EPOCHS.contains(&epoch) {
                let params: Vec<String> = task.params.iter().map(|v| format!("{v:?}")).collect();
                cells
                    .entry((family, arm, params.join(";"), epoch))
                    .or_default()
                    .0
                    .push(mse);
            }
        }
    }

    let conv_path = cfg.out_dir.join("convergence.csv");
    write_csv(
        &conv_path,
        &[
            "schema",
            "family",
            "arm",
            "epoch",
            "n",
            "mean_field_mse",
            "sd_field_mse",
            "ci95_low",
            "ci95_high",
        ],
        curves.iter().map(|((family, arm, epoch), s)| {
            let (m, sd, n) = (s.mean(), s.sd(), s.0.len());
            let half = 1.96 * sd / (n as f64).sqrt();
            vec![
                SCHEMA_VERSION.to_string(),
                family.clone(),
                arm.clone(),
                epoch.to_string(),
                n.to_string(),
                f(m),
                f(sd),
                f(m - half),
                f(m + half),
            ]
        }),
    )?;

    let table_path = cfg.out_dir.join("table.csv");
    let mut rows = Vec::new();
    for ((family, arm, params, epoch), s) in &cells {
        rows.push(vec![
            SCHEMA_VERSION.to_string(),
            family.clone(),
            arm.clone(),
            params.clone(),
            epoch.to_string(),
            s.0.len().to_string(),
            f(s.mean()),
        ]);
    }
    for ((family, arm, epoch), s) in &curves {
        if SUMMARY_EPOCHS.contains(epoch) {
            rows.push(vec![
                SCHEMA_VERSION.to_string(),
                family.clone(),
                arm.clone(),
                "mean".to_string(),
                epoch.to_string(),
                s.0.len().to_string(),
                f(s.mean()),
            ]);
        }
    }
    write_csv(
        &table_path,
        &["schema", "family", "arm", "task", "epoch", "n", "mean_field_mse"],
        rows,
    )?;
    Ok(vec![conv_path, table_path])
}
