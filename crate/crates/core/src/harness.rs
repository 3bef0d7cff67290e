//! Experiment runner behind the `distrank` command line.
//!
//! An [`ExperimentConfig`] names a graph file, an algorithm and its schedule.
//! [`run_experiment`] produces one trace, [`monte_carlo`] averages the
//! errors of independently seeded replicas, and [`compare`] aligns several
//! runs on the cumulative-update axis.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::cluster::{run_clustered, GroupFactors, DEFAULT_GROUP_DENSE_CAP};
use crate::error::{Error, Result};
use crate::graph::{Damping, Partition, WebGraph};
use crate::push::{run, run_sync, PushEngine};
use crate::reference::{power_method, Oracle, DEFAULT_DENSE_CAP};
use crate::schedule::{
    group_size_weights, indegree_plus_one, parse_sequence, parse_weights, Schedule,
};
use crate::trace::{fmt_f64, Cadence, StopRule, Trace, TraceOptions, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Dense solve only.
    Exact,
    Power,
    Sync,
    Gossip,
    Multi,
    Cluster,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Exact => "exact",
            Algorithm::Power => "power",
            Algorithm::Sync => "sync",
            Algorithm::Gossip => "gossip",
            Algorithm::Multi => "multi",
            Algorithm::Cluster => "cluster",
        }
    }

    fn takes_schedule(self) -> bool {
        matches!(
            self,
            Algorithm::Gossip | Algorithm::Multi | Algorithm::Cluster
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact" => Algorithm::Exact,
            "power" => Algorithm::Power,
            "sync" => Algorithm::Sync,
            "gossip" => Algorithm::Gossip,
            "multi" => Algorithm::Multi,
            "cluster" => Algorithm::Cluster,
            other => return Err(Error::config(format!("unknown algorithm {other:?}"))),
        })
    }
}

/// Schedule as written on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    /// `uniform`: one random page (or group) per step, drawn from the weight
    /// policy.
    Random,
    /// `round-robin`
    RoundRobin,
    /// `subset:<q>`
    Subset(f64),
    /// `periodic`: groups in turn.
    Periodic,
    /// `sequence:<path>`
    Sequence(PathBuf),
}

impl ScheduleSpec {
    pub fn is_random(&self) -> bool {
        matches!(self, ScheduleSpec::Random | ScheduleSpec::Subset(_))
    }
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleSpec::Random => f.write_str("uniform"),
            ScheduleSpec::RoundRobin => f.write_str("round-robin"),
            ScheduleSpec::Subset(q) => write!(f, "subset:{q}"),
            ScheduleSpec::Periodic => f.write_str("periodic"),
            ScheduleSpec::Sequence(p) => write!(f, "sequence:{}", p.display()),
        }
    }
}

impl FromStr for ScheduleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "random" => return Ok(ScheduleSpec::Random),
            "round-robin" => return Ok(ScheduleSpec::RoundRobin),
            "periodic" => return Ok(ScheduleSpec::Periodic),
            _ => {}
        }
        if let Some(q) = s.strip_prefix("subset:") {
            let q: f64 = q
                .parse()
                .map_err(|_| Error::config(format!("bad subset probability in {s:?}")))?;
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::config(format!(
                    "subset probability {q} must lie in (0, 1]"
                )));
            }
            return Ok(ScheduleSpec::Subset(q));
        }
        if let Some(p) = s.strip_prefix("sequence:") {
            return Ok(ScheduleSpec::Sequence(PathBuf::from(p)));
        }
        Err(Error::config(format!(
            "unknown schedule {s:?}; expected uniform, round-robin, subset:<q>, periodic or sequence:<path>"
        )))
    }
}

/// Selection weights for [`ScheduleSpec::Random`].
#[derive(Debug, Clone, PartialEq)]
pub enum WeightPolicy {
    Uniform,
    InDegreePlusOne,
    /// Groups weighted by size (cluster only).
    GroupSize,
    /// `index weight` lines.
    File(PathBuf),
}

impl fmt::Display for WeightPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightPolicy::Uniform => f.write_str("uniform"),
            WeightPolicy::InDegreePlusOne => f.write_str("indegree_plus_one"),
            WeightPolicy::GroupSize => f.write_str("size"),
            WeightPolicy::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for WeightPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(WeightPolicy::Uniform),
            "indegree_plus_one" => Ok(WeightPolicy::InDegreePlusOne),
            "size" => Ok(WeightPolicy::GroupSize),
            _ => match s.strip_prefix("file:") {
                Some(p) => Ok(WeightPolicy::File(PathBuf::from(p))),
                None => Err(Error::config(format!(
                    "unknown weight policy {s:?}; expected uniform, indegree_plus_one, size or file:<path>"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: PathBuf,
    pub index_base: usize,
    pub m: f64,
    pub algorithm: Algorithm,
    /// Defaults to `uniform` for gossip, `subset:0.5` for multi and
    /// `periodic` for cluster.
    pub schedule: Option<ScheduleSpec>,
    pub weights: Option<WeightPolicy>,
    pub partition: Option<PathBuf>,
    pub steps: usize,
    pub tol: Option<f64>,
    pub seed: u64,
    pub replicas: usize,
    pub out: Option<PathBuf>,
    /// Keep every `j`-th step; by default every step up to 1,000 pages and
    /// every `n` updates beyond.
    pub cadence: Option<usize>,
    pub record_x: bool,
    pub dense_cap: usize,
    pub group_dense_cap: usize,
}

impl ExperimentConfig {
    pub fn new(graph: impl Into<PathBuf>, algorithm: Algorithm) -> Self {
        Self {
            graph: graph.into(),
            index_base: 0,
            m: Damping::DEFAULT.value(),
            algorithm,
            schedule: None,
            weights: None,
            partition: None,
            steps: 10_000,
            tol: None,
            seed: 0,
            replicas: 1,
            out: None,
            cadence: None,
            record_x: false,
            dense_cap: DEFAULT_DENSE_CAP,
            group_dense_cap: DEFAULT_GROUP_DENSE_CAP,
        }
    }

    fn damping(&self) -> Result<Damping> {
        Damping::new(self.m).map_err(|e| Error::config(e.to_string()))
    }

    pub fn effective_schedule(&self) -> Option<ScheduleSpec> {
        match self.algorithm {
            Algorithm::Gossip => Some(self.schedule.clone().unwrap_or(ScheduleSpec::Random)),
            Algorithm::Multi => Some(self.schedule.clone().unwrap_or(ScheduleSpec::Subset(0.5))),
            Algorithm::Cluster => Some(self.schedule.clone().unwrap_or(ScheduleSpec::Periodic)),
            _ => None,
        }
    }

    /// Checks field compatibility without touching any file.
    pub fn validate(&self) -> Result<()> {
        self.damping()?;
        if self.index_base > 1 {
            return Err(Error::config(format!(
                "index base must be 0 or 1, got {}",
                self.index_base
            )));
        }
        let alg = self.algorithm;
        match (alg, &self.partition) {
            (Algorithm::Cluster, None) => return Err(Error::config("cluster needs --partition")),
            (a, Some(_)) if a != Algorithm::Cluster => {
                return Err(Error::config(format!(
                    "--partition only applies to cluster, not {a}"
                )))
            }
            _ => {}
        }
        if !alg.takes_schedule() && (self.schedule.is_some() || self.weights.is_some()) {
            return Err(Error::config(format!(
                "{alg} does not take a schedule or weights"
            )));
        }
        if let Some(spec) = self.effective_schedule() {
            let ok = match (&spec, alg) {
                (ScheduleSpec::Subset(_), Algorithm::Gossip) => false,
                (ScheduleSpec::Periodic, a) => a == Algorithm::Cluster,
                (ScheduleSpec::Subset(_), Algorithm::Cluster) => false,
                _ => true,
            };
            if !ok {
                return Err(Error::config(format!(
                    "schedule {spec} does not apply to {alg}"
                )));
            }
            if self.weights.is_some() && spec != ScheduleSpec::Random {
                return Err(Error::config(
                    "--weights only applies to the uniform (random) schedule",
                ));
            }
        }
        match (&self.weights, alg) {
            (Some(WeightPolicy::GroupSize), a) if a != Algorithm::Cluster => {
                return Err(Error::config("size weights only apply to cluster"))
            }
            (Some(WeightPolicy::InDegreePlusOne), Algorithm::Cluster) => {
                return Err(Error::config(
                    "indegree_plus_one weights apply to pages, not groups",
                ))
            }
            _ => {}
        }
        if self.steps == 0 {
            return Err(Error::config("--steps must be positive"));
        }
        if let Some(t) = self.tol {
            if t.is_nan() || t < 0.0 {
                return Err(Error::config(format!("tolerance {t} must be nonnegative")));
            }
        }
        if self.replicas == 0 {
            return Err(Error::config("--replicas must be positive"));
        }
        if self.cadence == Some(0) {
            return Err(Error::config("--cadence must be positive"));
        }
        Ok(())
    }

    fn label(&self) -> String {
        match self.effective_schedule() {
            Some(spec) => match &self.weights {
                Some(w) if *w != WeightPolicy::Uniform => format!("{}:{spec}:{w}", self.algorithm),
                _ => format!("{}:{spec}", self.algorithm),
            },
            None => self.algorithm.name().to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Graph, oracle and partition resolved from a config.
pub struct Inputs {
    pub graph: WebGraph,
    pub patched: Vec<usize>,
    pub oracle: Option<Oracle>,
    pub partition: Option<Partition>,
}

impl Inputs {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.damping()?;
        let raw = WebGraph::load_edge_list(&read(&cfg.graph)?, cfg.index_base)?;
        let (graph, patched) = raw.patch_dangling();
        let partition = match &cfg.partition {
            Some(p) => Some(Partition::load(&read(p)?, &graph, cfg.index_base)?),
            None => None,
        };
        let oracle = if graph.n() <= cfg.dense_cap {
            Some(Oracle::with_cap(&graph, m, cfg.dense_cap)?)
        } else if cfg.algorithm == Algorithm::Exact {
            return Err(Error::TooLarge {
                n: graph.n(),
                cap: cfg.dense_cap,
            });
        } else {
            None
        };
        Ok(Self {
            graph,
            patched,
            oracle,
            partition,
        })
    }
}

fn build_schedule(cfg: &ExperimentConfig, inputs: &Inputs) -> Result<Schedule> {
    let spec = cfg.effective_schedule().expect("scheduled algorithm");
    let domain = match &inputs.partition {
        Some(p) => p.num_groups(),
        None => inputs.graph.n(),
    };
    match spec {
        ScheduleSpec::Random => match cfg.weights.as_ref().unwrap_or(&WeightPolicy::Uniform) {
            WeightPolicy::Uniform => Schedule::uniform(domain, cfg.seed),
            WeightPolicy::InDegreePlusOne => {
                Schedule::weighted(&indegree_plus_one(&inputs.graph), cfg.seed)
            }
            WeightPolicy::GroupSize => {
                let p = inputs
                    .partition
                    .as_ref()
                    .expect("validated: cluster has a partition");
                Schedule::weighted(&group_size_weights(p), cfg.seed)
            }
            WeightPolicy::File(path) => {
                Schedule::weighted(&parse_weights(&read(path)?, domain)?, cfg.seed)
            }
        },
        ScheduleSpec::RoundRobin => Schedule::round_robin(domain),
        ScheduleSpec::Periodic => Schedule::periodic_groups(domain),
        ScheduleSpec::Subset(q) => Schedule::random_subset(domain, q, cfg.seed),
        ScheduleSpec::Sequence(path) => {
            Schedule::fixed_sequence(domain, parse_sequence(&read(&path)?)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub label: String,
    pub n: usize,
    pub steps: usize,
    pub updates: u64,
    pub final_error: Option<f64>,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: n={} steps={} updates={}",
            self.label, self.n, self.steps, self.updates
        )?;
        match self.final_error {
            Some(e) => write!(f, " final_error={e:.3e}"),
            None => write!(f, " final_error=n/a"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub trace: Trace,
    pub x: Vec<f64>,
    pub summary: Summary,
}

impl Outcome {
    /// CSV written for this run: the trace, or `page,rank` rows for the
    /// exact solve.
    pub fn write_csv<W: Write>(&self, algorithm: Algorithm, mut w: W) -> io::Result<()> {
        if algorithm == Algorithm::Exact {
            writeln!(w, "page,rank")?;
            for (i, v) in self.x.iter().enumerate() {
                writeln!(w, "{i},{}", fmt_f64(*v))?;
            }
            Ok(())
        } else {
            self.trace.write_csv(w)
        }
    }
}

fn write_out(
    path: &Path,
    f: impl FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>,
) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = io::BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err)
}

fn trace_options<'a>(cfg: &ExperimentConfig, inputs: &'a Inputs) -> TraceOptions<'a> {
    TraceOptions {
        oracle: inputs.oracle.as_ref(),
        cadence: cfg.cadence.map_or_else(
            || Cadence::default_for(inputs.graph.n()),
            Cadence::EverySteps,
        ),
        record_x: cfg.record_x,
        defect: true,
    }
}

/// Runs one configured algorithm on already loaded inputs.
pub fn execute(
    cfg: &ExperimentConfig,
    inputs: &Inputs,
    opts: &TraceOptions<'_>,
) -> Result<Outcome> {
    let m = cfg.damping()?;
    let graph = &inputs.graph;
    let stop = StopRule {
        max_steps: cfg.steps,
        tol: cfg.tol,
    };
    let (x, trace) = match cfg.algorithm {
        Algorithm::Exact => {
            let oracle = inputs.oracle.as_ref().ok_or(Error::TooLarge {
                n: graph.n(),
                cap: cfg.dense_cap,
            })?;
            let x = oracle.x_star().to_vec();
            let trace = Trace {
                rows: vec![TraceRow {
                    step: 0,
                    updates: 0,
                    err_l1: Some(0.0),
                    cert: None,
                    defect: None,
                    x: None,
                }],
            };
            (x, trace)
        }
        Algorithm::Power => {
            let (x, t) = power_method(graph, m, None, stop, opts)?;
            (x.into_inner(), t)
        }
        Algorithm::Sync => {
            let (s, t) = run_sync(graph, m, stop, opts)?;
            (s.x, t)
        }
        Algorithm::Gossip | Algorithm::Multi => {
            let engine = if cfg.algorithm == Algorithm::Gossip {
                PushEngine::Gossip
            } else {
                PushEngine::Multi
            };
            let mut schedule = build_schedule(cfg, inputs)?;
            let (s, t) = run(graph, m, engine, &mut schedule, stop, opts)?;
            (s.x, t)
        }
        Algorithm::Cluster => {
            let partition = inputs
                .partition
                .as_ref()
                .ok_or_else(|| Error::config("cluster needs a partition"))?;
            let factors = GroupFactors::precompute(graph, m, partition, cfg.group_dense_cap)?;
            let mut schedule = build_schedule(cfg, inputs)?;
            let (s, t) = run_clustered(graph, &factors, &mut schedule, stop, opts)?;
            (s.x, t)
        }
    };
    let last = trace.last().cloned();
    let summary = Summary {
        label: cfg.label(),
        n: graph.n(),
        steps: last.as_ref().map_or(0, |r| r.step),
        updates: last.as_ref().map_or(0, |r| r.updates),
        final_error: last.as_ref().and_then(TraceRow::error),
    };
    Ok(Outcome { trace, x, summary })
}

/// Loads inputs, runs, and writes the CSV to `cfg.out` when set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let inputs = Inputs::load(cfg)?;
    let opts = trace_options(cfg, &inputs);
    let outcome = execute(cfg, &inputs, &opts)?;
    if let Some(path) = &cfg.out {
        write_out(path, |w| outcome.write_csv(cfg.algorithm, w))?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub step: usize,
    pub updates_mean: f64,
    pub err_mean: f64,
    /// Sample standard deviation over `√replicas`; zero for one replica.
    pub err_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McTrace {
    pub replicas: usize,
    pub rows: Vec<McRow>,
}

impl McTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,updates,err_mean,err_se")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                r.step,
                fmt_f64(r.updates_mean),
                fmt_f64(r.err_mean),
                fmt_f64(r.err_se)
            )?;
        }
        Ok(())
    }
}

/// Mean and standard error of the per-step L1 error over `cfg.replicas`
/// runs; replica `r` draws from the stream `replica_seed(seed, r)`.
pub fn monte_carlo(cfg: &ExperimentConfig) -> Result<McTrace> {
    cfg.validate()?;
    match cfg.effective_schedule() {
        Some(spec) if spec.is_random() => {}
        _ => {
            return Err(Error::config(format!(
                "Monte Carlo averaging needs a randomized schedule, {} is deterministic",
                cfg.label()
            )))
        }
    }
    if cfg.tol.is_some() {
        return Err(Error::config(
            "Monte Carlo runs use a fixed step count; drop --tol",
        ));
    }
    let inputs = Inputs::load(cfg)?;
    let n = inputs.graph.n();
    let opts = TraceOptions {
        oracle: inputs.oracle.as_ref(),
        cadence: Cadence::EverySteps(cfg.cadence.unwrap_or(if n <= 1_000 { 1 } else { n })),
        record_x: false,
        defect: false,
    };
    let traces = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let replica = ExperimentConfig {
                seed: crate::schedule::replica_seed(cfg.seed, r),
                ..cfg.clone()
            };
            execute(&replica, &inputs, &opts).map(|o| o.trace)
        })
        .collect::<Result<Vec<_>>>()?;
    let mc = aggregate(&traces);
    if let Some(path) = &cfg.out {
        write_out(path, |w| mc.write_csv(w))?;
    }
    Ok(mc)
}

fn aggregate(traces: &[Trace]) -> McTrace {
    let len = traces.iter().map(|t| t.rows.len()).min().unwrap_or(0);
    let count = traces.len() as f64;
    let rows = (0..len)
        .map(|i| {
            let errs: Vec<f64> = traces
                .iter()
                .map(|t| t.rows[i].error().unwrap_or(f64::NAN))
                .collect();
            let mean = errs.iter().sum::<f64>() / count;
            let se = if traces.len() > 1 {
                let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (count - 1.0);
                (var / count).sqrt()
            } else {
                0.0
            };
            McRow {
                step: traces[0].rows[i].step,
                updates_mean: traces.iter().map(|t| t.rows[i].updates as f64).sum::<f64>() / count,
                err_mean: mean,
                err_se: se,
            }
        })
        .collect();
    McTrace {
        replicas: traces.len(),
        rows,
    }
}

/// Errors of several runs aligned on cumulative updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    /// `(updates, error per run)`; each run holds its last value at or
    /// before `updates`.
    pub rows: Vec<(u64, Vec<f64>)>,
}

impl Comparison {
    pub fn from_traces(labels: Vec<String>, traces: &[Trace]) -> Self {
        let mut axis: Vec<u64> = traces
            .iter()
            .flat_map(|t| t.rows.iter().map(|r| r.updates))
            .collect();
        axis.sort_unstable();
        axis.dedup();
        let mut cursors = vec![0usize; traces.len()];
        let rows = axis
            .into_iter()
            .map(|u| {
                let values = traces
                    .iter()
                    .zip(cursors.iter_mut())
                    .map(|(t, c)| {
                        while *c + 1 < t.rows.len() && t.rows[*c + 1].updates <= u {
                            *c += 1;
                        }
                        t.rows[*c].error().unwrap_or(f64::NAN)
                    })
                    .collect();
                (u, values)
            })
            .collect();
        Self { labels, rows }
    }

    /// Error of run `col` at cumulative cost `updates`.
    pub fn value_at(&self, col: usize, updates: u64) -> Option<f64> {
        let idx = self.rows.partition_point(|(u, _)| *u <= updates);
        idx.checked_sub(1).map(|i| self.rows[i].1[col])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "updates")?;
        for l in &self.labels {
            write!(w, ",{l}")?;
        }
        writeln!(w)?;
        for (u, vals) in &self.rows {
            write!(w, "{u}")?;
            for v in vals {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Runs every config on the shared graph and aligns their error curves.
pub fn compare(cfgs: &[ExperimentConfig], out: Option<&Path>) -> Result<Comparison> {
    let first = cfgs
        .first()
        .ok_or_else(|| Error::config("nothing to compare"))?;
    for c in cfgs {
        c.validate()?;
        if c.graph != first.graph || c.index_base != first.index_base || c.m != first.m {
            return Err(Error::config(
                "compared runs must share graph, index base and m",
            ));
        }
        if c.algorithm == Algorithm::Exact {
            return Err(Error::config("exact has no trace to compare"));
        }
    }
    let base = Inputs::load(&ExperimentConfig {
        partition: None,
        algorithm: Algorithm::Power,
        schedule: None,
        weights: None,
        ..first.clone()
    })?;
    let mut labels = Vec::with_capacity(cfgs.len());
    let mut traces = Vec::with_capacity(cfgs.len());
    for c in cfgs {
        let partition = match &c.partition {
            Some(p) => Some(Partition::load(&read(p)?, &base.graph, c.index_base)?),
            None => None,
        };
        let inputs = Inputs {
            graph: base.graph.clone(),
            patched: base.patched.clone(),
            oracle: base.oracle.clone(),
            partition,
        };
        let opts = trace_options(c, &inputs);
        traces.push(execute(c, &inputs, &opts)?.trace);
        let mut label = c.label();
        let dupes = labels
            .iter()
            .filter(|l: &&String| l.starts_with(&label))
            .count();
        if dupes > 0 {
            label = format!("{label}#{}", dupes + 1);
        }
        labels.push(label);
    }
    let table = Comparison::from_traces(labels, &traces);
    if let Some(path) = out {
        write_out(path, |w| table.write_csv(w))?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alg: Algorithm) -> ExperimentConfig {
        ExperimentConfig::new("unused.txt", alg)
    }

    #[test]
    fn parse_names() {
        assert_eq!("cluster".parse::<Algorithm>().unwrap(), Algorithm::Cluster);
        assert!("pagerank".parse::<Algorithm>().is_err());
        assert_eq!(
            "subset:0.25".parse::<ScheduleSpec>().unwrap(),
            ScheduleSpec::Subset(0.25)
        );
        assert!("subset:2".parse::<ScheduleSpec>().is_err());
        assert_eq!(
            "sequence:a/b.txt".parse::<ScheduleSpec>().unwrap(),
            ScheduleSpec::Sequence(PathBuf::from("a/b.txt"))
        );
        assert_eq!(
            "file:w.txt".parse::<WeightPolicy>().unwrap(),
            WeightPolicy::File("w.txt".into())
        );
        assert!("heavy".parse::<WeightPolicy>().is_err());
    }

    #[test]
    fn compatibility_rules() {
        assert!(cfg(Algorithm::Cluster).validate().is_err());
        let mut c = cfg(Algorithm::Gossip);
        c.partition = Some("p.txt".into());
        assert!(c.validate().is_err());
        let mut c = cfg(Algorithm::Power);
        c.schedule = Some(ScheduleSpec::Random);
        assert!(c.validate().is_err());
        let mut c = cfg(Algorithm::Gossip);
        c.schedule = Some(ScheduleSpec::Subset(0.5));
        assert!(c.validate().is_err());
        let mut c = cfg(Algorithm::Multi);
        c.weights = Some(WeightPolicy::InDegreePlusOne);
        assert!(c.validate().is_err(), "weights need the uniform schedule");
        c.schedule = Some(ScheduleSpec::Random);
        assert!(c.validate().is_ok());
        let mut c = cfg(Algorithm::Sync);
        c.m = 1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(cfg(Algorithm::Sync).validate().is_ok());
    }

    #[test]
    fn comparison_carries_last_value_forward() {
        let row = |updates, e| TraceRow {
            step: 0,
            updates,
            err_l1: Some(e),
            cert: None,
            defect: None,
            x: None,
        };
        let a = Trace {
            rows: vec![row(0, 1.0), row(2, 0.5), row(4, 0.25)],
        };
        let b = Trace {
            rows: vec![row(0, 1.0), row(3, 0.1)],
        };
        let t = Comparison::from_traces(vec!["a".into(), "b".into()], &[a, b]);
        let axis: Vec<u64> = t.rows.iter().map(|r| r.0).collect();
        assert_eq!(axis, vec![0, 2, 3, 4]);
        assert_eq!(t.rows[1].1, vec![0.5, 1.0]);
        assert_eq!(t.rows[2].1, vec![0.5, 0.1]);
        assert_eq!(t.value_at(0, 100), Some(0.25));
        assert_eq!(t.value_at(1, 2), Some(1.0));
    }

    #[test]
    fn aggregate_single_replica() {
        let row = |step, e| TraceRow {
            step,
            updates: step as u64,
            err_l1: Some(e),
            cert: None,
            defect: None,
            x: None,
        };
        let t = Trace {
            rows: vec![row(0, 0.85), row(1, 0.5)],
        };
        let mc = aggregate(std::slice::from_ref(&t));
        assert_eq!(mc.rows[1].err_mean, 0.5);
        assert_eq!(mc.rows[1].err_se, 0.0);
    }
}
