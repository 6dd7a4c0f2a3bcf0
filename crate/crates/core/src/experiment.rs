//! Monte Carlo experiment runner. Every cell of an `(n, k, ε, N)` grid runs
//! a number of seeded trials against a known ground truth and reports the
//! success rate and the distribution of the excess.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chowliu::{chow_liu_structure, max_weight_spanning_tree, MIMatrix};
use crate::citest::{calibration_family, required_samples_cmi, test_conditional_independence, TesterConfig, Verdict};
use crate::error::{Error, Result};
use crate::estimation::{add_one_kl_trial, quantile_upper, SampleSet};
use crate::hardinstances::{Regime, TripleFamily};
use crate::info::mutual_information;
use crate::model::{Alphabet, DenseJoint, RootedTree, TreeModel, UndirectedTree};
use crate::seed;

pub const CSV_HEADER: &str = "n,k,epsilon,N,trials,success_rate,mean_excess,p95_excess,seconds";

/// Environment variable that overrides the configured master seed.
pub const SEED_ENV: &str = "CHOWLIU_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Chow-Liu on samples from a random tree model; success iff the learned
    /// tree's exact weight is within `ε` of the optimum.
    RealizableRecovery,
    /// Chow-Liu on samples from a latent-class model (a hidden variable that
    /// every observed variable depends on); same scoring.
    NonRealizableRecovery,
    /// Chow-Liu on block products of three-bit hard instances; success iff
    /// the weight gap is below `threshold_factor · ε`.
    SeparationCurve,
    /// Add-1 estimate of a random distribution over `k` symbols; success iff
    /// its KL divergence is at most `ε`.
    Add1Risk,
    /// The conditional independence tester on one independent and one
    /// dependent calibration triple; success iff both verdicts are right.
    CiTesterRates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(default = "one_n")]
    pub n: Vec<usize>,
    #[serde(default = "binary_k")]
    pub k: Vec<usize>,
    pub epsilon: Vec<f64>,
    /// Sample sizes `N`. For the tester, `0` means the formula value.
    pub samples: Vec<usize>,
}

fn one_n() -> Vec<usize> {
    vec![3]
}

fn binary_k() -> Vec<usize> {
    vec![2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationOptions {
    pub regime: Regime,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    /// Every block uses `block_epsilon_factor · ε`; success is still judged
    /// against `threshold_factor · ε` on the whole tree.
    #[serde(default = "default_block_epsilon_factor")]
    pub block_epsilon_factor: f64,
    #[serde(default = "default_threshold_factor")]
    pub threshold_factor: f64,
    #[serde(default = "default_target_rate")]
    pub target_rate: f64,
}

fn default_blocks() -> usize {
    1
}

fn default_block_epsilon_factor() -> f64 {
    1.0
}

fn default_threshold_factor() -> f64 {
    0.4
}

fn default_target_rate() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TesterOptions {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_c_sample")]
    pub c_sample: f64,
    #[serde(default = "default_c_decision")]
    pub c_decision: f64,
}

fn default_delta() -> f64 {
    0.1
}

fn default_c_sample() -> f64 {
    1.0
}

fn default_c_decision() -> f64 {
    0.5
}

impl Default for TesterOptions {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            c_sample: default_c_sample(),
            c_decision: default_c_decision(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub grid: Grid,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Smallest entry of every row of a random ground-truth model.
    #[serde(default = "default_floor")]
    pub cpt_floor: f64,
    /// Fill the `seconds` column; off by default so output is reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub separation: Option<SeparationOptions>,
    #[serde(default)]
    pub tester: TesterOptions,
}

fn default_floor() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the master seed with `CHOWLIU_SEED` when that is set.
    pub fn apply_env_seed(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.master_seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not a u64")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if g.n.is_empty() || g.k.is_empty() || g.epsilon.is_empty() || g.samples.is_empty() {
            return Err(Error::Config("every grid axis needs at least one value".into()));
        }
        for &k in &g.k {
            Alphabet::new(k)?;
        }
        if g.epsilon.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("epsilon values must be positive".into()));
        }
        if let Some(&n) = g.n.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("n = {n}: at least two variables are needed")));
        }
        match self.kind {
            ExperimentKind::SeparationCurve => {
                let sep = self.separation.as_ref().ok_or_else(|| {
                    Error::Config("separation_curve needs a \"separation\" section".into())
                })?;
                if sep.blocks == 0 {
                    return Err(Error::Config("blocks must be at least 1".into()));
                }
                if !(sep.block_epsilon_factor > 0.0) {
                    return Err(Error::Config("block_epsilon_factor must be positive".into()));
                }
                for &e in &g.epsilon {
                    TripleFamily::new(sep.regime, 1, e * sep.block_epsilon_factor)?;
                }
            }
            ExperimentKind::RealizableRecovery | ExperimentKind::NonRealizableRecovery => {
                if let Some(&k) = g.k.iter().find(|&&k| self.cpt_floor > 1.0 / k as f64) {
                    return Err(Error::Config(format!("cpt_floor {} exceeds 1/{k}", self.cpt_floor)));
                }
            }
            ExperimentKind::CiTesterRates => {
                for &k in &g.k {
                    for &e in &g.epsilon {
                        self.tester_config(e, k)?;
                    }
                }
            }
            ExperimentKind::Add1Risk => {}
        }
        if g.samples.contains(&0) && self.kind != ExperimentKind::CiTesterRates {
            return Err(Error::Config("N = 0 is only meaningful for the tester".into()));
        }
        Ok(())
    }

    fn tester_config(&self, epsilon: f64, k: usize) -> Result<TesterConfig> {
        let cfg = TesterConfig {
            epsilon,
            delta: self.tester.delta,
            k,
            c_sample: self.tester.c_sample,
            c_decision: self.tester.c_decision,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub samples: usize,
    pub trials: usize,
    pub success_rate: f64,
    pub mean_excess: f64,
    pub p95_excess: f64,
    pub seconds: Option<f64>,
}

impl ExperimentRow {
    pub fn to_csv_line(&self) -> String {
        let seconds = self.seconds.map(|s| format!("{s:.3}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n,
            self.k,
            self.epsilon,
            self.samples,
            self.trials,
            self.success_rate,
            self.mean_excess,
            self.p95_excess,
            seconds
        )
    }
}

/// Per-`ε` threshold sample sizes and the fitted log-log slope of
/// `N*` against `1/ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationSummary {
    pub target_rate: f64,
    /// `(ε, N*)`, with `None` when no grid value reached the target.
    pub n_star: Vec<(f64, Option<usize>)>,
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub separation: Option<SeparationSummary>,
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(w, "{}", row.to_csv_line())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Outcome of one trial: whether it succeeded and its excess.
type Outcome = (bool, f64);

/// Runs every grid cell and, when `cfg.output` is set, writes the CSV.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let g = &cfg.grid;
    let mut rows = Vec::new();
    let mut config_index = 0u64;
    for &n in &g.n {
        for &k in &g.k {
            for &epsilon in &g.epsilon {
                let cell = Cell {
                    n,
                    k,
                    epsilon,
                    config_index,
                };
                config_index += 1;
                for &samples in &g.samples {
                    let start = Instant::now();
                    let outcomes: Vec<Outcome> = (0..cfg.trials)
                        .into_par_iter()
                        .map(|t| run_trial(cfg, &cell, samples, t))
                        .collect::<Result<_>>()?;
                    let elapsed = start.elapsed().as_secs_f64();
                    rows.push(summarize(cfg, &cell, samples, &outcomes, elapsed));
                }
            }
        }
    }
    let separation = cfg
        .separation
        .as_ref()
        .filter(|_| cfg.kind == ExperimentKind::SeparationCurve)
        .map(|s| separation_summary(&rows, s.target_rate));
    let report = ExperimentReport { rows, separation };
    if let Some(path) = &cfg.output {
        write_report(path, &report)?;
    }
    Ok(report)
}

pub fn write_report(path: &Path, report: &ExperimentReport) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    report.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

struct Cell {
    n: usize,
    k: usize,
    epsilon: f64,
    /// Index of `(n, k, ε)` in grid order. Seeds depend on it and on the
    /// trial but not on `N`, so a sweep over `N` reuses sample prefixes.
    config_index: u64,
}

fn summarize(cfg: &ExperimentConfig, cell: &Cell, samples: usize, outcomes: &[Outcome], elapsed: f64) -> ExperimentRow {
    let trials = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.0).count();
    let mut excess: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
    excess.sort_by(f64::total_cmp);
    let n = match (cfg.kind, &cfg.separation) {
        (ExperimentKind::SeparationCurve, Some(s)) => 3 * s.blocks,
        (ExperimentKind::Add1Risk, _) => 1,
        (ExperimentKind::CiTesterRates, _) => 3,
        _ => cell.n,
    };
    let k = if cfg.kind == ExperimentKind::SeparationCurve { 2 } else { cell.k };
    let samples = if samples == 0 && cfg.kind == ExperimentKind::CiTesterRates {
        cfg.tester_config(cell.epsilon, cell.k)
            .map(|t| required_samples_cmi(&t))
            .unwrap_or(0)
    } else {
        samples
    };
    ExperimentRow {
        n,
        k,
        epsilon: cell.epsilon,
        samples,
        trials,
        success_rate: successes as f64 / trials as f64,
        mean_excess: excess.iter().sum::<f64>() / trials as f64,
        p95_excess: quantile_upper(&excess, 0.95),
        seconds: cfg.timing.then_some(elapsed),
    }
}

fn run_trial(cfg: &ExperimentConfig, cell: &Cell, samples: usize, trial: usize) -> Result<Outcome> {
    let s = seed::mix(cfg.master_seed, cell.config_index, trial as u64);
    let mut rng = seed::rng(s);
    let sample_seed = seed::mix(s, 1, 0);
    let alphabet = Alphabet::new(cell.k)?;
    match cfg.kind {
        ExperimentKind::RealizableRecovery => {
            let truth = TreeModel::<f64>::random(cell.n, alphabet, cfg.cpt_floor, &mut rng)?;
            let data = truth.sample(samples, sample_seed);
            score_structure(&truth.exact_mi_matrix(), &chow_liu_structure(&data)?, cell.epsilon)
        }
        ExperimentKind::NonRealizableRecovery => {
            let hidden = cell.n;
            let tree = UndirectedTree::star(cell.n + 1, hidden)?.rooted_at(hidden)?;
            let truth = latent_class_model(tree, alphabet, cfg.cpt_floor, &mut rng)?;
            let full = truth.exact_mi_matrix();
            let exact = MIMatrix::from_fn(cell.n, |u, v| full.get(u, v))?;
            let observed: Vec<usize> = (0..cell.n).collect();
            let data = truth.sample(samples, sample_seed).select_columns(&observed)?;
            score_structure(&exact, &chow_liu_structure(&data)?, cell.epsilon)
        }
        ExperimentKind::SeparationCurve => {
            let sep = cfg.separation.as_ref().expect("validated");
            let blocks: Vec<DenseJoint<f64>> = (0..sep.blocks)
                .map(|_| {
                    let e = cell.epsilon * sep.block_epsilon_factor;
                    TripleFamily::new(sep.regime, rng.random_range(1..=3), e)?.joint()
                })
                .collect::<Result<_>>()?;
            let exact = block_mi_matrix(&blocks)?;
            let data = sample_blocks(&blocks, samples, sample_seed)?;
            let excess = weight_gap(&exact, &chow_liu_structure(&data)?);
            Ok((excess < sep.threshold_factor * cell.epsilon, excess))
        }
        ExperimentKind::Add1Risk => {
            let p = seed::floored_dirichlet(cell.k, 0.0, &mut rng);
            let kl = add_one_kl_trial(&p, samples, sample_seed);
            Ok((kl <= cell.epsilon, kl))
        }
        ExperimentKind::CiTesterRates => {
            let tcfg = cfg.tester_config(cell.epsilon, cell.k)?;
            let n = if samples == 0 { required_samples_cmi(&tcfg) } else { samples };
            let (null, alt) = calibration_family(cell.epsilon, cell.k)?;
            let a = test_conditional_independence(&null[0].joint.sample(n, sample_seed), &tcfg)?;
            let b = test_conditional_independence(&alt[0].joint.sample(n, seed::mix(s, 2, 0)), &tcfg)?;
            let ok = a.verdict == Verdict::Independent && b.verdict == Verdict::Dependent;
            Ok((ok, a.statistic))
        }
    }
}

/// Latent-class model: a hidden root on which every observed node depends.
fn latent_class_model<R: Rng + ?Sized>(
    tree: RootedTree,
    alphabet: Alphabet,
    floor: f64,
    rng: &mut R,
) -> Result<TreeModel<f64>> {
    let k = alphabet.size();
    let root_marginal = seed::floored_dirichlet(k, floor, rng);
    let cpt = (0..tree.n())
        .map(|v| match tree.parent(v) {
            None => Vec::new(),
            Some(_) => (0..k).flat_map(|_| seed::floored_dirichlet(k, floor, rng)).collect(),
        })
        .collect();
    TreeModel::new(tree, alphabet, root_marginal, cpt)
}

/// Exact pairwise MI of independent three-variable blocks laid side by side.
fn block_mi_matrix(blocks: &[DenseJoint<f64>]) -> Result<MIMatrix<f64>> {
    let mut inner = Vec::with_capacity(blocks.len());
    for b in blocks {
        let mut m = [[0.0; 3]; 3];
        for u in 0..3 {
            for v in u + 1..3 {
                m[u][v] = mutual_information(&b.pair_table(u, v)?);
                m[v][u] = m[u][v];
            }
        }
        inner.push(m);
    }
    MIMatrix::from_fn(3 * blocks.len(), |u, v| {
        if u / 3 == v / 3 {
            inner[u / 3][u % 3][v % 3]
        } else {
            0.0
        }
    })
}

/// Samples every block independently and concatenates the columns. Same as
/// sampling the block product, without materializing it.
fn sample_blocks(blocks: &[DenseJoint<f64>], count: usize, seed: u64) -> Result<SampleSet> {
    let parts: Vec<SampleSet> = blocks
        .iter()
        .enumerate()
        .map(|(b, j)| j.sample(count, seed::mix(seed, b as u64, 0)))
        .collect();
    let n: usize = parts.iter().map(SampleSet::n).sum();
    let mut flat = Vec::with_capacity(n * count);
    for i in 0..count {
        for p in &parts {
            flat.extend_from_slice(p.row(i));
        }
    }
    SampleSet::from_flat(n, Alphabet::binary(), flat)
}

/// `wt(T*) − wt(T̂)` under exact weights, with `T*` a maximum spanning tree.
pub fn weight_gap(exact: &MIMatrix<f64>, learned: &UndirectedTree) -> f64 {
    let best = exact.tree_weight(&max_weight_spanning_tree(exact));
    (best - exact.tree_weight(learned)).max(0.0)
}

fn score_structure(exact: &MIMatrix<f64>, learned: &UndirectedTree, epsilon: f64) -> Result<Outcome> {
    let gap = weight_gap(exact, learned);
    Ok((gap <= epsilon, gap))
}

/// For every `ε` in the rows, the smallest `N` whose success rate reaches
/// `target`, and the least-squares slope of `ln N*` against `ln(1/ε)`.
pub fn separation_summary(rows: &[ExperimentRow], target: f64) -> SeparationSummary {
    let mut eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let n_star: Vec<(f64, Option<usize>)> = eps
        .iter()
        .map(|&e| {
            let best = rows
                .iter()
                .filter(|r| r.epsilon == e && r.success_rate >= target)
                .map(|r| r.samples)
                .min();
            (e, best)
        })
        .collect();
    let points: Vec<(f64, f64)> = n_star
        .iter()
        .filter_map(|&(e, n)| n.map(|n| ((1.0 / e).ln(), (n as f64).ln())))
        .collect();
    SeparationSummary {
        target_rate: target,
        n_star,
        slope: least_squares_slope(&points),
    }
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `count` sample sizes starting at `start`, each `ratio` times the last
/// (rounded up, strictly increasing).
pub fn geometric_grid(start: usize, ratio: f64, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(count);
    let mut x = start.max(1) as f64;
    while out.len() < count {
        let v = x.ceil() as usize;
        if out.last().is_none_or(|&l| v > l) {
            out.push(v);
        }
        x *= ratio;
    }
    out
}
