//! Plug-in (conditional) independence testing with a gap parameter `ε`:
//! answer Independent when the empirical statistic is below
//! `c_decision · ε`, Dependent otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{empirical_pair, empirical_triple, SampleSet};
use crate::hardinstances::realizable_triple;
use crate::info::{conditional_mi, mutual_information};
use crate::model::{Alphabet, DenseJoint};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TesterConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    #[serde(default = "default_c_sample")]
    pub c_sample: f64,
    #[serde(default = "default_c_decision")]
    pub c_decision: f64,
}

fn default_c_sample() -> f64 {
    1.0
}

fn default_c_decision() -> f64 {
    0.5
}

impl TesterConfig {
    pub fn new(epsilon: f64, delta: f64, k: usize) -> Result<Self> {
        let cfg = Self {
            epsilon,
            delta,
            k,
            c_sample: default_c_sample(),
            c_decision: default_c_decision(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.c_decision > 0.0 && self.c_decision < 1.0) {
            return Err(Error::Config(format!(
                "c_decision must lie in (0, 1), got {}",
                self.c_decision
            )));
        }
        if !(self.c_sample > 0.0 && self.c_sample.is_finite()) {
            return Err(Error::Config(format!("c_sample must be positive, got {}", self.c_sample)));
        }
        Alphabet::new(self.k)?;
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        self.c_decision * self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Independent,
    Dependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub verdict: Verdict,
    pub statistic: f64,
    pub threshold: f64,
    pub n_samples: usize,
}

fn ceil_at_least_one(x: f64) -> usize {
    if x.is_finite() && x > 1.0 {
        x.ceil() as usize
    } else {
        1
    }
}

fn sample_formula(cfg: &TesterConfig, power: i32) -> usize {
    let k = cfg.k as f64;
    let (e, d) = (cfg.epsilon, cfg.delta);
    let log_term = (k * (1.0 / d).ln() / e).ln().max(0.0);
    ceil_at_least_one(cfg.c_sample * k.powi(power) / e * (k / d).ln() * log_term)
}

/// `ceil(c_sample · (k³/ε) · ln(k/δ) · ln(k · ln(1/δ) / ε))`, at least 1.
pub fn required_samples_cmi(cfg: &TesterConfig) -> usize {
    sample_formula(cfg, 3)
}

/// The same formula with `k²` in place of `k³`.
pub fn required_samples_mi(cfg: &TesterConfig) -> usize {
    sample_formula(cfg, 2)
}

fn decide(statistic: f64, cfg: &TesterConfig, n_samples: usize) -> TestVerdict {
    let threshold = cfg.threshold();
    TestVerdict {
        verdict: if statistic >= threshold {
            Verdict::Dependent
        } else {
            Verdict::Independent
        },
        statistic,
        threshold,
        n_samples,
    }
}

fn check_input(s: &SampleSet, columns: usize, cfg: &TesterConfig) -> Result<()> {
    cfg.validate()?;
    if s.n() != columns {
        return Err(Error::ShapeMismatch(format!(
            "expected {columns} columns, got {}",
            s.n()
        )));
    }
    if s.k() > cfg.k {
        return Err(Error::Config(format!(
            "samples over {} symbols exceed the configured alphabet {}",
            s.k(),
            cfg.k
        )));
    }
    if s.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(())
}

/// Tests `X ⟂ Y | Z` for the columns `(X, Y, Z)` by the empirical
/// conditional mutual information.
pub fn test_conditional_independence(s: &SampleSet, cfg: &TesterConfig) -> Result<TestVerdict> {
    check_input(s, 3, cfg)?;
    let stat = conditional_mi(&empirical_triple::<f64>(s, 0, 1, 2)?);
    Ok(decide(stat, cfg, s.len()))
}

/// Tests `X ⟂ Y` for the columns `(X, Y)` by the empirical mutual information.
pub fn test_independence(s: &SampleSet, cfg: &TesterConfig) -> Result<TestVerdict> {
    check_input(s, 2, cfg)?;
    let stat = mutual_information(&empirical_pair::<f64>(s, 0, 1)?);
    Ok(decide(stat, cfg, s.len()))
}

/// A calibration distribution over `(X, Y, Z)` together with its exact
/// conditional mutual information `I(X;Y|Z)`.
#[derive(Debug, Clone)]
pub struct CalibrationMember {
    pub name: &'static str,
    pub joint: DenseJoint<f64>,
    pub cmi: f64,
    pub dependent: bool,
}

/// Embeds a binary triple into a larger alphabet (extra symbols unused).
fn embed(p: &DenseJoint<f64>, alphabet: Alphabet) -> Result<DenseJoint<f64>> {
    DenseJoint::from_fn(3, alphabet, |x| {
        if x.iter().all(|&s| s < 2) {
            p.prob(x).expect("binary assignment")
        } else {
            0.0
        }
    })
}

/// `Z` uniform; `X` and `Y` independently copy `Z` with probabilities `a`
/// and `b` and are uniform otherwise.
fn noisy_copies(alphabet: Alphabet, a: f64, b: f64) -> Result<DenseJoint<f64>> {
    let k = alphabet.size() as f64;
    let chan = |c: f64, x: usize, z: usize| if x == z { c + (1.0 - c) / k } else { (1.0 - c) / k };
    DenseJoint::from_fn(3, alphabet, |v| chan(a, v[0], v[2]) * chan(b, v[1], v[2]) / k)
}

/// `X, Z` independent uniform; `Y` copies `X` with probability `rho`.
fn copy_channel(alphabet: Alphabet, rho: f64) -> Result<DenseJoint<f64>> {
    let k = alphabet.size() as f64;
    DenseJoint::from_fn(3, alphabet, |v| {
        let y_given_x = if v[1] == v[0] { rho + (1.0 - rho) / k } else { (1.0 - rho) / k };
        y_given_x / (k * k)
    })
}

fn exact_cmi(p: &DenseJoint<f64>) -> Result<f64> {
    Ok(conditional_mi(&p.triple_table(0, 1, 2)?))
}

/// Copy probability making `I(X;Y|Z)` of [`copy_channel`] land in
/// `[target, 1.01 · target]`.
fn bisect_copy(alphabet: Alphabet, target: f64) -> Result<DenseJoint<f64>> {
    let (mut lo, mut hi) = (0.0, 1.0);
    if exact_cmi(&copy_channel(alphabet, hi)?)? < target {
        return Err(Error::Calibration(format!(
            "no copy channel over {} symbols reaches CMI {target}",
            alphabet.size()
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let c = exact_cmi(&copy_channel(alphabet, mid)?)?;
        if c < target {
            lo = mid;
        } else if c > 1.01 * target {
            hi = mid;
        } else {
            return copy_channel(alphabet, mid);
        }
    }
    copy_channel(alphabet, hi)
}

/// The fixed calibration family at `(ε, k)`: three conditionally independent
/// triples and two with `I(X;Y|Z) ≥ ε`.
pub fn calibration_family(epsilon: f64, k: usize) -> Result<(Vec<CalibrationMember>, Vec<CalibrationMember>)> {
    let alphabet = Alphabet::new(k)?;
    let r_eps = epsilon.min(0.5);
    let r1 = embed(&realizable_triple(1, r_eps)?, alphabet)?;
    let skew: Vec<f64> = {
        let raw: Vec<f64> = (0..k).map(|i| (i + 1) as f64).collect();
        let t: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / t).collect()
    };
    let independent = DenseJoint::from_fn(3, alphabet, |x| skew[x[0]] * skew[k - 1 - x[1]] * skew[x[2]])?;
    let member = |name, joint: DenseJoint<f64>, dependent| -> Result<CalibrationMember> {
        let cmi = exact_cmi(&joint)?;
        Ok(CalibrationMember {
            name,
            joint,
            cmi,
            dependent,
        })
    };
    let null = vec![
        member("noisy-copies-of-z", noisy_copies(alphabet, 0.8, 0.6)?, false)?,
        member("independent-skewed", independent, false)?,
        // (X, Z | Y): X and Z are independent given the shared pair value
        member("realizable-x-z-given-y", r1.permute_variables(&[0, 2, 1])?, false)?,
    ];
    let mut alt = vec![member("copy-channel-at-epsilon", bisect_copy(alphabet, epsilon)?, true)?];
    // (Y, Z | X) is dependent with CMI H_b(ε/2); include it when it clears ε
    let r1_dep = member("realizable-y-z-given-x", r1.permute_variables(&[1, 2, 0])?, true)?;
    if r1_dep.cmi >= epsilon {
        alt.push(r1_dep);
    }
    Ok((null, alt))
}

/// Per-member failure rates of one calibration candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberRate {
    pub name: &'static str,
    pub cmi: f64,
    pub failure_rate: f64,
}

/// Failure rate of the tester on `member` over `trials` draws of `n`
/// samples. For independent members a failure is a Dependent verdict; for
/// dependent members it is a statistic at or below `c_decision · cmi`.
pub fn member_failure_rate(
    member: &CalibrationMember,
    cfg: &TesterConfig,
    n: usize,
    trials: usize,
    master: u64,
    member_index: u64,
) -> Result<f64> {
    let failures: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let s = member.joint.sample(n, seed::mix(master, member_index, t as u64));
            let v = test_conditional_independence(&s, cfg)?;
            Ok(if member.dependent {
                v.statistic <= cfg.c_decision * member.cmi
            } else {
                v.verdict == Verdict::Dependent
            })
        })
        .collect::<Result<_>>()?;
    Ok(failures.iter().filter(|&&f| f).count() as f64 / trials as f64)
}

/// Powers of two times `{1, 1.5}` from `2^-8` to `1.5 · 2^12`, ascending.
pub fn default_grid() -> Vec<f64> {
    (-8..=12)
        .flat_map(|e| {
            let b = 2f64.powi(e);
            [b, 1.5 * b]
        })
        .collect()
}

pub fn calibrate(cfg0: &TesterConfig, trials: usize, seed: u64) -> Result<TesterConfig> {
    calibrate_with_grid(cfg0, trials, seed, &default_grid())
}

/// Smallest `c_sample` in `grid` (scanned in ascending order) for which every
/// calibration member fails in at most a `δ` fraction of `trials` at
/// `N = required_samples_cmi`.
pub fn calibrate_with_grid(cfg0: &TesterConfig, trials: usize, seed: u64, grid: &[f64]) -> Result<TesterConfig> {
    cfg0.validate()?;
    if trials < 100 {
        return Err(Error::Config(format!("calibration needs at least 100 trials, got {trials}")));
    }
    let (null, alt) = calibration_family(cfg0.epsilon, cfg0.k)?;
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut diagnostics = Vec::new();
    for &c in &sorted {
        let cfg = TesterConfig { c_sample: c, ..*cfg0 };
        cfg.validate()?;
        let n = required_samples_cmi(&cfg);
        let mut worst: Option<MemberRate> = None;
        for (i, m) in null.iter().chain(&alt).enumerate() {
            let rate = member_failure_rate(m, &cfg, n, trials, seed, i as u64)?;
            if rate > cfg.delta && worst.as_ref().is_none_or(|w| rate > w.failure_rate) {
                worst = Some(MemberRate {
                    name: m.name,
                    cmi: m.cmi,
                    failure_rate: rate,
                });
            }
        }
        match worst {
            None => return Ok(cfg),
            Some(w) => diagnostics.push(format!(
                "c_sample={c} (N={n}): {} failed at rate {:.3}",
                w.name, w.failure_rate
            )),
        }
    }
    Err(Error::Calibration(format!(
        "no grid value met δ = {}: {}",
        cfg0.delta,
        diagnostics.join("; ")
    )))
}
