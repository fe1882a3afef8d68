//! Reproducible experiment drivers behind the CLI.
//!
//! Every run is a pure function of its [`ExperimentConfig`]: states come from
//! counter-addressed streams, per-state work is collected in index order and
//! reduced sequentially, so outputs do not depend on the thread count.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::{self, analytic_uncertainty_cc, Branch, Covariance};
use crate::error::{Error, Result};
use crate::nogo::{self, Counterexample, ObservableBasis};
use crate::quantum::{entanglement, EntanglementValues, PureState};
use crate::sampling::{domain, multinomial_counts_with, CountVector, SeededStream};
use crate::stats::{linear_fit, mean_and_stderr, rms};
use crate::tomography::{
    self, analytic_uncertainty, average_uncertainty_over, haar_ensemble, split_budget,
    DirectionTriple,
};

pub const DEFAULT_SWEEP_STATES: usize = 10_000;
pub const DEFAULT_SCALING_STATES: usize = 100_000;
pub const DEFAULT_EMPIRICAL_STATES: usize = 50;
pub const DEFAULT_NOGO_BASES: usize = 1_000;
pub const DEFAULT_PAIRS: u64 = 10_000;
pub const DEFAULT_TRIALS: usize = 1_000;
/// Sweep endpoints are pulled in by this much to avoid coplanar directions.
pub const SWEEP_EPSILON: f64 = 1e-3;
pub const SWEEP_STEPS: usize = 41;
/// Random bases that also get a counterexample search in `run_nogo`.
pub const NOGO_SEARCHES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Local reconstruction of `ρ_A` from three directions.
    #[default]
    Local,
    /// Two rounds of local measurements with classical communication.
    Cc,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Local => "local",
            Strategy::Cc => "cc",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(Strategy::Local),
            "cc" => Ok(Strategy::Cc),
            other => Err(Error::Config(format!(
                "unknown strategy `{other}` (expected local or cc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format `{other}` (expected csv or json)"
            ))),
        }
    }
}

/// `start:stop:steps`, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 steps, got {steps}"
            )));
        }
        if !start.is_finite() || !stop.is_finite() {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        Ok(Self { start, stop, steps })
    }

    pub fn linear(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.start + h * i as f64).collect()
    }

    /// Geometric spacing.
    pub fn geometric(&self) -> Vec<f64> {
        let (a, b) = (self.start.ln(), self.stop.ln());
        let h = (b - a) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| (a + h * i as f64).exp()).collect()
    }
}

impl FromStr for Grid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("grid `{s}` is not start:stop:steps")));
        }
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("grid `{s}`: `{t}` is not a number")))
        };
        let steps = parts[2].trim().parse::<usize>().map_err(|_| {
            Error::Config(format!("grid `{s}`: `{}` is not a step count", parts[2]))
        })?;
        Grid::new(num(parts[0])?, num(parts[1])?, steps)
    }
}

impl TryFrom<String> for Grid {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Grid> for String {
    fn from(g: Grid) -> String {
        format!("{}:{}:{}", g.start, g.stop, g.steps)
    }
}

/// Flat experiment configuration; mirrors the CLI flags and the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    /// Ensemble size `M` (states, or bases for `nogo`).
    pub states: Option<usize>,
    /// Pair budget `N`.
    pub pairs: Option<u64>,
    pub grid: Option<Grid>,
    pub out: Option<PathBuf>,
    pub strategy: Strategy,
    pub format: Option<OutputFormat>,
    /// Repetitions per state in `empirical`.
    pub trials: Option<usize>,
    pub theta_m: Option<f64>,
    pub theta_n: Option<f64>,
    pub phi_nm: Option<f64>,
    /// Keep only states with `C²` inside this window in `empirical`.
    pub c2_min: Option<f64>,
    pub c2_max: Option<f64>,
}

impl ExperimentConfig {
    pub fn named(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            ..Self::default()
        }
    }

    pub fn states_or(&self, default: usize) -> usize {
        self.states.unwrap_or(default)
    }

    pub fn pairs_or_default(&self) -> u64 {
        self.pairs.unwrap_or(DEFAULT_PAIRS)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states == Some(0) {
            return Err(Error::Config("states (M) must be at least 1".into()));
        }
        if let Some(n) = self.pairs {
            if n < 3 {
                return Err(Error::Config(format!(
                    "pairs (N) must be at least 3, got {n}"
                )));
            }
        }
        if let Some(g) = self.grid {
            Grid::new(g.start, g.stop, g.steps)?;
        }
        if self.trials == Some(0) {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form, with
    /// presentation-only fields (`out`, `format`) removed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.format = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

/// Writes `content` to `path`, or to stdout when `path` is `None`.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| Error::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes()).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                message: e.to_string(),
            })
        }
    }
}

fn csv_string<S: Serialize>(rows: &[S]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io {
            path: "<csv>".into(),
            message: e.to_string(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn to_json<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// direction sweep

/// One row of the uncertainty CSV schema shared by sweeps and scaling runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub strategy: Strategy,
    pub phi_nm: f64,
    pub theta_m: f64,
    pub theta_n: f64,
    pub delta_av: f64,
    pub stderr: f64,
    #[serde(rename = "M")]
    pub states: usize,
    #[serde(rename = "N")]
    pub pairs: u64,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Per-state uncertainties for each grid point, in ensemble order.
    #[serde(skip)]
    pub per_state: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        csv_string(&self.rows)
    }

    pub fn argmin(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.delta_av.partial_cmp(&b.1.delta_av).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// `δ_av(φ_nm)` at `θ_m = θ_n = π/2` over one shared Haar ensemble.
pub fn run_fig1_sweep(config: &ExperimentConfig) -> Result<SweepTable> {
    config.validate()?;
    if config.strategy != Strategy::Local {
        return Err(Error::Config("sweep-fig1 uses the local strategy".into()));
    }
    let m = config.states_or(DEFAULT_SWEEP_STATES);
    let n = config.pairs_or_default();
    let grid = match config.grid {
        Some(g) => g,
        None => Grid::new(SWEEP_EPSILON, PI - SWEEP_EPSILON, SWEEP_STEPS)?,
    };
    let theta_m = config.theta_m.unwrap_or(FRAC_PI_2);
    let theta_n = config.theta_n.unwrap_or(FRAC_PI_2);
    let states = haar_ensemble::<f64>(config.seed, m);
    let hash = config.hash();
    let mut rows = Vec::with_capacity(grid.steps);
    let mut per_state = Vec::with_capacity(grid.steps);
    for phi in grid.linear() {
        let dirs = DirectionTriple::from_angles(theta_m, theta_n, phi)?;
        let rep = average_uncertainty_over(&states, &dirs, n)?;
        rows.push(SweepRow {
            strategy: Strategy::Local,
            phi_nm: phi,
            theta_m,
            theta_n,
            delta_av: rep.delta_av,
            stderr: rep.stderr,
            states: m,
            pairs: n,
            seed: config.seed,
            config_hash: hash.clone(),
        });
        per_state.push(rep.per_state);
    }
    Ok(SweepTable { rows, per_state })
}

// ---------------------------------------------------------------------------
// symmetry and orthogonality

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryPoint {
    pub theta_n: f64,
    pub theta_m: f64,
    pub phi_nm: f64,
    pub delta_av: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    /// The reference point followed by its three images
    /// `(π−θ_n, θ_m, π−φ)`, `(θ_n, π−θ_m, φ−π)` and `(π−θ_n, π−θ_m, φ)`.
    pub points: Vec<SymmetryPoint>,
    /// Largest `|δ_i − δ_0|` in units of the reference standard error.
    pub max_deviation_se: f64,
    pub symmetric: bool,
    pub orthogonality: OrthogonalityReport,
    pub states: usize,
    pub pairs: u64,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthogonalityReport {
    pub orthogonal_delta_av: f64,
    pub random_delta_av: Vec<f64>,
    pub random_max_overlap: Vec<f64>,
    pub orthogonal_is_smallest: bool,
}

/// `ẑ` plus two directions drawn uniformly from the sphere.
pub fn random_triple(seed: u64, index: u64) -> Result<DirectionTriple<f64>> {
    let mut rng = SeededStream::in_domain(seed, domain::TRIPLES, index).rng();
    loop {
        let mut unit = || {
            let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
            let phi: f64 = std::f64::consts::TAU * rng.random::<f64>();
            let r = (1.0 - z * z).max(0.0).sqrt();
            [r * phi.cos(), r * phi.sin(), z]
        };
        let (m, n) = (unit(), unit());
        if let Ok(t) = DirectionTriple::from_vectors([[0.0, 0.0, 1.0], m, n]) {
            return Ok(t);
        }
    }
}

/// Orthogonal triple against `count` random triples on one ensemble.
pub fn compare_orthogonal(
    states: &[PureState<f64>],
    pairs: u64,
    seed: u64,
    count: usize,
) -> Result<OrthogonalityReport> {
    let orth = average_uncertainty_over(states, &DirectionTriple::orthogonal(), pairs)?.delta_av;
    let mut random_delta_av = Vec::with_capacity(count);
    let mut random_max_overlap = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let t = random_triple(seed, i)?;
        random_delta_av.push(average_uncertainty_over(states, &t, pairs)?.delta_av);
        random_max_overlap.push(t.max_overlap());
    }
    let orthogonal_is_smallest = random_delta_av.iter().all(|&d| orth < d);
    Ok(OrthogonalityReport {
        orthogonal_delta_av: orth,
        random_delta_av,
        random_max_overlap,
        orthogonal_is_smallest,
    })
}

/// Number of random triples compared against the orthogonal one.
pub const ORTHOGONALITY_TRIPLES: usize = 20;

pub fn run_symmetry(config: &ExperimentConfig) -> Result<SymmetryReport> {
    config.validate()?;
    let m = config.states_or(DEFAULT_SWEEP_STATES);
    let n = config.pairs_or_default();
    let theta_n = config.theta_n.unwrap_or(1.1);
    let theta_m = config.theta_m.unwrap_or(0.8);
    let phi = config.phi_nm.unwrap_or(1.3);
    let states = haar_ensemble::<f64>(config.seed, m);
    let images = [
        (theta_n, theta_m, phi),
        (PI - theta_n, theta_m, PI - phi),
        (theta_n, PI - theta_m, phi - PI),
        (PI - theta_n, PI - theta_m, phi),
    ];
    let mut points = Vec::with_capacity(4);
    for (tn, tm, p) in images {
        let dirs = DirectionTriple::from_angles(tm, tn, p)?;
        let rep = average_uncertainty_over(&states, &dirs, n)?;
        points.push(SymmetryPoint {
            theta_n: tn,
            theta_m: tm,
            phi_nm: p,
            delta_av: rep.delta_av,
            stderr: rep.stderr,
        });
    }
    let se = points[0].stderr;
    let max_dev = points[1..]
        .iter()
        .map(|p| (p.delta_av - points[0].delta_av).abs())
        .fold(0.0, f64::max);
    let max_deviation_se = if se > 0.0 {
        max_dev / se
    } else if max_dev == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let orthogonality = compare_orthogonal(&states, n, config.seed, ORTHOGONALITY_TRIPLES)?;
    Ok(SymmetryReport {
        points,
        max_deviation_se,
        symmetric: max_deviation_se <= 3.0,
        orthogonality,
        states: m,
        pairs: n,
        seed: config.seed,
        config_hash: config.hash(),
    })
}

// ---------------------------------------------------------------------------
// scaling

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub strategy: String,
    #[serde(rename = "N")]
    pub pairs: u64,
    pub delta_av: f64,
    pub stderr: f64,
    /// `δ_av · √N`
    pub scaled: f64,
    #[serde(rename = "M")]
    pub states: usize,
    pub seed: u64,
    pub config_hash: String,
}

/// Fit of `δ = c/√N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub strategy: String,
    /// `c`, from the fixed-slope fit `log δ = log c − ½ log N`.
    pub constant: f64,
    /// Slope of the free log-log fit.
    pub slope: f64,
    /// RMS residual of the free log-log fit.
    pub residual: f64,
    /// `c` re-expressed per measurement setting: `δ·√(N/k)` with `k` settings.
    pub per_setting_constant: f64,
    pub table: Vec<ScalingRow>,
}

impl ScalingFit {
    fn from_table(strategy: &str, settings: f64, table: Vec<ScalingRow>) -> Self {
        let x: Vec<f64> = table.iter().map(|r| (r.pairs as f64).ln()).collect();
        let y: Vec<f64> = table.iter().map(|r| r.delta_av.ln()).collect();
        let (_, slope, residual) = linear_fit(&x, &y);
        let log_c = x.iter().zip(&y).map(|(xi, yi)| yi + 0.5 * xi).sum::<f64>() / x.len() as f64;
        let constant = log_c.exp();
        Self {
            strategy: strategy.to_string(),
            constant,
            slope,
            residual,
            per_setting_constant: constant / settings.sqrt(),
            table,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub local: ScalingFit,
    pub cc_multinomial: ScalingFit,
    pub cc_independent: ScalingFit,
    pub ratio_multinomial: f64,
    pub ratio_independent: f64,
    pub states: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl ScalingReport {
    pub fn to_csv(&self) -> Result<String> {
        let rows: Vec<&ScalingRow> = [&self.local, &self.cc_multinomial, &self.cc_independent]
            .iter()
            .flat_map(|f| f.table.iter())
            .collect();
        csv_string(&rows)
    }
}

/// Default pair budgets: three decades, multiples of 6 so both splits are exact.
pub fn default_scaling_budgets() -> Vec<u64> {
    vec![600, 6_000, 60_000, 600_000]
}

fn budgets_from_grid(grid: &Grid) -> Result<Vec<u64>> {
    if grid.start < 6.0 || grid.stop < grid.start {
        return Err(Error::Config(
            "pair grid must satisfy 6 <= start <= stop".into(),
        ));
    }
    let mut v: Vec<u64> = grid
        .geometric()
        .into_iter()
        .map(|x| ((x / 6.0).round().max(1.0) as u64) * 6)
        .collect();
    v.dedup();
    Ok(v)
}

fn scaling_rows<F>(
    states: &[PureState<f64>],
    budgets: &[u64],
    label: &str,
    seed: u64,
    hash: &str,
    f: F,
) -> Result<Vec<ScalingRow>>
where
    F: Fn(&PureState<f64>, u64) -> Result<f64> + Sync,
{
    budgets
        .iter()
        .map(|&n| {
            let per_state = states
                .par_iter()
                .map(|s| f(s, n))
                .collect::<Result<Vec<f64>>>()?;
            let (mean, se) = mean_and_stderr(&per_state);
            Ok(ScalingRow {
                strategy: label.to_string(),
                pairs: n,
                delta_av: mean,
                stderr: se,
                scaled: mean * (n as f64).sqrt(),
                states: states.len(),
                seed,
                config_hash: hash.to_string(),
            })
        })
        .collect()
}

/// Ensemble-averaged analytic uncertainties of both strategies over a pair grid.
pub fn run_scaling(config: &ExperimentConfig) -> Result<ScalingReport> {
    config.validate()?;
    let m = config.states_or(DEFAULT_SCALING_STATES);
    let budgets = match &config.grid {
        Some(g) => budgets_from_grid(g)?,
        None => default_scaling_budgets(),
    };
    if budgets.len() < 2 || (budgets[budgets.len() - 1] as f64) < 100.0 * budgets[0] as f64 {
        return Err(Error::Config(
            "scaling grid must span at least two decades of N".into(),
        ));
    }
    let states = haar_ensemble::<f64>(config.seed, m);
    let hash = config.hash();
    let orth = DirectionTriple::orthogonal();
    let local = scaling_rows(&states, &budgets, "local", config.seed, &hash, |s, n| {
        analytic_uncertainty(s, &orth, n)
    })?;
    let cc_m = scaling_rows(
        &states,
        &budgets,
        "cc-multinomial",
        config.seed,
        &hash,
        |s, n| analytic_uncertainty_cc(s, n, Covariance::Multinomial),
    )?;
    let cc_i = scaling_rows(
        &states,
        &budgets,
        "cc-independent",
        config.seed,
        &hash,
        |s, n| analytic_uncertainty_cc(s, n, Covariance::Independent),
    )?;
    let local = ScalingFit::from_table("local", 3.0, local);
    let cc_multinomial = ScalingFit::from_table("cc-multinomial", 2.0, cc_m);
    let cc_independent = ScalingFit::from_table("cc-independent", 2.0, cc_i);
    Ok(ScalingReport {
        ratio_multinomial: cc_multinomial.constant / local.constant,
        ratio_independent: cc_independent.constant / local.constant,
        local,
        cc_multinomial,
        cc_independent,
        states: m,
        seed: config.seed,
        config_hash: hash,
    })
}

// ---------------------------------------------------------------------------
// empirical cross-check

/// Monte Carlo error statistics of one strategy on one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalRow {
    pub strategy: Strategy,
    pub state_index: u64,
    #[serde(rename = "N")]
    pub pairs: u64,
    pub trials: usize,
    pub c2_true: f64,
    pub det_true: f64,
    /// First-order prediction of the standard deviation.
    pub analytic_delta: f64,
    pub rms_error: f64,
    pub bias: f64,
    pub clamp_events: u64,
    pub branch_disagreements: u64,
    pub seed: u64,
    pub config_hash: String,
}

/// Errors of the determinant-scale estimate (`det ρ_A` or `C²/4`) over
/// `trials` simulated experiments with `pairs` pairs each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialErrors {
    pub errors: Vec<f64>,
    pub clamp_events: u64,
    pub branch_disagreements: u64,
}

pub fn simulate_trials(
    state: &PureState<f64>,
    strategy: Strategy,
    pairs: u64,
    trials: usize,
    stream: SeededStream,
) -> Result<TrialErrors> {
    let truth = entanglement(state);
    let mut rng = stream.rng();
    let mut errors = Vec::with_capacity(trials);
    let (mut clamps, mut disagreements) = (0u64, 0u64);
    match strategy {
        Strategy::Local => {
            if pairs < 3 {
                return Err(Error::InsufficientBudget {
                    budget: pairs,
                    min: 3,
                });
            }
            let dirs = DirectionTriple::orthogonal();
            let probs = tomography::outcome_probabilities(state, &dirs);
            let shots = split_budget(pairs, 3);
            for _ in 0..trials {
                let counts: [CountVector; 3] = [
                    binary_counts(probs.up[0], shots[0], &mut rng)?,
                    binary_counts(probs.up[1], shots[1], &mut rng)?,
                    binary_counts(probs.up[2], shots[2], &mut rng)?,
                ];
                let est = tomography::estimate_entanglement_local(&counts, &dirs)?;
                clamps += u64::from(est.clamped);
                errors.push(est.values.det_reduced - truth.det_reduced);
            }
        }
        Strategy::Cc => {
            if pairs < 2 {
                return Err(Error::InsufficientBudget {
                    budget: pairs,
                    min: 2,
                });
            }
            let r1 = classical::round1_probabilities(state);
            let r2 = classical::round2_probabilities(state);
            let branch = Branch::of_state(state);
            let shots = split_budget(pairs, 2);
            for _ in 0..trials {
                let c1 = multinomial_counts_with(&r1.p, shots[0], &mut rng)?;
                let c2 = multinomial_counts_with(&r2.p, shots[1], &mut rng)?;
                let est = classical::estimate_entanglement_cc::<f64>(&c1, &c2, branch)?;
                clamps += u64::from(est.clamped);
                disagreements += u64::from(est.branches_disagree);
                errors.push(est.values.det_reduced - truth.det_reduced);
            }
        }
    }
    Ok(TrialErrors {
        errors,
        clamp_events: clamps,
        branch_disagreements: disagreements,
    })
}

fn binary_counts<R: Rng>(p_up: f64, shots: u64, rng: &mut R) -> Result<CountVector> {
    let p = p_up.clamp(0.0, 1.0);
    multinomial_counts_with(&[p, 1.0 - p], shots, rng)
}

/// Analytic standard deviation for the strategy, orthogonal directions for
/// the local one and multinomial covariance for the cc one.
pub fn analytic_delta(state: &PureState<f64>, strategy: Strategy, pairs: u64) -> Result<f64> {
    match strategy {
        Strategy::Local => analytic_uncertainty(state, &DirectionTriple::orthogonal(), pairs),
        Strategy::Cc => analytic_uncertainty_cc(state, pairs, Covariance::Multinomial),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSummary {
    #[serde(rename = "N")]
    pub pairs: u64,
    pub states: usize,
    pub mean_rms_error: f64,
    pub mean_analytic_delta: f64,
    pub mean_abs_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalTable {
    pub rows: Vec<EmpiricalRow>,
    pub summary: Vec<EmpiricalSummary>,
}

impl EmpiricalTable {
    pub fn to_csv(&self) -> Result<String> {
        csv_string(&self.rows)
    }
}

/// Simulated counts → estimator → error against ground truth, per state and budget.
pub fn run_empirical(config: &ExperimentConfig) -> Result<EmpiricalTable> {
    config.validate()?;
    let m = config.states_or(DEFAULT_EMPIRICAL_STATES);
    let trials = config.trials.unwrap_or(DEFAULT_TRIALS);
    let budgets: Vec<u64> = match &config.grid {
        Some(g) => g
            .geometric()
            .into_iter()
            .map(|x| x.round() as u64)
            .collect(),
        None => vec![config.pairs_or_default()],
    };
    let lo = config.c2_min.unwrap_or(0.0);
    let hi = config.c2_max.unwrap_or(1.0);
    let hash = config.hash();
    let states = haar_ensemble::<f64>(config.seed, m);
    let selected: Vec<(u64, PureState<f64>)> = states
        .into_iter()
        .enumerate()
        .map(|(i, s)| (i as u64, s))
        .filter(|(_, s)| {
            let c2 = entanglement(s).concurrence_sq;
            c2 >= lo && c2 <= hi
        })
        .collect();

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (j, &n) in budgets.iter().enumerate() {
        let block = selected
            .par_iter()
            .map(|(i, s)| {
                let stream =
                    SeededStream::in_domain(config.seed, domain::COUNTS, *i).derive(j as u64);
                let t = simulate_trials(s, config.strategy, n, trials, stream)?;
                let truth = entanglement(s);
                Ok(EmpiricalRow {
                    strategy: config.strategy,
                    state_index: *i,
                    pairs: n,
                    trials,
                    c2_true: truth.concurrence_sq,
                    det_true: truth.det_reduced,
                    analytic_delta: analytic_delta(s, config.strategy, n)?,
                    rms_error: rms(&t.errors),
                    bias: mean_and_stderr(&t.errors).0,
                    clamp_events: t.clamp_events,
                    branch_disagreements: t.branch_disagreements,
                    seed: config.seed,
                    config_hash: hash.clone(),
                })
            })
            .collect::<Result<Vec<EmpiricalRow>>>()?;
        let k = block.len().max(1) as f64;
        summary.push(EmpiricalSummary {
            pairs: n,
            states: block.len(),
            mean_rms_error: block.iter().map(|r| r.rms_error).sum::<f64>() / k,
            mean_analytic_delta: block.iter().map(|r| r.analytic_delta).sum::<f64>() / k,
            mean_abs_bias: block.iter().map(|r| r.bias.abs()).sum::<f64>() / k,
        });
        rows.extend(block);
    }
    Ok(EmpiricalTable { rows, summary })
}

// ---------------------------------------------------------------------------
// no-go

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NogoReport {
    pub bases: usize,
    pub lemma_passed: usize,
    pub pass_rate: f64,
    pub max_factorization_residual: f64,
    pub max_symmetry_residual: f64,
    pub max_unitarity_residual: f64,
    pub max_det_sigma_error: f64,
    pub max_det_k_error: f64,
    pub det_k_histogram: Vec<HistogramBin>,
    pub standard_basis: nogo::KMatrixReport<f64>,
    /// Equal moduli in the computational basis with phases `(0,0,0,0)` and `(0,0,0,π)`.
    pub standard_counterexample: Counterexample<f64>,
    pub searches: usize,
    pub counterexamples_found: usize,
    pub min_gap: f64,
    pub max_probability_mismatch: f64,
    pub gallery: Vec<Counterexample<f64>>,
    pub seed: u64,
    pub config_hash: String,
}

impl NogoReport {
    pub fn all_passed(&self) -> bool {
        self.lemma_passed == self.bases && self.counterexamples_found == self.searches
    }
}

/// The explicit computational-basis pair with `m_i = ½`.
pub fn standard_counterexample() -> Counterexample<f64> {
    let basis = ObservableBasis::<f64>::standard();
    let moduli = [0.5; 4];
    let phases_low = [0.0; 4];
    let phases_high = [0.0, 0.0, 0.0, PI];
    let lo = basis.compose(&moduli, &phases_low).expect("nonzero");
    let hi = basis.compose(&moduli, &phases_high).expect("nonzero");
    let c2_low = crate::quantum::concurrence_sq(&lo);
    let c2_high = crate::quantum::concurrence_sq(&hi);
    Counterexample {
        moduli,
        phases_low,
        phases_high,
        state_low: *lo.amplitudes(),
        state_high: *hi.amplitudes(),
        probabilities_low: basis.probabilities(&lo),
        probabilities_high: basis.probabilities(&hi),
        c2_low,
        c2_high,
        gap: c2_high - c2_low,
    }
}

const GALLERY_SIZE: usize = 3;
/// `|det K|` histogram: bins of width 0.01 centred on 0.90..=1.10, outliers
/// folded into the end bins.
const DET_K_BINS: usize = 21;
const DET_K_WIDTH: f64 = 0.01;
const DET_K_LOW: f64 = 0.895;

pub fn run_nogo(config: &ExperimentConfig) -> Result<NogoReport> {
    config.validate()?;
    let m = config.states_or(DEFAULT_NOGO_BASES);
    let bases: Vec<ObservableBasis<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|i| ObservableBasis::random(SeededStream::in_domain(config.seed, domain::BASES, i)))
        .collect();
    let reports: Vec<nogo::KMatrixReport<f64>> = bases.par_iter().map(nogo::verify_lemma).collect();
    let max_of =
        |f: &dyn Fn(&nogo::KMatrixReport<f64>) -> f64| reports.iter().map(f).fold(0.0, f64::max);

    let edges: Vec<f64> = (0..=DET_K_BINS)
        .map(|i| DET_K_LOW + DET_K_WIDTH * i as f64)
        .collect();
    let mut det_k_histogram: Vec<HistogramBin> = edges
        .windows(2)
        .map(|w| HistogramBin {
            lo: w[0],
            hi: w[1],
            count: 0,
        })
        .collect();
    for r in &reports {
        let idx = (((r.det_k_abs - DET_K_LOW) / DET_K_WIDTH).floor().max(0.0) as usize)
            .min(DET_K_BINS - 1);
        det_k_histogram[idx].count += 1;
    }

    let searches = m.min(NOGO_SEARCHES);
    let found: Vec<Result<Counterexample<f64>>> = bases[..searches]
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            nogo::counterexample(
                b,
                SeededStream::in_domain(config.seed, domain::PHASES, i as u64),
            )
        })
        .collect();
    let ok: Vec<&Counterexample<f64>> = found.iter().filter_map(|r| r.as_ref().ok()).collect();

    let lemma_passed = reports.iter().filter(|r| r.lemma_holds).count();
    Ok(NogoReport {
        bases: m,
        lemma_passed,
        pass_rate: lemma_passed as f64 / m as f64,
        max_factorization_residual: max_of(&|r| r.factorization_residual),
        max_symmetry_residual: max_of(&|r| r.symmetry_residual),
        max_unitarity_residual: max_of(&|r| r.unitarity_residual),
        max_det_sigma_error: max_of(&|r| {
            (r.det_sigma - num_complex::Complex::new(1.0, 0.0)).norm()
        }),
        max_det_k_error: max_of(&|r| (r.det_k_abs - 1.0).abs()),
        det_k_histogram,
        standard_basis: nogo::verify_lemma(&ObservableBasis::standard()),
        standard_counterexample: standard_counterexample(),
        searches,
        counterexamples_found: ok.len(),
        min_gap: ok.iter().map(|c| c.gap).fold(f64::INFINITY, f64::min),
        max_probability_mismatch: ok
            .iter()
            .map(|c| c.probability_mismatch())
            .fold(0.0, f64::max),
        gallery: ok.iter().take(GALLERY_SIZE).map(|c| **c).collect(),
        seed: config.seed,
        config_hash: config.hash(),
    })
}

// ---------------------------------------------------------------------------
// single-state estimate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub strategy: Strategy,
    #[serde(rename = "N")]
    pub pairs: u64,
    pub seed: u64,
    pub shots: Vec<u64>,
    pub counts: Vec<CountVector>,
    pub estimate: EntanglementValues<f64>,
    pub truth: EntanglementValues<f64>,
    pub analytic_delta: f64,
    pub clamped: bool,
    pub branch: Option<Branch>,
    pub c2_branches: Option<[f64; 2]>,
    pub branches_disagree: bool,
}

/// Simulates one full experiment on `state` and runs the strategy's estimator.
pub fn run_estimate(
    state: &PureState<f64>,
    strategy: Strategy,
    pairs: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let truth = entanglement(state);
    let mut rng = SeededStream::in_domain(seed, domain::COUNTS, 0).rng();
    match strategy {
        Strategy::Local => {
            if pairs < 3 {
                return Err(Error::InsufficientBudget {
                    budget: pairs,
                    min: 3,
                });
            }
            let dirs = DirectionTriple::orthogonal();
            let probs = tomography::outcome_probabilities(state, &dirs);
            let shots = split_budget(pairs, 3);
            let counts = vec![
                binary_counts(probs.up[0], shots[0], &mut rng)?,
                binary_counts(probs.up[1], shots[1], &mut rng)?,
                binary_counts(probs.up[2], shots[2], &mut rng)?,
            ];
            let arr: [CountVector; 3] = [counts[0].clone(), counts[1].clone(), counts[2].clone()];
            let est = tomography::estimate_entanglement_local(&arr, &dirs)?;
            Ok(EstimateReport {
                strategy,
                pairs,
                seed,
                shots,
                counts,
                estimate: est.values,
                truth,
                analytic_delta: analytic_uncertainty(state, &dirs, pairs)?,
                clamped: est.clamped,
                branch: None,
                c2_branches: None,
                branches_disagree: false,
            })
        }
        Strategy::Cc => {
            if pairs < 2 {
                return Err(Error::InsufficientBudget {
                    budget: pairs,
                    min: 2,
                });
            }
            let shots = split_budget(pairs, 2);
            let c1 = multinomial_counts_with(
                &classical::round1_probabilities(state).p,
                shots[0],
                &mut rng,
            )?;
            let c2 = multinomial_counts_with(
                &classical::round2_probabilities(state).p,
                shots[1],
                &mut rng,
            )?;
            let branch = Branch::of_state(state);
            let est = classical::estimate_entanglement_cc::<f64>(&c1, &c2, branch)?;
            Ok(EstimateReport {
                strategy,
                pairs,
                seed,
                shots,
                counts: vec![c1, c2],
                estimate: est.values,
                truth,
                analytic_delta: analytic_uncertainty_cc(state, pairs, Covariance::Multinomial)?,
                clamped: est.clamped,
                branch: Some(branch),
                c2_branches: Some([est.c2_plus, est.c2_minus]),
                branches_disagree: est.branches_disagree,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g: Grid = "0:3:4".parse().unwrap();
        assert_eq!(g.linear(), vec![0.0, 1.0, 2.0, 3.0]);
        assert!("0:1".parse::<Grid>().is_err());
        assert!("0:1:1".parse::<Grid>().is_err());
        assert!("a:1:3".parse::<Grid>().is_err());
        let g: Grid = "10:1000:3".parse().unwrap();
        let v = g.geometric();
        assert!((v[1] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn config_round_trip_and_hash() {
        let json =
            r#"{"experiment":"scaling","seed":3,"states":10,"grid":"600:6000:2","strategy":"cc"}"#;
        let c: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.grid.unwrap().steps, 2);
        assert_eq!(c.strategy, Strategy::Cc);
        let mut d = c.clone();
        d.out = Some("x.csv".into());
        assert_eq!(c.hash(), d.hash());
        d.seed = 4;
        assert_ne!(c.hash(), d.hash());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::named("x");
        c.pairs = Some(2);
        assert!(c.validate().is_err());
        c.pairs = Some(3);
        c.states = Some(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn budgets_are_multiples_of_six() {
        let g: Grid = "600:600000:4".parse().unwrap();
        assert_eq!(budgets_from_grid(&g).unwrap(), default_scaling_budgets());
        let mut c = ExperimentConfig::named("scaling");
        c.states = Some(2);
        c.grid = Some("600:6000:3".parse().unwrap());
        assert!(matches!(run_scaling(&c), Err(Error::Config(_))));
    }

    #[test]
    fn estimate_rejects_small_local_budget() {
        let r = run_estimate(&PureState::bell(), Strategy::Local, 2, 0);
        assert!(matches!(r, Err(Error::InsufficientBudget { .. })));
    }

    #[test]
    fn standard_pair_values() {
        let c = standard_counterexample();
        assert!(c.c2_low.abs() < 1e-15);
        assert!((c.c2_high - 1.0).abs() < 1e-15);
        assert!(c.probability_mismatch() < 1e-15);
    }
}
