//! Synthetic data generation, error metrics, and the Monte Carlo harness.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DetectorSpec, Nuisance, Target};
use crate::detect::fdpv;
use crate::error::{Error, Result};
use crate::plsc::{plsc_segment, Penalty};
use crate::segmentation::Segmentation;
use crate::series::{PiecewiseSpec, SegmentParams, TimeSeries};

/// Identity of the deviate stream: ChaCha8 keyed by the replication seed,
/// normal deviates by the ziggurat layer of `rand_distr`. Recorded in every
/// report so a run can be reproduced bit for bit.
pub const RNG_ALGORITHM: &str = "chacha8/ziggurat-normal/v1";

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `X_i = mu_k + sigma * eps_i` with iid standard normal noise;
/// deterministic for a given seed.
pub fn gen_piecewise_mean(spec: &PiecewiseSpec, seed: u64) -> Result<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_piecewise_mean_with_rng(spec, &mut rng)
}

pub(crate) fn gen_piecewise_mean_with_rng(
    spec: &PiecewiseSpec,
    rng: &mut ChaCha8Rng,
) -> Result<TimeSeries> {
    spec.validate()?;
    let means = match &spec.params {
        SegmentParams::Mean(m) => m,
        _ => return Err(Error::InvalidSpec("mean generator needs mean parameters".into())),
    };
    let mut values = Vec::with_capacity(spec.n);
    for (seg, w) in spec.boundaries().windows(2).enumerate() {
        for _ in w[0]..w[1] {
            values.push(means[seg] + spec.noise_sd * normal(rng));
        }
    }
    TimeSeries::univariate(values)
}

/// `Y_i = a_k X_i + b_k + e_i` on `X_i = i * delta`; deterministic for a
/// given seed.
pub fn gen_piecewise_regression(spec: &PiecewiseSpec, seed: u64) -> Result<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_piecewise_regression_with_rng(spec, &mut rng)
}

pub(crate) fn gen_piecewise_regression_with_rng(
    spec: &PiecewiseSpec,
    rng: &mut ChaCha8Rng,
) -> Result<TimeSeries> {
    spec.validate()?;
    let (slopes, intercepts) = match &spec.params {
        SegmentParams::Regression { slopes, intercepts } => (slopes, intercepts),
        _ => {
            return Err(Error::InvalidSpec(
                "regression generator needs slope/intercept parameters".into(),
            ))
        }
    };
    let mut values = Vec::with_capacity(spec.n);
    for (seg, w) in spec.boundaries().windows(2).enumerate() {
        for i in w[0]..w[1] {
            let x = spec.delta * (i + 1) as f64;
            values.push(slopes[seg] * x + intercepts[seg] + spec.noise_sd * normal(rng));
        }
    }
    TimeSeries::regression(values, spec.delta)
}

/// Mean integrated squared error `(1/n) sum_i (ghat_i - g_i)^2` between the
/// true piecewise parameter path and the fitted one.
pub fn mise(truth: &PiecewiseSpec, est: &Segmentation, n: usize) -> Result<f64> {
    if est.n != n || truth.n != n {
        return Err(Error::InvalidSpec(format!(
            "level mismatch: truth n = {}, estimate n = {}, requested n = {n}",
            truth.n, est.n
        )));
    }
    let ghat = est.scalar_path();
    let mut acc = 0.0;
    for i in 1..=n {
        let d = ghat[i - 1] - truth.scalar_at(i);
        acc += d * d;
    }
    Ok(acc / n as f64)
}

/// Summed squared change-point location error with locations normalized to
/// `[0, 1]`: `sum_k ((tau_hat_k - tau_k)/n)^2`. Only defined when the
/// estimated count matches the truth.
pub fn change_point_se(truth: &[usize], estimate: &[usize], n: usize) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::KMismatch {
            estimated: estimate.len(),
            truth: truth.len(),
        });
    }
    let nf = n as f64;
    Ok(truth
        .iter()
        .zip(estimate)
        .map(|(&t, &e)| {
            let d = (e as f64 - t as f64) / nf;
            d * d
        })
        .sum())
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

/// Which generating model a scenario uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioModel {
    Mean,
    Slope,
}

/// A frozen, human-readable experiment description (TOML on disk).
///
/// Jump sizes are drawn uniformly from `jump_range` per replication with
/// alternating signs, starting upward from `base_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub model: ScenarioModel,
    pub n: usize,
    pub change_points: Vec<usize>,
    pub jump_range: [f64; 2],
    #[serde(default)]
    pub base_value: f64,
    pub sigma: f64,
    /// Sampling step of the abscissae (slope model only).
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Intercept of the first segment (slope model only).
    #[serde(default)]
    pub intercept: f64,
    /// Adjust per-segment intercepts so the noiseless path is continuous at
    /// every break (slope model only, default). With a common intercept the
    /// path jumps in level by `jump * x` at each break and those level
    /// discontinuities dominate the slope trace, splitting every hat in two.
    #[serde(default = "default_true")]
    pub continuous_path: bool,
    pub window: usize,
    pub p1: f64,
    pub p2: f64,
    /// Default replication count.
    pub m: usize,
    pub seed: u64,
}

fn default_delta() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let sc: Scenario =
            toml::from_str(text).map_err(|e| Error::InvalidSpec(format!("bad scenario: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.jump_range[0] <= self.jump_range[1]) || !(self.jump_range[0] >= 0.0) {
            return Err(Error::InvalidSpec("jump_range must be ordered and nonnegative".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidSpec("m must be at least 1".into()));
        }
        // delegate structural checks to a throwaway draw
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.draw_spec(&mut rng).validate()
    }

    /// The detector configuration this scenario runs under (known noise
    /// scale, as the experiments fix sigma).
    pub fn detector_spec(&self) -> DetectorSpec {
        let target = match self.model {
            ScenarioModel::Mean => Target::Mean,
            ScenarioModel::Slope => Target::Slope,
        };
        let mut spec = DetectorSpec::new(target, self.window).with_levels(self.p1, self.p2);
        spec.scale = Nuisance::Known(self.sigma);
        spec
    }

    /// Draw one ground-truth configuration: jump magnitudes uniform in
    /// `jump_range`, directions alternating upward first.
    pub fn draw_spec(&self, rng: &mut ChaCha8Rng) -> PiecewiseSpec {
        let k = self.change_points.len();
        let mut level = self.base_value;
        let mut values = vec![level];
        for i in 0..k {
            let magnitude = if self.jump_range[0] == self.jump_range[1] {
                self.jump_range[0]
            } else {
                rng.random_range(self.jump_range[0]..=self.jump_range[1])
            };
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            level += sign * magnitude;
            values.push(level);
        }
        let params = match self.model {
            ScenarioModel::Mean => SegmentParams::Mean(values),
            ScenarioModel::Slope => {
                let intercepts = if self.continuous_path {
                    let mut bs = vec![self.intercept];
                    for (j, &tau) in self.change_points.iter().enumerate() {
                        let x_tau = self.delta * tau as f64;
                        bs.push(bs[j] + (values[j] - values[j + 1]) * x_tau);
                    }
                    bs
                } else {
                    vec![self.intercept; k + 1]
                };
                SegmentParams::Regression {
                    slopes: values,
                    intercepts,
                }
            }
        };
        PiecewiseSpec {
            n: self.n,
            change_points: self.change_points.clone(),
            params,
            noise_sd: self.sigma,
            delta: self.delta,
        }
    }

    fn generate(&self, spec: &PiecewiseSpec, rng: &mut ChaCha8Rng) -> Result<TimeSeries> {
        match self.model {
            ScenarioModel::Mean => gen_piecewise_mean_with_rng(spec, rng),
            ScenarioModel::Slope => gen_piecewise_regression_with_rng(spec, rng),
        }
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo harness
// ---------------------------------------------------------------------------

/// Which segmentation method a Monte Carlo run exercises.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Fdpv,
    Plsc {
        k_max: usize,
        min_seg: usize,
        penalty: Penalty,
    },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Fdpv => "fdpv",
            Method::Plsc { .. } => "plsc",
        }
    }
}

/// One replication of a Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub k_hat: usize,
    pub mise: f64,
    /// Normalized squared location error; present only when `k_hat` equals
    /// the true count.
    pub change_point_se: Option<f64>,
    pub wall_time_s: f64,
}

/// Aggregate of a Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCReport {
    pub method: String,
    pub scenario: String,
    pub replications: usize,
    pub base_seed: u64,
    pub rng_algorithm: String,
    /// `(k_hat, count)` rows, ascending in `k_hat`; counts sum to `replications`.
    pub k_histogram: Vec<(usize, usize)>,
    pub correct_k_rate: f64,
    /// Mean normalized squared location error over the correct-K runs.
    pub mean_change_point_se: Option<f64>,
    pub mean_mise: f64,
    pub mean_wall_time_s: f64,
    /// Peak allocation of one dedicated sequential replication, when the
    /// tracking allocator is installed.
    pub peak_memory_bytes: Option<u64>,
}

fn run_method(method: &Method, scenario: &Scenario, series: &TimeSeries) -> Result<Segmentation> {
    match method {
        Method::Fdpv => Ok(fdpv(series, &scenario.detector_spec())?.segmentation),
        Method::Plsc { k_max, min_seg, penalty } => {
            if scenario.model != ScenarioModel::Mean {
                return Err(Error::InvalidSpec(
                    "the least-squares baseline handles the mean model only".into(),
                ));
            }
            Ok(plsc_segment(series, *k_max, *min_seg, *penalty)?.segmentation)
        }
    }
}

fn one_replication(
    method: &Method,
    scenario: &Scenario,
    base_seed: u64,
    rep: usize,
) -> Result<RepOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(rep as u64));
    let spec = scenario.draw_spec(&mut rng);
    let series = scenario.generate(&spec, &mut rng)?;
    let started = std::time::Instant::now();
    let segmentation = run_method(method, scenario, &series)?;
    let wall_time_s = started.elapsed().as_secs_f64();
    let k_hat = segmentation.k_hat();
    let se = if k_hat == spec.change_points.len() {
        Some(change_point_se(&spec.change_points, &segmentation.change_points, scenario.n)?)
    } else {
        None
    };
    Ok(RepOutcome {
        rep,
        k_hat,
        mise: mise(&spec, &segmentation, scenario.n)?,
        change_point_se: se,
        wall_time_s,
    })
}

/// Run `m` independent replications (seed of replication `i` is
/// `base_seed + i`) and also return the per-replication outcomes.
///
/// Replications run in parallel; aggregation is by replication index, so the
/// statistical content of the report does not depend on scheduling.
pub fn monte_carlo_detailed(
    method: &Method,
    scenario: &Scenario,
    m: usize,
    base_seed: u64,
) -> Result<(MCReport, Vec<RepOutcome>)> {
    if m == 0 {
        return Err(Error::InvalidSpec("m must be at least 1".into()));
    }
    scenario.validate()?;
    let outcomes: Vec<RepOutcome> = (0..m)
        .into_par_iter()
        .map(|rep| one_replication(method, scenario, base_seed, rep))
        .collect::<Result<Vec<_>>>()?;

    let truth_k = scenario.change_points.len();
    let mut hist = std::collections::BTreeMap::new();
    for o in &outcomes {
        *hist.entry(o.k_hat).or_insert(0usize) += 1;
    }
    let correct = outcomes.iter().filter(|o| o.k_hat == truth_k).count();
    let se_values: Vec<f64> = outcomes.iter().filter_map(|o| o.change_point_se).collect();
    let mean_se = if se_values.is_empty() {
        None
    } else {
        Some(se_values.iter().sum::<f64>() / se_values.len() as f64)
    };

    let peak_memory_bytes = if crate::memtrack::is_active() {
        crate::memtrack::reset_peak();
        let _ = one_replication(method, scenario, base_seed, 0)?;
        crate::memtrack::peak_bytes()
    } else {
        None
    };

    let report = MCReport {
        method: method.name().to_string(),
        scenario: scenario.name.clone(),
        replications: m,
        base_seed,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        k_histogram: hist.into_iter().collect(),
        correct_k_rate: correct as f64 / m as f64,
        mean_change_point_se: mean_se,
        mean_mise: outcomes.iter().map(|o| o.mise).sum::<f64>() / m as f64,
        mean_wall_time_s: outcomes.iter().map(|o| o.wall_time_s).sum::<f64>() / m as f64,
        peak_memory_bytes,
    };
    Ok((report, outcomes))
}

/// As [`monte_carlo_detailed`], returning only the aggregate report.
pub fn monte_carlo(method: &Method, scenario: &Scenario, m: usize, base_seed: u64) -> Result<MCReport> {
    monte_carlo_detailed(method, scenario, m, base_seed).map(|(r, _)| r)
}
