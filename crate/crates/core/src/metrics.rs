//! Diagnostics over finished traces: weighted consensus error, social cost
//! series, replicate ensembles and cost comparisons.

use rayon::prelude::*;
use serde::Serialize;

use crate::annealing::Method;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::Experiment;
use crate::game::{AggregativeGame, SocialCost};
use crate::noise::{derive_seed, Stream};
use crate::trace::{distance, RunTrace};

/// `e_i^k = (k+1)^τ ‖s_i^k - x̄^k‖` for every record and agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusSeries {
    pub tau: f64,
    pub ks: Vec<usize>,
    /// `values[r][i]` is agent `i` at record `r`.
    pub values: Vec<Vec<f64>>,
}

impl ConsensusSeries {
    /// Largest entry over all agents of record `r`.
    pub fn max_at(&self, r: usize) -> f64 {
        self.values[r].iter().copied().fold(0.0, f64::max)
    }

    fn decade(&self, last: bool) -> f64 {
        let len = self.values.len();
        let w = (len / 10).max(1).min(len);
        let range = if last { len - w..len } else { 0..w };
        range.map(|r| self.max_at(r)).fold(0.0, f64::max)
    }

    /// Max of `e_i^k` over the first 10% of records.
    pub fn first_decade_max(&self) -> f64 {
        self.decade(false)
    }

    /// Max of `e_i^k` over the last 10% of records.
    pub fn last_decade_max(&self) -> f64 {
        self.decade(true)
    }

    /// Whether the last-decade max is at most `ratio` times the first-decade max.
    pub fn decays(&self, ratio: f64) -> bool {
        self.last_decade_max() <= ratio * self.first_decade_max()
    }
}

pub fn consensus_error(trace: &RunTrace, tau: f64) -> Result<ConsensusSeries> {
    let bound = 0.5 - trace.tau_beta;
    if !(tau >= 0.0 && tau < bound) {
        return Err(Error::TauOutOfRange { tau, bound });
    }
    let mut ks = Vec::with_capacity(trace.records.len());
    let mut values = Vec::with_capacity(trace.records.len());
    for r in &trace.records {
        let xbar = trace.xbar(r);
        let weight = ((r.k + 1) as f64).powf(tau);
        ks.push(r.k);
        values.push(
            (0..trace.n)
                .map(|i| weight * distance(trace.agent_slice(&r.s, i), &xbar))
                .collect(),
        );
    }
    Ok(ConsensusSeries { tau, ks, values })
}

/// `(k, Σ_i g_i(x_i^k, x̄^k))` for each record.
pub fn social_cost_series<G: AggregativeGame + ?Sized>(trace: &RunTrace, game: &G) -> Result<Vec<(usize, f64)>> {
    let social = SocialCost::new(game);
    if trace.n * trace.d != social.joint_len() {
        return Err(Error::DimensionMismatch {
            expected: social.joint_len(),
            actual: trace.n * trace.d,
        });
    }
    trace
        .records
        .iter()
        .map(|r| Ok((r.k, social.value(&r.x)?)))
        .collect()
}

type TestFn = Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Bounded test function evaluated on the tail-averaged joint `(x, s)`.
pub struct TestFunction {
    pub name: String,
    pub bounds: (f64, f64),
    func: TestFn,
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        bounds: (f64, f64),
        func: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            bounds,
            func: Box::new(func),
        }
    }

    /// Indicator of the closed ball of `radius` around `center` in `x`.
    pub fn ball_indicator(center: Vec<f64>, radius: f64) -> Self {
        Self::new("ball", (0.0, 1.0), move |x, _| f64::from(distance(x, &center) <= radius))
    }

    /// Value clamped to the declared bounds.
    pub fn eval(&self, x: &[f64], s: &[f64]) -> f64 {
        (self.func)(x, s).clamp(self.bounds.0, self.bounds.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0; bins.max(1)];
        if values.is_empty() {
            return Self { lo: 0.0, hi: 0.0, counts };
        }
        let width = (hi - lo) / counts.len() as f64;
        for &v in values {
            let b = if width > 0.0 { ((v - lo) / width) as usize } else { 0 };
            let last = counts.len() - 1;
            counts[b.min(last)] += 1;
        }
        Self { lo, hi, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub replicates: usize,
    pub completed: usize,
    pub seeds: Vec<u64>,
    pub failures: Vec<ReplicateFailure>,
    /// Tail-averaged joint `x` of each completed replicate.
    pub tail_averages: Vec<Vec<f64>>,
    /// Final iterate `x^T` of each completed replicate.
    pub endpoints: Vec<Vec<f64>>,
    /// `(name, empirical mean)` per test function.
    pub expectations: Vec<(String, f64)>,
    /// Share of tail averages within the configured ball, if any.
    pub basin_fraction: Option<f64>,
    /// Histogram of the first coordinate of the final `x̄`.
    pub final_xbar_histogram: Histogram,
    pub mean_tail_cost: f64,
}

impl EnsembleStats {
    pub fn variance(&self, coordinate: usize) -> f64 {
        let vals: Vec<f64> = self.tail_averages.iter().map(|t| t[coordinate]).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
    }
}

/// Seed of replicate `r` derived from the config seed.
pub fn replicate_seed(base: u64, r: usize) -> u64 {
    derive_seed(base, Stream::Replicate, r as u64)
}

/// Run `replicates` independently seeded copies of the configured method.
/// Diverging replicates are reported in `failures` and excluded.
pub fn ensemble_run(config: &ExperimentConfig, replicates: usize, tests: &[TestFunction]) -> Result<EnsembleStats> {
    if replicates < 2 {
        return Err(Error::InvalidParameter(format!("an ensemble needs at least 2 replicates, got {replicates}")));
    }
    let exp = Experiment::build(config)?;
    let seeds: Vec<u64> = (0..replicates).map(|r| replicate_seed(config.seed, r)).collect();
    let outcomes: Vec<Result<RunTrace>> = seeds
        .par_iter()
        .map(|&seed| exp.run(config.method, config.horizon, seed))
        .collect();

    let social = SocialCost::new(&exp.game);
    let mut failures = Vec::new();
    let (mut tails, mut tail_s, mut endpoints, mut costs, mut finals) = (vec![], vec![], vec![], vec![], vec![]);
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(trace) => {
                let window = trace.tail_window();
                let (x, s) = trace.tail_average_xs(window);
                let tail = &trace.records[trace.records.len() - window.min(trace.records.len())..];
                costs.push(tail.iter().map(|rec| social.value_unchecked(&rec.x)).sum::<f64>() / tail.len() as f64);
                finals.push(trace.final_state.xbar()[0]);
                endpoints.push(trace.final_state.x.clone());
                tails.push(x);
                tail_s.push(s);
            }
            Err(e @ Error::Divergence { .. }) => failures.push(ReplicateFailure {
                replicate: r,
                seed: seeds[r],
                error: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }

    let completed = tails.len();
    let mean = |v: &mut dyn Iterator<Item = f64>| {
        if completed == 0 {
            f64::NAN
        } else {
            v.sum::<f64>() / completed as f64
        }
    };
    let expectations = tests
        .iter()
        .map(|t| (t.name.clone(), mean(&mut tails.iter().zip(&tail_s).map(|(x, s)| t.eval(x, s)))))
        .collect();
    let basin_fraction = config.ensemble.as_ref().map(|spec| {
        let ball = TestFunction::ball_indicator(spec.reference.clone(), spec.radius);
        mean(&mut tails.iter().zip(&tail_s).map(|(x, s)| ball.eval(x, s)))
    });
    Ok(EnsembleStats {
        replicates,
        completed,
        seeds,
        failures,
        mean_tail_cost: mean(&mut costs.iter().copied()),
        final_xbar_histogram: Histogram::new(&finals, 20),
        tail_averages: tails,
        endpoints,
        expectations,
        basin_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostComparison {
    pub method_a: Method,
    pub method_b: Method,
    pub window: usize,
    pub mean_cost_a: f64,
    pub mean_cost_b: f64,
    /// `mean_cost_a - mean_cost_b`.
    pub difference: f64,
    /// Method with the smaller mean, `None` on a tie.
    pub smaller: Option<Method>,
}

/// Mean social cost over the last `window` records of each trace.
pub fn compare_costs<G: AggregativeGame + ?Sized>(
    a: &RunTrace,
    b: &RunTrace,
    game: &G,
    window: usize,
) -> Result<CostComparison> {
    let tail_mean = |t: &RunTrace| -> Result<f64> {
        if window == 0 || window > t.records.len() {
            return Err(Error::WindowTooLong {
                window,
                len: t.records.len(),
            });
        }
        let series = social_cost_series(t, game)?;
        Ok(series[series.len() - window..].iter().map(|(_, c)| c).sum::<f64>() / window as f64)
    };
    let (ca, cb) = (tail_mean(a)?, tail_mean(b)?);
    let smaller = if ca < cb {
        Some(a.method)
    } else if cb < ca {
        Some(b.method)
    } else {
        None
    };
    Ok(CostComparison {
        method_a: a.method,
        method_b: b.method,
        window,
        mean_cost_a: ca,
        mean_cost_b: cb,
        difference: ca - cb,
        smaller,
    })
}
