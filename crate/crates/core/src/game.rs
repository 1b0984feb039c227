//! Aggregative games: agent `i` pays `g_i(x_i, x̄)` where `x̄` is the network
//! average of all decisions.
//!
//! Every game exposes its cost together with the two partial gradients
//! `∇_1 g_i` (own decision) and `∇_2 g_i` (aggregate slot). The built-in
//! instances are the two-agent quadratic example, the electric-vehicle
//! charging game and a tilted one-dimensional double well used as the
//! centralized annealing testbed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Central-difference step used by every gradient checker in the crate.
pub const FD_STEP: f64 = 1e-6;
/// Relative tolerance `|analytic - fd| / (1 + |analytic|)` for gradient checks.
pub const FD_TOLERANCE: f64 = 1e-5;

/// A game in aggregative form. Implementations must be pure.
///
/// The trait methods are unchecked; the free functions [`eval_cost`],
/// [`eval_grad`] and [`agent_update_gradient`] validate their inputs.
pub trait AggregativeGame: Send + Sync {
    fn agents(&self) -> usize;
    fn dim(&self) -> usize;
    fn cost(&self, i: usize, x: &[f64], y: &[f64]) -> f64;
    fn grad_first(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]);
    fn grad_second(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partial {
    First,
    Second,
}

fn check_args<G: AggregativeGame + ?Sized>(game: &G, i: usize, x: &[f64], y: &[f64]) -> Result<()> {
    if i >= game.agents() {
        return Err(Error::AgentOutOfRange {
            index: i,
            agents: game.agents(),
        });
    }
    for v in [x, y] {
        if v.len() != game.dim() {
            return Err(Error::DimensionMismatch {
                expected: game.dim(),
                actual: v.len(),
            });
        }
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite input for agent {i}: x = {x:?}, y = {y:?}"
        )));
    }
    Ok(())
}

pub fn eval_cost<G: AggregativeGame + ?Sized>(game: &G, i: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    check_args(game, i, x, y)?;
    Ok(game.cost(i, x, y))
}

pub fn eval_grad<G: AggregativeGame + ?Sized>(
    game: &G,
    i: usize,
    x: &[f64],
    y: &[f64],
    which: Partial,
) -> Result<Vec<f64>> {
    check_args(game, i, x, y)?;
    let mut out = vec![0.0; game.dim()];
    match which {
        Partial::First => game.grad_first(i, x, y, &mut out),
        Partial::Second => game.grad_second(i, x, y, &mut out),
    }
    Ok(out)
}

/// `∇_1 g_i(x, y) + (1/n) ∇_2 g_i(x, y)`, the direction each agent descends
/// along in the distributed annealing iteration.
pub fn agent_update_gradient<G: AggregativeGame + ?Sized>(
    game: &G,
    i: usize,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<f64>> {
    check_args(game, i, x, y)?;
    let mut out = vec![0.0; game.dim()];
    let mut scratch = vec![0.0; game.dim()];
    agent_update_gradient_into(game, i, x, y, &mut out, &mut scratch);
    Ok(out)
}

/// Unchecked variant writing into `out`; `scratch` must have length `dim`.
pub(crate) fn agent_update_gradient_into<G: AggregativeGame + ?Sized>(
    game: &G,
    i: usize,
    x: &[f64],
    y: &[f64],
    out: &mut [f64],
    scratch: &mut [f64],
) {
    let inv_n = 1.0 / game.agents() as f64;
    game.grad_first(i, x, y, out);
    game.grad_second(i, x, y, scratch);
    for (o, s) in out.iter_mut().zip(scratch.iter()) {
        *o += inv_n * s;
    }
}

/// Network-wide objective `Σ_i g_i(x_i, x̄)` over the stacked joint decision
/// (agent-major, length `n·d`).
pub struct SocialCost<'a, G: AggregativeGame + ?Sized> {
    game: &'a G,
}

impl<'a, G: AggregativeGame + ?Sized> SocialCost<'a, G> {
    pub fn new(game: &'a G) -> Self {
        Self { game }
    }

    pub fn game(&self) -> &G {
        self.game
    }

    pub fn joint_len(&self) -> usize {
        self.game.agents() * self.game.dim()
    }

    pub fn average(&self, joint: &[f64]) -> Vec<f64> {
        average_rows(joint, self.game.agents(), self.game.dim())
    }

    pub fn value(&self, joint: &[f64]) -> Result<f64> {
        self.check(joint)?;
        Ok(self.value_unchecked(joint))
    }

    pub(crate) fn value_unchecked(&self, joint: &[f64]) -> f64 {
        let d = self.game.dim();
        let xbar = self.average(joint);
        (0..self.game.agents())
            .map(|i| self.game.cost(i, &joint[i * d..(i + 1) * d], &xbar))
            .sum()
    }

    /// Full gradient over the joint space:
    /// `∂/∂x_i = ∇_1 g_i(x_i, x̄) + (1/n) Σ_j ∇_2 g_j(x_j, x̄)`.
    pub fn gradient(&self, joint: &[f64]) -> Result<Vec<f64>> {
        self.check(joint)?;
        let n = self.game.agents();
        let d = self.game.dim();
        let xbar = self.average(joint);
        let mut coupling = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for j in 0..n {
            self.game.grad_second(j, &joint[j * d..(j + 1) * d], &xbar, &mut buf);
            for (c, b) in coupling.iter_mut().zip(&buf) {
                *c += b / n as f64;
            }
        }
        let mut grad = vec![0.0; n * d];
        for i in 0..n {
            let row = &mut grad[i * d..(i + 1) * d];
            self.game.grad_first(i, &joint[i * d..(i + 1) * d], &xbar, row);
            for (g, c) in row.iter_mut().zip(&coupling) {
                *g += c;
            }
        }
        Ok(grad)
    }

    fn check(&self, joint: &[f64]) -> Result<()> {
        if joint.len() != self.joint_len() {
            return Err(Error::DimensionMismatch {
                expected: self.joint_len(),
                actual: joint.len(),
            });
        }
        if joint.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite joint decision".into()));
        }
        Ok(())
    }
}

pub(crate) fn average_rows(joint: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for row in joint.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}

// ---------------------------------------------------------------------------
// Built-in games
// ---------------------------------------------------------------------------

/// Two scalar agents with `g_i(x, x̄) = (x - t_i)^2 + w·x̄^2`.
///
/// The default instance (`t = (2, 3)`, `w = 2`) is the pair
/// `(x1 - 2)^2 + (x1 + x2)^2 / 2`, `(x2 - 3)^2 + (x1 + x2)^2 / 2` rewritten
/// through `x̄ = (x1 + x2) / 2`. Its social optimum is `(1/3, 4/3)` with
/// cost `75/9`; its Nash equilibrium is `(3/4, 7/4)` with cost `75/8`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTwoAgentGame {
    pub targets: [f64; 2],
    pub coupling: f64,
}

impl Default for QuadraticTwoAgentGame {
    fn default() -> Self {
        Self {
            targets: [2.0, 3.0],
            coupling: 2.0,
        }
    }
}

impl QuadraticTwoAgentGame {
    pub fn new() -> Self {
        Self::default()
    }
}

impl AggregativeGame for QuadraticTwoAgentGame {
    fn agents(&self) -> usize {
        2
    }
    fn dim(&self) -> usize {
        1
    }
    fn cost(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
        let e = x[0] - self.targets[i];
        e * e + self.coupling * y[0] * y[0]
    }
    fn grad_first(&self, i: usize, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * (x[0] - self.targets[i]);
    }
    fn grad_second(&self, _i: usize, _x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * self.coupling * y[0];
    }
}

/// One resident in the EV charging game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvAgent {
    /// `a_i`, height of the logistic price step.
    pub sigmoid_scale: f64,
    /// `b_i`, centre of the logistic price step.
    pub sigmoid_center: f64,
    /// `c_i`, weight of the departure-time discomfort term.
    pub log_scale: f64,
    /// `d_i`, preferred departure hour.
    pub departure: f64,
    /// `λ_i`, sensitivity to deviating from the average.
    pub sensitivity: f64,
}

impl EvAgent {
    /// Electricity bill `a/(1+exp(-(x-b))) + c·log(1+(x-d)^2)`.
    pub fn bill(&self, x: f64) -> f64 {
        let u = x - self.departure;
        self.sigmoid_scale * logistic(x - self.sigmoid_center) + self.log_scale * (u * u).ln_1p()
    }

    pub fn bill_derivative(&self, x: f64) -> f64 {
        let s = logistic(x - self.sigmoid_center);
        let u = x - self.departure;
        self.sigmoid_scale * s * (1.0 - s) + self.log_scale * 2.0 * u / (1.0 + u * u)
    }
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

pub const EV_DEPARTURES: [f64; 10] = [7.0, 7.0, 8.0, 8.0, 9.0, 9.0, 13.0, 19.0, 19.0, 22.0];
pub const EV_SIGMOID_CENTERS: [f64; 10] = [7.0, 7.4, 7.8, 8.2, 8.6, 9.0, 9.4, 9.8, 10.2, 10.6];

/// Ranges for the seeded coefficients of the EV game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvRanges {
    /// Shared range for `a_i` and `c_i`.
    pub coefficients: (f64, f64),
    /// Open range for `λ_i`.
    pub sensitivity: (f64, f64),
}

impl Default for EvRanges {
    fn default() -> Self {
        Self {
            coefficients: (5.0, 40.0),
            sensitivity: (0.0, 2.0),
        }
    }
}

/// Flexible EV charging: `g_i(x_i, x̄) = bill_i(x_i) + λ_i (x_i - x̄)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvChargingGame {
    agents: Vec<EvAgent>,
}

impl EvChargingGame {
    /// Ten residents with the fixed departure/centre vectors and `a_i`,
    /// `c_i`, `λ_i` drawn once from `seed`.
    pub fn from_seed(seed: u64, ranges: EvRanges) -> Result<Self> {
        let (lo, hi) = ranges.coefficients;
        let (slo, shi) = ranges.sensitivity;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("coefficient range [{lo}, {hi}]")));
        }
        if !(slo.is_finite() && shi.is_finite() && slo < shi) {
            return Err(Error::InvalidParameter(format!("sensitivity range ({slo}, {shi})")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agents = EV_DEPARTURES
            .iter()
            .zip(EV_SIGMOID_CENTERS.iter())
            .map(|(&departure, &sigmoid_center)| {
                let sigmoid_scale = rng.random_range(lo..=hi);
                let log_scale = rng.random_range(lo..=hi);
                let sensitivity = loop {
                    let v = rng.random_range(slo..shi);
                    if v > slo {
                        break v;
                    }
                };
                EvAgent {
                    sigmoid_scale,
                    sigmoid_center,
                    log_scale,
                    departure,
                    sensitivity,
                }
            })
            .collect();
        Ok(Self { agents })
    }

    pub fn from_agents(agents: Vec<EvAgent>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidParameter("EV game needs at least one agent".into()));
        }
        Ok(Self { agents })
    }

    pub fn agent(&self, i: usize) -> &EvAgent {
        &self.agents[i]
    }

    pub fn agent_params(&self) -> &[EvAgent] {
        &self.agents
    }
}

impl AggregativeGame for EvChargingGame {
    fn agents(&self) -> usize {
        self.agents.len()
    }
    fn dim(&self) -> usize {
        1
    }
    fn cost(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
        let a = &self.agents[i];
        let dev = x[0] - y[0];
        a.bill(x[0]) + a.sensitivity * dev * dev
    }
    fn grad_first(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        let a = &self.agents[i];
        out[0] = a.bill_derivative(x[0]) + 2.0 * a.sensitivity * (x[0] - y[0]);
    }
    fn grad_second(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = -2.0 * self.agents[i].sensitivity * (x[0] - y[0]);
    }
}

/// Single-agent tilted double well `g(x, ·) = (x^2 - 1)^2 + tilt·x`.
///
/// With a positive tilt the global minimum sits near `x = -1` and the
/// right-hand well is a strictly worse local minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWellGame {
    pub tilt: f64,
}

impl DoubleWellGame {
    pub fn new(tilt: f64) -> Self {
        Self { tilt }
    }

    pub fn value(&self, z: f64) -> f64 {
        let q = z * z - 1.0;
        q * q + self.tilt * z
    }

    pub fn derivative(&self, z: f64) -> f64 {
        4.0 * z * (z * z - 1.0) + self.tilt
    }
}

impl AggregativeGame for DoubleWellGame {
    fn agents(&self) -> usize {
        1
    }
    fn dim(&self) -> usize {
        1
    }
    fn cost(&self, _i: usize, x: &[f64], _y: &[f64]) -> f64 {
        self.value(x[0])
    }
    fn grad_first(&self, _i: usize, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = self.derivative(x[0]);
    }
    fn grad_second(&self, _i: usize, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
}

type CostFn = dyn Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(usize, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// A game assembled from closures. Custom games are code-only.
pub struct CustomGame {
    agents: usize,
    dim: usize,
    cost: Box<CostFn>,
    grad_first: Box<GradFn>,
    grad_second: Box<GradFn>,
}

impl CustomGame {
    pub fn new(
        agents: usize,
        dim: usize,
        cost: impl Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
        grad_first: impl Fn(usize, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        grad_second: impl Fn(usize, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if agents == 0 || dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "custom game needs positive sizes, got n = {agents}, d = {dim}"
            )));
        }
        Ok(Self {
            agents,
            dim,
            cost: Box::new(cost),
            grad_first: Box::new(grad_first),
            grad_second: Box::new(grad_second),
        })
    }
}

impl AggregativeGame for CustomGame {
    fn agents(&self) -> usize {
        self.agents
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn cost(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
        (self.cost)(i, x, y)
    }
    fn grad_first(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.grad_first)(i, x, y, out)
    }
    fn grad_second(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.grad_second)(i, x, y, out)
    }
}

// ---------------------------------------------------------------------------
// Checkers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientMismatch {
    pub agent: usize,
    pub which: Partial,
    pub coordinate: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    pub probes: usize,
    pub max_rel_error: f64,
    pub failures: Vec<GradientMismatch>,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Every `(x, y)` pair from a list of scalar probe values, for `d = 1` games.
pub fn probe_grid_1d(values: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    values
        .iter()
        .flat_map(|&x| values.iter().map(move |&y| (vec![x], vec![y])))
        .collect()
}

/// Compare both analytic partials against central finite differences of the
/// cost. Entries with `|analytic - fd| / (1 + |analytic|) > 1e-5` are flagged.
pub fn check_gradients<G: AggregativeGame + ?Sized>(
    game: &G,
    probe_grid: &[(Vec<f64>, Vec<f64>)],
) -> GradientReport {
    let d = game.dim();
    let mut max_rel_error: f64 = 0.0;
    let mut failures = Vec::new();
    let mut analytic = vec![0.0; d];
    for (x, y) in probe_grid {
        for i in 0..game.agents() {
            for which in [Partial::First, Partial::Second] {
                match which {
                    Partial::First => game.grad_first(i, x, y, &mut analytic),
                    Partial::Second => game.grad_second(i, x, y, &mut analytic),
                }
                for c in 0..d {
                    let (mut plus_x, mut plus_y) = (x.clone(), y.clone());
                    let (mut minus_x, mut minus_y) = (x.clone(), y.clone());
                    match which {
                        Partial::First => {
                            plus_x[c] += FD_STEP;
                            minus_x[c] -= FD_STEP;
                        }
                        Partial::Second => {
                            plus_y[c] += FD_STEP;
                            minus_y[c] -= FD_STEP;
                        }
                    }
                    let fd = (game.cost(i, &plus_x, &plus_y) - game.cost(i, &minus_x, &minus_y))
                        / (2.0 * FD_STEP);
                    let rel = (analytic[c] - fd).abs() / (1.0 + analytic[c].abs());
                    let rel = if rel.is_finite() { rel } else { f64::INFINITY };
                    max_rel_error = max_rel_error.max(rel);
                    if rel > FD_TOLERANCE {
                        failures.push(GradientMismatch {
                            agent: i,
                            which,
                            coordinate: c,
                            x: x.clone(),
                            y: y.clone(),
                            analytic: analytic[c],
                            finite_difference: fd,
                            rel_error: rel,
                        });
                    }
                }
            }
        }
    }
    GradientReport {
        probes: probe_grid.len(),
        max_rel_error,
        failures,
    }
}

/// The common function `G(x, y)` against which gradient dissimilarity is
/// measured.
pub trait ReferenceGradient {
    fn grad_first(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn grad_second(&self, x: &[f64], y: &[f64], out: &mut [f64]);
}

/// `G = (1/n) Σ_i g_i`, the default reference.
pub struct AverageOfAgents<'a, G: AggregativeGame + ?Sized>(pub &'a G);

impl<G: AggregativeGame + ?Sized> ReferenceGradient for AverageOfAgents<'_, G> {
    fn grad_first(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        average_partial(self.0, x, y, out, Partial::First)
    }
    fn grad_second(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        average_partial(self.0, x, y, out, Partial::Second)
    }
}

fn average_partial<G: AggregativeGame + ?Sized>(game: &G, x: &[f64], y: &[f64], out: &mut [f64], which: Partial) {
    let n = game.agents();
    let mut buf = vec![0.0; game.dim()];
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..n {
        match which {
            Partial::First => game.grad_first(i, x, y, &mut buf),
            Partial::Second => game.grad_second(i, x, y, &mut buf),
        }
        for (o, b) in out.iter_mut().zip(&buf) {
            *o += b / n as f64;
        }
    }
}

/// A single agent's cost used as the reference.
pub struct SingleAgent<'a, G: AggregativeGame + ?Sized> {
    pub game: &'a G,
    pub agent: usize,
}

impl<G: AggregativeGame + ?Sized> ReferenceGradient for SingleAgent<'_, G> {
    fn grad_first(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.game.grad_first(self.agent, x, y, out)
    }
    fn grad_second(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.game.grad_second(self.agent, x, y, out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissimilarityReport {
    pub radius: f64,
    pub samples: usize,
    /// Empirical sup of `‖∇_1 g_i - ∇_1 G‖` per agent.
    pub sup_first: Vec<f64>,
    /// Empirical sup of `‖∇_2 g_i - ∇_2 G‖` per agent.
    pub sup_second: Vec<f64>,
    /// Set when some sample produced a non-finite gradient.
    pub unbounded_suspect: bool,
}

impl DissimilarityReport {
    pub fn max_sup(&self) -> f64 {
        self.sup_first
            .iter()
            .chain(&self.sup_second)
            .fold(0.0_f64, |m, v| m.max(*v))
    }
}

/// Monte-Carlo estimate of the gradient dissimilarity over the ball of
/// `radius` in `(x, y)` space. A finite result is only a necessary condition
/// for boundedness.
pub fn check_dissimilarity_bound<G, R>(
    game: &G,
    reference: &R,
    sample_count: usize,
    radius: f64,
    seed: u64,
) -> Result<DissimilarityReport>
where
    G: AggregativeGame + ?Sized,
    R: ReferenceGradient + ?Sized,
{
    if sample_count == 0 {
        return Err(Error::InvalidParameter("sample_count must be at least 1".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let n = game.agents();
    let d = game.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup_first = vec![0.0_f64; n];
    let mut sup_second = vec![0.0_f64; n];
    let mut unbounded_suspect = false;
    let (mut gi, mut gr) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..sample_count {
        let point = sample_ball(&mut rng, 2 * d, radius);
        let (x, y) = point.split_at(d);
        for i in 0..n {
            for (which, sup) in [(Partial::First, &mut sup_first), (Partial::Second, &mut sup_second)] {
                match which {
                    Partial::First => {
                        game.grad_first(i, x, y, &mut gi);
                        reference.grad_first(x, y, &mut gr);
                    }
                    Partial::Second => {
                        game.grad_second(i, x, y, &mut gi);
                        reference.grad_second(x, y, &mut gr);
                    }
                }
                let dist = gi
                    .iter()
                    .zip(&gr)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist.is_finite() {
                    sup[i] = sup[i].max(dist);
                } else {
                    unbounded_suspect = true;
                    sup[i] = f64::INFINITY;
                }
            }
        }
    }
    Ok(DissimilarityReport {
        radius,
        samples: sample_count,
        sup_first,
        sup_second,
        unbounded_suspect,
    })
}

fn sample_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    dir.iter_mut().for_each(|v| *v *= r / norm);
    dir
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissimilarityGrowth {
    pub small: DissimilarityReport,
    pub large: DissimilarityReport,
    /// Set when the sup grows faster than `sqrt(r_large / r_small)`.
    pub flagged: bool,
}

/// Run the dissimilarity sampler at two radii and flag growth that suggests
/// the sup is unbounded.
pub fn check_dissimilarity_growth<G, R>(
    game: &G,
    reference: &R,
    sample_count: usize,
    radii: (f64, f64),
    seed: u64,
) -> Result<DissimilarityGrowth>
where
    G: AggregativeGame + ?Sized,
    R: ReferenceGradient + ?Sized,
{
    let (r_small, r_large) = radii;
    if !(r_large > r_small) {
        return Err(Error::InvalidParameter(format!(
            "radii must be increasing, got ({r_small}, {r_large})"
        )));
    }
    let small = check_dissimilarity_bound(game, reference, sample_count, r_small, seed)?;
    let large = check_dissimilarity_bound(game, reference, sample_count, r_large, seed)?;
    let (a, b) = (small.max_sup(), large.max_sup());
    let flagged = large.unbounded_suspect
        || (b > 1e-12 && b > a * (r_large / r_small).sqrt());
    Ok(DissimilarityGrowth { small, large, flagged })
}

/// Scan `[lo, hi]` for a point where the second central difference of `f` is
/// negative, which witnesses non-convexity.
pub fn find_negative_curvature(f: impl Fn(f64) -> f64, lo: f64, hi: f64, samples: usize) -> Option<f64> {
    let h = 1e-3;
    (0..=samples)
        .map(|s| lo + (hi - lo) * s as f64 / samples.max(1) as f64)
        .find(|&x| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h) < -1e-6)
}
