//! One-step maps of the three iterations:
//!
//! * distributed annealing (DAA): gradient tracking on the aggregate plus
//!   noisy gradient steps and a decaying Gaussian perturbation;
//! * DAAG: the deterministic tracking scheme descending `∇_1 g_i` only;
//! * centralized annealing: `z ← z - α(∇G(z) + ξ) + γ w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{agent_update_gradient_into, average_rows, AggregativeGame};
use crate::noise::NoiseStreams;
use crate::schedule::ScheduleSet;
use crate::topology::GraphSample;

/// Iterates whose magnitude exceeds this abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Daa,
    Daag,
    Centralized,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Daa => "daa",
            Method::Daag => "daag",
            Method::Centralized => "centralized",
        })
    }
}

/// Per-agent `(x_i, v_i, s_i)` at iteration `k`, stored agent-major as
/// `n × d` row blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// The most recent mixed estimate. Equal to `v` before the first step.
    pub s: Vec<f64>,
}

impl SwarmState {
    /// State at `k = 1` with `v = s = x`.
    pub fn new(n: usize, d: usize, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                actual: x0.len(),
            });
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("initial decisions must be finite".into()));
        }
        Ok(Self {
            k: 1,
            n,
            d,
            v: x0.clone(),
            s: x0.clone(),
            x: x0,
        })
    }

    pub fn agent_x(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn agent_s(&self, i: usize) -> &[f64] {
        &self.s[i * self.d..(i + 1) * self.d]
    }

    pub fn xbar(&self) -> Vec<f64> {
        average_rows(&self.x, self.n, self.d)
    }

    pub fn vbar(&self) -> Vec<f64> {
        average_rows(&self.v, self.n, self.d)
    }

    pub fn sbar(&self) -> Vec<f64> {
        average_rows(&self.s, self.n, self.d)
    }
}

/// `s_i = v_i - β Σ_j w_ij (v_i - v_j)` for every agent.
pub fn mix(v: &[f64], graph: &GraphSample, beta: f64, d: usize) -> Vec<f64> {
    let mut s = v.to_vec();
    for i in 0..graph.n() {
        for &j in graph.neighbors(i) {
            for c in 0..d {
                s[i * d + c] -= beta * (v[i * d + c] - v[j * d + c]);
            }
        }
    }
    s
}

fn guard(values: &[f64], d: usize, iteration: usize, what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
        None => Ok(()),
        Some(pos) => Err(Error::Divergence {
            iteration,
            agent: pos / d.max(1),
            detail: format!("{what} = {}", values[pos]),
        }),
    }
}

fn tracking_step(
    state: &SwarmState,
    graph: &GraphSample,
    sched: &ScheduleSet,
    mut advance: impl FnMut(usize, &[f64], &[f64], &mut [f64]),
) -> Result<SwarmState> {
    if graph.n() != state.n {
        return Err(Error::DimensionMismatch {
            expected: state.n,
            actual: graph.n(),
        });
    }
    if state.k < 1 {
        return Err(Error::InvalidParameter("iterations start at k = 1".into()));
    }
    let (n, d, k) = (state.n, state.d, state.k);
    let s = mix(&state.v, graph, sched.beta(k), d);
    guard(&s, d, k, "s")?;
    let mut x = vec![0.0; n * d];
    for i in 0..n {
        let rows = i * d..(i + 1) * d;
        advance(i, &state.x[rows.clone()], &s[rows.clone()], &mut x[rows]);
    }
    guard(&x, d, k, "x")?;
    let v: Vec<f64> = (0..n * d).map(|c| s[c] + x[c] - state.x[c]).collect();
    guard(&v, d, k, "v")?;
    Ok(SwarmState {
        k: k + 1,
        n,
        d,
        x,
        v,
        s,
    })
}

/// One synchronous DAA iteration from the snapshot at `state.k`:
///
/// ```text
/// s_i = v_i - β^k Σ_j w_ij (v_i - v_j)
/// x_i' = x_i - α^k [∇_1 g_i(x_i, s_i) + (1/n) ∇_2 g_i(x_i, s_i) + ς_i] + γ^k ι_i
/// v_i' = s_i + x_i' - x_i
/// ```
///
/// The returned state is at `k + 1` and carries the `s` computed at `k`.
pub fn daa_step<G: AggregativeGame + ?Sized>(
    state: &SwarmState,
    game: &G,
    graph: &GraphSample,
    sched: &ScheduleSet,
    noise: &mut NoiseStreams,
) -> Result<SwarmState> {
    check_game(state, game)?;
    let k = state.k;
    let (alpha, gamma) = (sched.alpha(k), sched.gamma(k));
    let d = state.d;
    let mut grad = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut grad_noise = vec![0.0; d];
    let mut anneal = vec![0.0; d];
    tracking_step(state, graph, sched, |i, xi, si, out| {
        agent_update_gradient_into(game, i, xi, si, &mut grad, &mut scratch);
        noise.gradient_into(i, &mut grad_noise);
        noise.annealing_into(i, &mut anneal);
        for c in 0..d {
            out[c] = xi[c] - alpha * (grad[c] + grad_noise[c]) + gamma * anneal[c];
        }
    })
}

/// One DAAG iteration: same tracking recursion, `x_i' = x_i - α^k ∇_1 g_i(x_i, s_i)`.
pub fn daag_step<G: AggregativeGame + ?Sized>(
    state: &SwarmState,
    game: &G,
    graph: &GraphSample,
    sched: &ScheduleSet,
) -> Result<SwarmState> {
    check_game(state, game)?;
    let alpha = sched.alpha(state.k);
    let mut grad = vec![0.0; state.d];
    tracking_step(state, graph, sched, |i, xi, si, out| {
        game.grad_first(i, xi, si, &mut grad);
        for c in 0..xi.len() {
            out[c] = xi[c] - alpha * grad[c];
        }
    })
}

fn check_game<G: AggregativeGame + ?Sized>(state: &SwarmState, game: &G) -> Result<()> {
    if game.agents() != state.n || game.dim() != state.d {
        return Err(Error::DimensionMismatch {
            expected: game.agents() * game.dim(),
            actual: state.n * state.d,
        });
    }
    Ok(())
}

/// `z^{k+1} = z^k - α^k (∇G(z^k) + ξ^k) + γ^k w^k`, with `ξ` from the
/// gradient-noise stream and `w` from the annealing stream of agent 0.
pub fn centralized_anneal_step(
    z: &[f64],
    k: usize,
    objective_grad: impl Fn(&[f64], &mut [f64]),
    sched: &ScheduleSet,
    noise: &mut NoiseStreams,
) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::InvalidParameter("iterations start at k = 1".into()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("centralized iterate must be finite".into()));
    }
    let dim = z.len();
    let (alpha, gamma) = (sched.alpha(k), sched.gamma(k));
    let mut grad = vec![0.0; dim];
    let mut xi = vec![0.0; dim];
    let mut w = vec![0.0; dim];
    objective_grad(z, &mut grad);
    noise.gradient_into(0, &mut xi);
    noise.annealing_into(0, &mut w);
    let next: Vec<f64> = (0..dim)
        .map(|c| z[c] - alpha * (grad[c] + xi[c]) + gamma * w[c])
        .collect();
    guard(&next, dim, k, "z")?;
    Ok(next)
}
