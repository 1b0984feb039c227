//! Ground truth computed without touching the iteration code: exhaustive
//! grids and multistart descent on the social cost, the closed-form Nash
//! point of the quadratic game, and 1-D Gibbs densities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{AggregativeGame, QuadraticTwoAgentGame, SocialCost};

/// Largest joint dimension accepted by the grid search.
pub const GRID_DIM_LIMIT: usize = 4;
/// Largest number of grid points evaluated.
pub const GRID_POINT_LIMIT: u64 = 200_000_000;
pub const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Grid,
    Multistart,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub method: OracleKind,
    /// Grid spacing for `grid`, start count for `multistart`.
    pub resolution: f64,
    /// `true` only when no evaluated point is strictly better by exhaustion.
    pub certified: bool,
    pub provenance: String,
}

fn axis(lo: f64, hi: f64, resolution: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidParameter(format!("box [{lo}, {hi}] must be finite and ordered")));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidParameter(format!("resolution must be positive, got {resolution}")));
    }
    let steps = ((hi - lo) / resolution + 1e-9).floor() as usize;
    Ok((0..=steps).map(|i| lo + i as f64 * resolution).collect())
}

/// Exhaustive minimisation of the social cost on a regular grid over the
/// box `[lo, hi]^(n·d)`. Ties keep the first point in lexicographic order.
pub fn grid_search_social_optimum<G: AggregativeGame + ?Sized>(
    game: &G,
    bounds: (f64, f64),
    resolution: f64,
) -> Result<OracleResult> {
    let social = SocialCost::new(game);
    let dims = social.joint_len();
    if dims > GRID_DIM_LIMIT {
        return Err(Error::DimensionTooHigh {
            dims,
            limit: GRID_DIM_LIMIT,
        });
    }
    let ticks = axis(bounds.0, bounds.1, resolution)?;
    let total = (ticks.len() as u64).checked_pow(dims as u32).unwrap_or(u64::MAX);
    if total > GRID_POINT_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "grid of {total} points exceeds {GRID_POINT_LIMIT}; coarsen the resolution"
        )));
    }
    let mut index = vec![0usize; dims];
    let mut point: Vec<f64> = index.iter().map(|&i| ticks[i]).collect();
    let mut best = (f64::INFINITY, point.clone());
    'outer: loop {
        let value = social.value(&point)?;
        if value < best.0 {
            best = (value, point.clone());
        }
        for c in (0..dims).rev() {
            index[c] += 1;
            if index[c] < ticks.len() {
                point[c] = ticks[index[c]];
                continue 'outer;
            }
            index[c] = 0;
            point[c] = ticks[0];
        }
        break;
    }
    Ok(OracleResult {
        point: best.1,
        value: best.0,
        method: OracleKind::Grid,
        resolution,
        certified: true,
        provenance: format!("exhaustive grid over [{}, {}]^{dims}, {total} points", bounds.0, bounds.1),
    })
}

/// Backtracking gradient descent from one start. Returns `None` when the
/// iterate leaves the finite range.
fn descend<G: AggregativeGame + ?Sized>(social: &SocialCost<G>, mut x: Vec<f64>, budget: usize) -> Option<(Vec<f64>, f64)> {
    let mut fx = social.value(&x).ok()?;
    let mut step: f64 = 1.0;
    for _ in 0..budget {
        let g = social.gradient(&x).ok()?;
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if g2 <= 1e-26 {
            break;
        }
        step = (step * 2.0).min(1.0);
        let mut accepted = false;
        while step > 1e-20 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
            if let Ok(ft) = social.value(&trial) {
                if ft <= fx - ARMIJO * step * g2 {
                    x = trial;
                    fx = ft;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    fx.is_finite().then_some((x, fx))
}

/// Best terminal point of backtracking descent (Armijo `1e-4`, halving)
/// from `starts` uniform draws in the box. Best-found, not certified.
pub fn multistart_descent<G: AggregativeGame + ?Sized>(
    game: &G,
    bounds: (f64, f64),
    starts: usize,
    budget: usize,
    seed: u64,
) -> Result<OracleResult> {
    if starts < 1 {
        return Err(Error::InvalidParameter("multistart needs at least one start".into()));
    }
    let social = SocialCost::new(game);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..starts)
        .map(|_| {
            (0..social.joint_len())
                .map(|_| if bounds.0 < bounds.1 { rng.random_range(bounds.0..bounds.1) } else { bounds.0 })
                .collect()
        })
        .collect();
    multistart_from(game, points, budget)
}

/// Multistart descent from explicit starting points.
pub fn multistart_from<G: AggregativeGame + ?Sized>(game: &G, starts: Vec<Vec<f64>>, budget: usize) -> Result<OracleResult> {
    let count = starts.len();
    if count < 1 {
        return Err(Error::InvalidParameter("multistart needs at least one start".into()));
    }
    let social = SocialCost::new(game);
    let ends: Vec<Option<(Vec<f64>, f64)>> = starts.into_par_iter().map(|x| descend(&social, x, budget)).collect();
    // Sequential scan: ties go to the lowest start index.
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (x, v) in ends.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((x, v));
        }
    }
    let (point, value) = best.ok_or(Error::AllStartsDiverged { starts: count })?;
    Ok(OracleResult {
        point,
        value,
        method: OracleKind::Multistart,
        resolution: count as f64,
        certified: false,
        provenance: format!("best of {count} backtracking descents, budget {budget}"),
    })
}

/// Nash equilibrium of the two-agent quadratic game: each agent's own
/// stationarity `∂/∂x_i [(x_i - t_i)^2 + w x̄^2] = 0`, solved by Cramer's rule.
pub fn quadratic_nash(game: &QuadraticTwoAgentGame) -> Vec<f64> {
    let c = 2.0 * game.coupling / 4.0;
    let (a, b) = (2.0 + c, c);
    let (r1, r2) = (2.0 * game.targets[0], 2.0 * game.targets[1]);
    let det = a * a - b * b;
    vec![(r1 * a - b * r2) / det, (a * r2 - b * r1) / det]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsDensity {
    pub grid: Vec<f64>,
    /// Normalised density at each grid point.
    pub density: Vec<f64>,
    pub log_z: f64,
    pub z: f64,
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

impl GibbsDensity {
    /// Probability mass on `[lo, hi]` by the trapezoid rule over grid cells
    /// lying inside the interval.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        let idx: Vec<usize> = (0..self.grid.len()).filter(|&i| self.grid[i] >= lo && self.grid[i] <= hi).collect();
        match (idx.first(), idx.last()) {
            (Some(&a), Some(&b)) => trapezoid(&self.grid[a..=b], &self.density[a..=b]),
            _ => 0.0,
        }
    }

    pub fn total_mass(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }
}

/// Density `exp(-2G/ε^2)/Z` on a grid over `bounds`, integrated with the
/// trapezoid rule. Exponents are shifted by their maximum before
/// exponentiation so the normalised density stays accurate.
pub fn gibbs_density_1d(
    objective: impl Fn(f64) -> f64,
    epsilon: f64,
    bounds: (f64, f64),
    resolution: f64,
) -> Result<GibbsDensity> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let grid = axis(bounds.0, bounds.1, resolution)?;
    if grid.len() < 2 {
        return Err(Error::InvalidParameter("grid needs at least two points".into()));
    }
    let mut exponents = Vec::with_capacity(grid.len());
    for &z in &grid {
        let g = objective(z);
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::Domain(format!("objective must be finite and nonnegative, got {g} at {z}")));
        }
        exponents.push(-2.0 * g / (epsilon * epsilon));
    }
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = exponents.iter().map(|u| (u - top).exp()).collect();
    let z_shifted = trapezoid(&grid, &shifted);
    let log_z = z_shifted.ln() + top;
    let z = log_z.exp();
    if z == 0.0 || !z.is_normal() {
        return Err(Error::Underflow { log_z });
    }
    let density = shifted.iter().map(|w| w / z_shifted).collect();
    Ok(GibbsDensity { grid, density, log_z, z })
}
