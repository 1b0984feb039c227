//! Turns a validated [`ExperimentConfig`] into a game, a graph model and a
//! schedule, and drives the selected iteration for `T` steps.

use rand::Rng;
use serde::Serialize;

use crate::annealing::{centralized_anneal_step, daa_step, daag_step, Method, SwarmState};
use crate::config::{ExperimentConfig, GameSpec, NetworkMode};
use crate::error::{Error, Result};
use crate::game::{AggregativeGame, DoubleWellGame, EvChargingGame, EvRanges, QuadraticTwoAgentGame, SocialCost};
use crate::noise::{stream_rng, NoiseStreams, Stream};
use crate::schedule::ScheduleSet;
use crate::topology::{erdos_renyi_pool, GraphSample, NetworkModel};
use crate::trace::{fingerprint, Record, RunTrace};

/// Largest `β` allowed per unit of max degree, keeping `I - βL` contractive
/// on every graph of the model.
pub const BETA_CLAMP_NUMERATOR: f64 = 0.49;

#[derive(Debug, Clone, PartialEq)]
pub enum BuiltGame {
    Quadratic(QuadraticTwoAgentGame),
    Ev(EvChargingGame),
    DoubleWell(DoubleWellGame),
}

impl BuiltGame {
    pub fn from_spec(spec: &GameSpec) -> Result<Self> {
        Ok(match *spec {
            GameSpec::Quadratic => BuiltGame::Quadratic(QuadraticTwoAgentGame::new()),
            GameSpec::EvCharging {
                seed,
                coefficient_range,
                sensitivity_range,
            } => BuiltGame::Ev(EvChargingGame::from_seed(
                seed,
                EvRanges {
                    coefficients: coefficient_range,
                    sensitivity: sensitivity_range,
                },
            )?),
            GameSpec::DoubleWell { tilt } => BuiltGame::DoubleWell(DoubleWellGame::new(tilt)),
        })
    }

    fn inner(&self) -> &dyn AggregativeGame {
        match self {
            BuiltGame::Quadratic(g) => g,
            BuiltGame::Ev(g) => g,
            BuiltGame::DoubleWell(g) => g,
        }
    }
}

impl AggregativeGame for BuiltGame {
    fn agents(&self) -> usize {
        self.inner().agents()
    }
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn cost(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
        self.inner().cost(i, x, y)
    }
    fn grad_first(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.inner().grad_first(i, x, y, out)
    }
    fn grad_second(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.inner().grad_second(i, x, y, out)
    }
}

pub fn build_network(config: &ExperimentConfig) -> Result<NetworkModel> {
    let net = &config.network;
    match net.mode {
        NetworkMode::Pool => erdos_renyi_pool(net.n, net.pool_size, net.p_range, net.seed),
        NetworkMode::Fresh => NetworkModel::fresh(net.n, net.p_range),
        NetworkMode::Complete => Ok(NetworkModel::complete(net.n)),
        NetworkMode::Single => {
            let edges = net
                .edges
                .as_ref()
                .ok_or_else(|| Error::config("network.edges", "required for single-graph mode"))?;
            Ok(NetworkModel::Single(GraphSample::from_edges(net.n, edges)?))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub game: BuiltGame,
    pub network: NetworkModel,
    /// The configured schedule with the degree-based `β` clamp applied.
    pub schedule: ScheduleSet,
}

#[derive(Serialize)]
struct RunKey<'a> {
    config: &'a ExperimentConfig,
    method: Method,
    horizon: usize,
    seed: u64,
}

impl Experiment {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let game = BuiltGame::from_spec(&config.game)?;
        let network = build_network(config)?;
        let mut schedule = config.schedule;
        if config.network.beta_clamp {
            let max_degree = network.max_degree();
            if max_degree > 0 {
                let cap = BETA_CLAMP_NUMERATOR / max_degree as f64;
                schedule.beta_cap = Some(schedule.beta_cap.map_or(cap, |c| c.min(cap)));
            }
        }
        Ok(Self {
            config: config.clone(),
            game,
            network,
            schedule,
        })
    }

    pub fn initial_decisions(&self, seed: u64) -> Vec<f64> {
        let (lo, hi) = self.config.init_box();
        let mut rng = stream_rng(seed, Stream::Init, 0);
        let len = self.game.agents() * self.game.dim();
        (0..len)
            .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
            .collect()
    }

    /// Run `horizon` iterations of `method` from the seeded initial point.
    /// `horizon = 0` yields a trace holding only the initial state.
    pub fn run(&self, method: Method, horizon: usize, seed: u64) -> Result<RunTrace> {
        let fp = fingerprint(&RunKey {
            config: &self.config,
            method,
            horizon,
            seed,
        });
        let x0 = self.initial_decisions(seed);
        self.run_from(method, horizon, seed, x0, fp)
    }

    pub fn run_from(&self, method: Method, horizon: usize, seed: u64, x0: Vec<f64>, fingerprint: String) -> Result<RunTrace> {
        let (n, d) = (self.game.agents(), self.game.dim());
        let stride = self.config.record_stride.max(1);
        let keep = |k: usize| (k - 1).is_multiple_of(stride) || k == horizon;
        let mut state = SwarmState::new(n, d, x0)?;
        let mut records = Vec::with_capacity(horizon / stride + 2);
        if horizon == 0 {
            records.push(Record::from_state(&state));
        }
        match method {
            Method::Daa | Method::Daag => {
                let mut graph_rng = stream_rng(seed, Stream::Graph, 0);
                let mut noise = NoiseStreams::new(self.config.noise, n, seed);
                for _ in 0..horizon {
                    let graph = self.network.sample_graph(&mut graph_rng);
                    let next = match method {
                        Method::Daa => daa_step(&state, &self.game, &graph, &self.schedule, &mut noise)?,
                        _ => daag_step(&state, &self.game, &graph, &self.schedule)?,
                    };
                    if keep(state.k) {
                        records.push(Record {
                            k: state.k,
                            x: state.x.clone(),
                            v: state.v.clone(),
                            s: next.s.clone(),
                        });
                    }
                    state = next;
                }
            }
            Method::Centralized => {
                let social = SocialCost::new(&self.game);
                let mut noise = NoiseStreams::new(self.config.noise, 1, seed);
                for _ in 0..horizon {
                    if keep(state.k) {
                        records.push(Record::from_state(&state));
                    }
                    let z = centralized_anneal_step(
                        &state.x,
                        state.k,
                        |z, g| g.copy_from_slice(&social.gradient(z).expect("finite iterate")),
                        &self.schedule,
                        &mut noise,
                    )?;
                    state = SwarmState {
                        k: state.k + 1,
                        n,
                        d,
                        v: z.clone(),
                        s: z.clone(),
                        x: z,
                    };
                }
            }
        }
        Ok(RunTrace {
            method,
            n,
            d,
            tau_beta: self.schedule.tau_beta,
            records,
            final_state: state,
            fingerprint,
        })
    }
}

/// Build and run the configured method with the configured seed.
pub fn run(config: &ExperimentConfig) -> Result<RunTrace> {
    Experiment::build(config)?.run(config.method, config.horizon, config.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{NetworkSpec, OracleSpec};
    use crate::noise::{GradientNoise, NoiseModel};

    fn ev_config() -> ExperimentConfig {
        ExperimentConfig {
            name: "ev".into(),
            game: GameSpec::EvCharging {
                seed: 1,
                coefficient_range: (5.0, 40.0),
                sensitivity_range: (0.0, 2.0),
            },
            network: NetworkSpec {
                mode: NetworkMode::Pool,
                n: 10,
                pool_size: 50,
                p_range: (0.1, 0.2),
                seed: 7,
                edges: None,
                beta_clamp: true,
            },
            method: Method::Daa,
            compare_with: None,
            schedule: ScheduleSet::default(),
            noise: NoiseModel {
                gradient: GradientNoise::Uniform { bound: 5.0 },
                annealing: true,
            },
            init_box: None,
            horizon: 500,
            record_stride: 1,
            replicates: 1,
            seed: 9,
            diagnostic_tau: 0.2,
            output_dir: "out".into(),
            ensemble: None,
            oracle: OracleSpec::default(),
        }
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let exp = Experiment::build(&ev_config()).unwrap();
        let trace = exp.run(Method::Daa, 0, 4).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].x, exp.initial_decisions(4));
        assert_eq!(trace.records[0].v, trace.records[0].x);
        assert_eq!(trace.final_state.k, 1);
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let config = ev_config();
        for method in [Method::Daa, Method::Daag, Method::Centralized] {
            let mut c = config.clone();
            c.method = method;
            let (a, b) = (run(&c).unwrap(), run(&c).unwrap());
            assert_eq!(a, b, "{method}");
            assert_eq!(a.fingerprint, b.fingerprint);
        }
        let mut other = config.clone();
        other.seed += 1;
        assert_ne!(run(&config).unwrap().records, run(&other).unwrap().records);
    }

    #[test]
    fn tracking_identities_hold_on_every_record() {
        let trace = run(&ev_config()).unwrap();
        let n = trace.n as f64;
        for r in &trace.records {
            let (xbar, vbar, sbar) = (
                r.x.iter().sum::<f64>() / n,
                r.v.iter().sum::<f64>() / n,
                r.s.iter().sum::<f64>() / n,
            );
            assert!((sbar - vbar).abs() <= 1e-12 * n * (1.0 + vbar.abs()), "k = {}", r.k);
            assert!((vbar - xbar).abs() <= 1e-12 * n * (1.0 + xbar.abs()), "k = {}", r.k);
        }
    }

    #[test]
    fn stride_thins_records() {
        let mut config = ev_config();
        config.record_stride = 100;
        let trace = run(&config).unwrap();
        let ks: Vec<usize> = trace.records.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![1, 101, 201, 301, 401, 500]);
    }

    #[test]
    fn beta_clamp_uses_pool_max_degree() {
        let exp = Experiment::build(&ev_config()).unwrap();
        let cap = exp.schedule.beta_cap.unwrap();
        assert_eq!(cap, BETA_CLAMP_NUMERATOR / exp.network.max_degree() as f64);
        for g in exp.network.pool().unwrap() {
            let rho = crate::topology::lambda2(g.laplacian(), 1e-10).ok();
            assert!(rho.is_some());
            // Gershgorin: λ_max(L) <= 2 · max degree
            assert!(cap * 2.0 * g.max_degree() as f64 <= 0.98 + 1e-12);
        }
    }

    #[test]
    fn daa_without_noise_or_coupling_equals_daag() {
        use crate::game::CustomGame;
        let game = CustomGame::new(
            3,
            1,
            |i, x, _| (x[0] * x[0] - 1.0).powi(2) + i as f64 * x[0],
            |i, x, _, o| o[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0) + i as f64,
            |_, _, _, o| o[0] = 0.0,
        )
        .unwrap();
        let graphs = [GraphSample::path(3), GraphSample::complete(3), GraphSample::edgeless(3)];
        let sched = ScheduleSet {
            c_alpha: 0.05,
            ..ScheduleSet::default()
        }
        .with_beta_cap(Some(0.2));
        let mut a = SwarmState::new(3, 1, vec![0.3, -0.7, 1.2]).unwrap();
        let mut b = a.clone();
        let mut noise = NoiseStreams::new(NoiseModel::off(), 3, 5);
        for k in 0..300 {
            let g = &graphs[k % 3];
            a = daa_step(&a, &game, g, &sched, &mut noise).unwrap();
            b = daag_step(&b, &game, g, &sched).unwrap();
            assert_eq!(a, b);
        }
    }
}
