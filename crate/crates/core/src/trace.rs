use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::annealing::{Method, SwarmState};
use crate::error::Result;
use crate::game::{average_rows, AggregativeGame, SocialCost};

/// Snapshot of iteration `k`: `x^k`, `v^k` and the `s^k` mixed from `v^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub k: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
}

impl Record {
    pub fn from_state(state: &SwarmState) -> Self {
        Self {
            k: state.k,
            x: state.x.clone(),
            v: state.v.clone(),
            s: state.s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub method: Method,
    pub n: usize,
    pub d: usize,
    /// Parameter `τ_β` of the schedule that produced the trace.
    pub tau_beta: f64,
    pub records: Vec<Record>,
    pub final_state: SwarmState,
    pub fingerprint: String,
}

impl RunTrace {
    pub fn xbar(&self, record: &Record) -> Vec<f64> {
        average_rows(&record.x, self.n, self.d)
    }

    pub fn agent_slice<'a>(&self, values: &'a [f64], i: usize) -> &'a [f64] {
        &values[i * self.d..(i + 1) * self.d]
    }

    /// Mean of `x` over the last `window` records.
    pub fn tail_average(&self, window: usize) -> Vec<f64> {
        self.tail_average_xs(window).0
    }

    /// Mean of `(x, s)` over the last `window` records.
    pub fn tail_average_xs(&self, window: usize) -> (Vec<f64>, Vec<f64>) {
        let window = window.clamp(1, self.records.len());
        let tail = &self.records[self.records.len() - window..];
        let len = self.n * self.d;
        let (mut x, mut s) = (vec![0.0; len], vec![0.0; len]);
        for r in tail {
            for c in 0..len {
                x[c] += r.x[c];
                s[c] += r.s[c];
            }
        }
        x.iter_mut().chain(s.iter_mut()).for_each(|m| *m /= window as f64);
        (x, s)
    }

    /// Number of records making up the last 10% (at least one).
    pub fn tail_window(&self) -> usize {
        (self.records.len() / 10).max(1)
    }

    /// One row per agent per recorded iteration:
    /// `k,agent,x,v,s,xbar,consensus_err,social_cost`. Vector entries with
    /// `d > 1` are `;`-separated.
    pub fn write_csv<G: AggregativeGame + ?Sized>(&self, game: &G, mut out: impl Write) -> Result<()> {
        writeln!(out, "k,agent,x,v,s,xbar,consensus_err,social_cost")?;
        let social = SocialCost::new(game);
        for r in &self.records {
            let xbar = self.xbar(r);
            let cost = social.value_unchecked(&r.x);
            for i in 0..self.n {
                let s = self.agent_slice(&r.s, i);
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.k,
                    i,
                    join(self.agent_slice(&r.x, i)),
                    join(self.agent_slice(&r.v, i)),
                    join(s),
                    join(&xbar),
                    distance(s, &xbar),
                    cost
                )?;
            }
        }
        Ok(())
    }
}

pub(crate) fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// First 16 hex digits of the SHA-256 of the value's JSON encoding.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("fingerprinted values serialize");
    let digest = Sha256::digest(&json);
    hex::encode(&digest[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(n: usize, xs: &[f64]) -> RunTrace {
        let records: Vec<Record> = xs
            .chunks(n)
            .enumerate()
            .map(|(k, x)| Record {
                k: k + 1,
                x: x.to_vec(),
                v: x.to_vec(),
                s: x.to_vec(),
            })
            .collect();
        let last = records.last().unwrap();
        RunTrace {
            method: Method::Daa,
            n,
            d: 1,
            tau_beta: 0.25,
            final_state: SwarmState::new(n, 1, last.x.clone()).unwrap(),
            records,
            fingerprint: String::new(),
        }
    }

    #[test]
    fn tail_average_uses_last_records() {
        let t = trace(2, &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.tail_average(2), vec![2.0, 3.0]);
        assert_eq!(t.tail_average(100), vec![4.0 / 3.0, 2.0]);
        assert_eq!(t.tail_window(), 1);
    }

    #[test]
    fn csv_layout() {
        let game = crate::game::QuadraticTwoAgentGame::new();
        let t = trace(2, &[1.0 / 3.0, 4.0 / 3.0]);
        let mut buf = Vec::new();
        t.write_csv(&game, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,agent,x,v,s,xbar,consensus_err,social_cost");
        assert_eq!(lines.len(), 3);
        let cols: Vec<_> = lines[1].split(',').collect();
        assert_eq!(cols.len(), 8);
        assert_eq!(cols[0], "1");
        let cost: f64 = cols[7].parse().unwrap();
        assert!((cost - 75.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn fingerprint_is_stable() {
        assert_eq!(fingerprint(&("a", 1)), fingerprint(&("a", 1)));
        assert_ne!(fingerprint(&("a", 1)), fingerprint(&("a", 2)));
        assert_eq!(fingerprint(&1).len(), 16);
    }
}
