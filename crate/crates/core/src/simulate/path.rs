//! Jump-chain construction of CTMC paths.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{replicate_rng, SimError};
use crate::qmatrix::{Boundary, RateMatrix};

/// Cumulative jump distributions of the effective generator.
#[derive(Debug, Clone)]
pub struct JumpTable {
    lo: i64,
    hi: i64,
    absorbing_edges: bool,
    exit: Vec<f64>,
    /// cumulative rates per row; the last entry equals `exit`
    cum: Vec<Vec<f64>>,
    /// target state per cumulative entry, `None` for killing
    targets: Vec<Vec<Option<i64>>>,
}

/// Where a replicate ended up at the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Endpoint {
    /// last state occupied, the pre-killing state for killed paths
    pub state: i64,
    pub killed: bool,
    pub stopped: bool,
    /// visited an edge state or was killed
    pub touched_edge: bool,
}

impl JumpTable {
    pub fn new(q: &RateMatrix) -> Self {
        let eff = q.effective();
        let mut exit = Vec::with_capacity(eff.len());
        let mut cum = Vec::with_capacity(eff.len());
        let mut targets = Vec::with_capacity(eff.len());
        for (i, row) in eff.rows.iter().enumerate() {
            let mut acc = 0.0;
            let mut c = Vec::with_capacity(row.len() + 1);
            let mut t = Vec::with_capacity(row.len() + 1);
            for &(j, r) in row {
                acc += r;
                c.push(acc);
                t.push(Some(eff.lo + j as i64));
            }
            if eff.kill[i] > 0.0 {
                acc += eff.kill[i];
                c.push(acc);
                t.push(None);
            }
            exit.push(acc);
            cum.push(c);
            targets.push(t);
        }
        JumpTable {
            lo: q.lo(),
            hi: q.hi(),
            absorbing_edges: q.boundary() == Boundary::Absorb,
            exit,
            cum,
            targets,
        }
    }

    fn is_edge(&self, n: i64) -> bool {
        n == self.lo || n == self.hi
    }

    pub(crate) fn check_start(&self, x0: i64) -> Result<(), SimError> {
        if x0 < self.lo || x0 > self.hi {
            return Err(SimError::StartOutsideWindow {
                x0,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    /// Runs one path to `t_end`, calling `on_jump(time, state)` after every
    /// jump (`state` is `None` on killing).
    fn run<R: Rng>(&self, x0: i64, t_end: f64, rng: &mut R, mut on_jump: impl FnMut(f64, Option<i64>)) -> Endpoint {
        let mut n = x0;
        let mut t = 0.0;
        let mut touched = self.is_edge(n);
        loop {
            if self.absorbing_edges && self.is_edge(n) {
                return Endpoint {
                    state: n,
                    killed: false,
                    stopped: true,
                    touched_edge: true,
                };
            }
            let i = (n - self.lo) as usize;
            let rate = self.exit[i];
            if rate <= 0.0 {
                break;
            }
            // 1 − U lies in (0, 1]
            let u: f64 = 1.0 - rng.random::<f64>();
            t += -u.ln() / rate;
            if t > t_end {
                break;
            }
            let pick = rng.random::<f64>() * rate;
            let cum = &self.cum[i];
            let k = cum.partition_point(|&c| c <= pick).min(cum.len() - 1);
            match self.targets[i][k] {
                Some(j) => {
                    n = j;
                    touched |= self.is_edge(n);
                    on_jump(t, Some(n));
                }
                None => {
                    on_jump(t, None);
                    return Endpoint {
                        state: n,
                        killed: true,
                        stopped: false,
                        touched_edge: true,
                    };
                }
            }
        }
        Endpoint {
            state: n,
            killed: false,
            stopped: false,
            touched_edge: touched,
        }
    }

    pub(crate) fn endpoint(&self, x0: i64, t_end: f64, seed: u64, lane: u64, rep: u64) -> Endpoint {
        let mut rng = replicate_rng(seed, lane, rep);
        self.run(x0, t_end, &mut rng, |_, _| {})
    }

    fn path(&self, x0: i64, t_end: f64, seed: u64, rep: u64) -> PathSample {
        let mut rng = replicate_rng(seed, 0, rep);
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut killed_at = None;
        let end = self.run(x0, t_end, &mut rng, |t, s| match s {
            Some(s) => {
                times.push(t);
                states.push(s);
            }
            None => killed_at = Some(t),
        });
        PathSample {
            x0,
            t_end,
            times,
            states,
            stopped: end.stopped,
            killed_at,
            seed,
            replicate: rep,
        }
    }
}

/// One path up to `t_end`: jump epochs and the states entered at them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub x0: i64,
    pub t_end: f64,
    pub times: Vec<f64>,
    pub states: Vec<i64>,
    /// absorbed at a window edge
    pub stopped: bool,
    /// epoch at which the chain was killed
    pub killed_at: Option<f64>,
    pub seed: u64,
    pub replicate: u64,
}

impl PathSample {
    /// State at time `t`; `None` after killing.
    pub fn state_at(&self, t: f64) -> Option<i64> {
        if self.killed_at.is_some_and(|k| t >= k) {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t);
        Some(if k == 0 { self.x0 } else { self.states[k - 1] })
    }

    pub fn killed(&self) -> bool {
        self.killed_at.is_some()
    }

    /// `time,state` rows starting with `(0, x0)`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "state"])?;
        w.write_record(["0".to_string(), self.x0.to_string()])?;
        for (t, s) in self.times.iter().zip(&self.states) {
            w.write_record([t.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A single path of `q` from `x0`, deterministic in `seed`.
pub fn sample_path(q: &RateMatrix, x0: i64, t_end: f64, seed: u64) -> Result<PathSample, SimError> {
    if !(t_end >= 0.0) {
        return Err(SimError::InvalidTime(t_end));
    }
    let table = JumpTable::new(q);
    table.check_start(x0)?;
    Ok(table.path(x0, t_end, seed, 0))
}

/// `reps` independent paths, replicate `r` on stream `(seed, 0, r)`.
pub fn sample_paths(q: &RateMatrix, x0: i64, t_end: f64, reps: u64, seed: u64) -> Result<Vec<PathSample>, SimError> {
    if !(t_end >= 0.0) {
        return Err(SimError::InvalidTime(t_end));
    }
    let table = JumpTable::new(q);
    table.check_start(x0)?;
    Ok((0..reps).into_par_iter().map(|r| table.path(x0, t_end, seed, r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_generator_stays_put() {
        let q = RateMatrix::new(0, 5, Boundary::Kill).unwrap();
        let p = sample_path(&q, 3, 10.0, 7).unwrap();
        assert!(p.times.is_empty());
        assert_eq!(p.state_at(10.0), Some(3));
        assert!(!p.stopped && !p.killed());
    }

    #[test]
    fn pure_death_absorption_time_is_exponential() {
        let q = RateMatrix::from_fn(0, 3, Boundary::Absorb, |_| [(-1, 1.0)]).unwrap();
        let reps = 100_000;
        let paths = sample_paths(&q, 1, 1e9, reps, 11).unwrap();
        assert!(paths.iter().all(|p| p.stopped && p.states == [0]));
        let times: Vec<f64> = paths.iter().map(|p| p.times[0]).collect();
        let mean = times.iter().sum::<f64>() / reps as f64;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let hw = 1.96 * (var / reps as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * hw / 1.96, "mean {mean} ± {hw}");
    }

    #[test]
    fn fixed_seed_reproduces_the_path() {
        let q = RateMatrix::from_fn(-10, 10, Boundary::Reflect, |_| [(1, 1.0), (-1, 1.5), (3, 0.2)]).unwrap();
        let a = sample_path(&q, 0, 5.0, 42).unwrap();
        let b = sample_path(&q, 0, 5.0, 42).unwrap();
        assert_eq!(a, b);
        assert!(!a.times.is_empty());
        assert!(a.times.windows(2).all(|w| w[0] < w[1]));
        assert!(a.states.iter().all(|&s| (-10..=10).contains(&s)));
        assert_ne!(a, sample_path(&q, 0, 5.0, 43).unwrap());
    }

    #[test]
    fn killing_ends_the_path() {
        let q = RateMatrix::from_fn(0, 0, Boundary::Kill, |_| [(1, 5.0)]).unwrap();
        let p = sample_path(&q, 0, 100.0, 1).unwrap();
        assert!(p.killed());
        assert_eq!(p.state_at(100.0), None);
        assert_eq!(p.state_at(0.0), Some(0));
    }

    #[test]
    fn start_outside_window_is_rejected() {
        let q = RateMatrix::new(0, 5, Boundary::Kill).unwrap();
        assert!(sample_path(&q, 9, 1.0, 0).is_err());
    }

    #[test]
    fn trace_csv() {
        let q = RateMatrix::from_fn(0, 3, Boundary::Absorb, |_| [(-1, 1.0)]).unwrap();
        let p = sample_path(&q, 1, 1e9, 3).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.ends_with(",0\n"));
    }
}
