//! Cost primitives: machine parameters, cost vectors, and the per-processor
//! ledger whose maximum weighted entry is the simulated critical path.

use std::fmt;
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};

/// Scalar machine costs: seconds per message, per word, per flop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MachineParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "machine parameter {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// Counts messages only.
    pub fn latency_only() -> Self {
        Self { alpha: 1.0, beta: 0.0, gamma: 0.0 }
    }

    /// Counts words only.
    pub fn bandwidth_only() -> Self {
        Self { alpha: 0.0, beta: 1.0, gamma: 0.0 }
    }

    /// Counts flops only.
    pub fn compute_only() -> Self {
        Self { alpha: 0.0, beta: 0.0, gamma: 1.0 }
    }

    /// Default parameters used to render model costs into a single time when
    /// the caller does not supply its own: latency-dominant, with per-word and
    /// per-flop costs three and seven orders of magnitude cheaper.
    pub fn reference() -> Self {
        Self { alpha: 1.0e4, beta: 1.0, gamma: 1.0e-3 }
    }
}

/// The unit step: 1 for x > 1, else 0. Communication terms are multiplied by
/// `step(p)` so that single-participant collectives cost nothing.
pub fn step(x: f64) -> f64 {
    debug_assert!(x.is_finite());
    if x > 1.0 {
        1.0
    } else {
        0.0
    }
}

/// Accumulated (messages, words, flops) for one virtual processor.
///
/// Message counts stay integral in the simulator; words and flops are reals
/// because cost evaluation can produce fractional block sizes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostVector {
    pub s: f64,
    pub w: f64,
    pub f: f64,
}

impl CostVector {
    pub const ZERO: CostVector = CostVector { s: 0.0, w: 0.0, f: 0.0 };

    pub fn new(s: f64, w: f64, f: f64) -> Self {
        Self { s, w, f }
    }

    pub fn is_zero(&self) -> bool {
        self.s == 0.0 && self.w == 0.0 && self.f == 0.0
    }

    /// Componentwise maximum.
    pub fn max(&self, other: &CostVector) -> CostVector {
        CostVector {
            s: self.s.max(other.s),
            w: self.w.max(other.w),
            f: self.f.max(other.f),
        }
    }

    /// Weighted time under the given machine.
    pub fn time(&self, m: &MachineParams) -> f64 {
        m.alpha * self.s + m.beta * self.w + m.gamma * self.f
    }

    pub fn scaled(&self, by: f64) -> CostVector {
        CostVector { s: self.s * by, w: self.w * by, f: self.f * by }
    }
}

impl Add for CostVector {
    type Output = CostVector;
    fn add(self, rhs: CostVector) -> CostVector {
        CostVector { s: self.s + rhs.s, w: self.w + rhs.w, f: self.f + rhs.f }
    }
}

impl AddAssign for CostVector {
    fn add_assign(&mut self, rhs: CostVector) {
        self.s += rhs.s;
        self.w += rhs.w;
        self.f += rhs.f;
    }
}

impl fmt::Display for CostVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(S={}, W={}, F={})", self.s, self.w, self.f)
    }
}

/// A virtual processor rank in the simulated world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank(pub usize);

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Per-rank accumulated cost. Charges only ever increase entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CostLedger {
    per_proc: Vec<CostVector>,
}

impl CostLedger {
    pub fn new(world: usize) -> Self {
        Self { per_proc: vec![CostVector::ZERO; world] }
    }

    pub fn world(&self) -> usize {
        self.per_proc.len()
    }

    pub fn get(&self, rank: Rank) -> Option<&CostVector> {
        self.per_proc.get(rank.0)
    }

    /// Adds `c` to every rank in `ranks`. Ranks outside the world are a
    /// configuration error.
    pub fn charge<I>(&mut self, ranks: I, c: CostVector) -> Result<()>
    where
        I: IntoIterator<Item = Rank>,
    {
        debug_assert!(c.s >= 0.0 && c.w >= 0.0 && c.f >= 0.0);
        for r in ranks {
            match self.per_proc.get_mut(r.0) {
                Some(entry) => *entry += c,
                None => {
                    return Err(Error::UnknownRank { rank: r.0, world: self.per_proc.len() });
                }
            }
        }
        Ok(())
    }

    /// Maximum weighted time over ranks, with the maximizing rank's cost
    /// vector. Ties break toward the lowest rank.
    pub fn critical_path(&self, m: &MachineParams) -> Result<(f64, Rank, CostVector)> {
        if self.per_proc.is_empty() {
            return Err(Error::EmptyLedger);
        }
        let mut best = (self.per_proc[0].time(m), Rank(0), self.per_proc[0]);
        for (i, c) in self.per_proc.iter().enumerate().skip(1) {
            let t = c.time(m);
            if t > best.0 {
                best = (t, Rank(i), *c);
            }
        }
        Ok(best)
    }

    /// Componentwise maximum over all ranks. This is the per-processor
    /// leading cost the analytic model predicts.
    pub fn max_combine(&self) -> CostVector {
        self.per_proc
            .iter()
            .fold(CostVector::ZERO, |acc, c| acc.max(c))
    }

    /// Componentwise sum over all ranks (total volume, not critical path).
    pub fn sum(&self) -> CostVector {
        self.per_proc
            .iter()
            .fold(CostVector::ZERO, |acc, c| acc + *c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_matches_definition() {
        assert_eq!(step(2.0), 1.0);
        assert_eq!(step(1.0), 0.0);
        assert_eq!(step(0.5), 0.0);
        // idempotent on its own outputs, monotone
        assert_eq!(step(step(2.0)), 0.0); // step(1) = 0
        assert_eq!(step(step(0.5)), 0.0);
        let xs = [-1.0, 0.0, 0.5, 1.0, 1.0000001, 2.0, 100.0];
        for w in xs.windows(2) {
            assert!(step(w[0]) <= step(w[1]));
        }
    }

    #[test]
    fn charge_accumulates() {
        let mut led = CostLedger::new(1);
        led.charge([Rank(0)], CostVector::new(1.0, 8.0, 0.0)).unwrap();
        assert_eq!(*led.get(Rank(0)).unwrap(), CostVector::new(1.0, 8.0, 0.0));
        led.charge([Rank(0)], CostVector::new(2.0, 4.0, 8.0)).unwrap();
        // sequential charges (1,4,0)+(2,4,8) style: componentwise sum
        led.charge([Rank(0)], CostVector::ZERO).unwrap();
        assert_eq!(*led.get(Rank(0)).unwrap(), CostVector::new(3.0, 12.0, 8.0));
    }

    #[test]
    fn charge_unknown_rank_is_config_error() {
        let mut led = CostLedger::new(2);
        let err = led.charge([Rank(2)], CostVector::new(1.0, 0.0, 0.0)).unwrap_err();
        match err {
            Error::UnknownRank { rank: 2, world: 2 } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn disjoint_charges_max_combine_not_sum() {
        let mut led = CostLedger::new(2);
        led.charge([Rank(0)], CostVector::new(1.0, 0.0, 0.0)).unwrap();
        led.charge([Rank(1)], CostVector::new(1.0, 0.0, 0.0)).unwrap();
        // parallel branches: critical path sees one message, not two
        assert_eq!(led.max_combine().s, 1.0);
        let (t, _, _) = led.critical_path(&MachineParams::latency_only()).unwrap();
        assert_eq!(t, 1.0);
    }

    #[test]
    fn critical_path_picks_max_and_breaks_ties_low() {
        let mut led = CostLedger::new(2);
        led.charge([Rank(0)], CostVector::new(2.0, 10.0, 0.0)).unwrap();
        led.charge([Rank(1)], CostVector::new(1.0, 100.0, 0.0)).unwrap();
        let m = MachineParams::new(1.0, 1.0, 1.0).unwrap();
        let (t, r, c) = led.critical_path(&m).unwrap();
        assert_eq!(t, 101.0);
        assert_eq!(r, Rank(1));
        assert_eq!(c, CostVector::new(1.0, 100.0, 0.0));

        // all ranks equal: lowest rank wins the tie, time identical
        let mut led = CostLedger::new(3);
        for i in 0..3 {
            led.charge([Rank(i)], CostVector::new(3.0, 1024.0, 0.0)).unwrap();
        }
        let (t, r, _) = led.critical_path(&MachineParams::latency_only()).unwrap();
        assert_eq!(t, 3.0);
        assert_eq!(r, Rank(0));
    }

    #[test]
    fn critical_path_empty_ledger_errors() {
        let led = CostLedger::new(0);
        assert!(matches!(
            led.critical_path(&MachineParams::reference()),
            Err(Error::EmptyLedger)
        ));
    }

    #[test]
    fn unit_machines_extract_components() {
        let mut led = CostLedger::new(3);
        led.charge([Rank(0)], CostVector::new(7.0, 1.0, 2.0)).unwrap();
        led.charge([Rank(1)], CostVector::new(1.0, 9.0, 3.0)).unwrap();
        led.charge([Rank(2)], CostVector::new(2.0, 1.0, 11.0)).unwrap();
        let (s, _, _) = led.critical_path(&MachineParams::latency_only()).unwrap();
        let (w, _, _) = led.critical_path(&MachineParams::bandwidth_only()).unwrap();
        let (f, _, _) = led.critical_path(&MachineParams::compute_only()).unwrap();
        assert_eq!((s, w, f), (7.0, 9.0, 11.0));
    }

    #[test]
    fn critical_path_monotone_under_charges() {
        let m = MachineParams::new(2.0, 0.5, 0.25).unwrap();
        let mut led = CostLedger::new(4);
        let mut last = 0.0;
        for i in 0..16 {
            led.charge([Rank(i % 4)], CostVector::new(1.0, (i % 3) as f64, 0.5)).unwrap();
            let (t, _, _) = led.critical_path(&m).unwrap();
            assert!(t >= last);
            last = t;
        }
    }
}
