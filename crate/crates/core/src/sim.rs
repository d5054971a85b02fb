//! The simulation context: a world of virtual ranks plus a phased cost
//! ledger. Algorithms execute supersteps that move tile data between ranks
//! and charge every participant the closed-form cost of the collective.

use crate::error::Result;
use crate::grid::Grid;
use crate::machine::{CostLedger, CostVector, MachineParams, Rank};

#[derive(Debug, Clone)]
pub struct Simulator {
    world: usize,
    total: CostLedger,
    phases: Vec<(String, CostLedger)>,
    current: Option<usize>,
}

impl Simulator {
    pub fn new(world: usize) -> Self {
        Self {
            world,
            total: CostLedger::new(world),
            phases: Vec::new(),
            current: None,
        }
    }

    pub fn world(&self) -> usize {
        self.world
    }

    /// Routes subsequent charges to the named accounting phase (created on
    /// first use, re-entered on repeats) as well as to the run total.
    pub fn begin_phase(&mut self, name: &str) {
        if let Some(i) = self.phases.iter().position(|(n, _)| n == name) {
            self.current = Some(i);
        } else {
            self.phases.push((name.to_string(), CostLedger::new(self.world)));
            self.current = Some(self.phases.len() - 1);
        }
    }

    pub fn charge_ranks<I>(&mut self, ranks: I, c: CostVector) -> Result<()>
    where
        I: IntoIterator<Item = Rank> + Clone,
    {
        if c.is_zero() {
            return Ok(());
        }
        if let Some(i) = self.current {
            self.phases[i].1.charge(ranks.clone(), c)?;
        }
        self.total.charge(ranks, c)
    }

    /// Charges every rank of a grid or slice.
    pub fn charge_grid(&mut self, grid: &Grid, c: CostVector) -> Result<()> {
        self.charge_ranks(grid.ranks().iter().copied(), c)
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.total
    }

    /// Critical-path cost vector: the componentwise maximum over ranks.
    pub fn total(&self) -> CostVector {
        self.total.max_combine()
    }

    pub fn critical_path(&self, m: &MachineParams) -> Result<(f64, Rank, CostVector)> {
        self.total.critical_path(m)
    }

    /// Per-phase critical-path cost vectors in execution order.
    pub fn phase_totals(&self) -> Vec<(String, CostVector)> {
        self.phases
            .iter()
            .map(|(name, ledger)| (name.clone(), ledger.max_combine()))
            .collect()
    }
}
