//! Virtual-processor-grid simulator and analytic cost model for
//! communication-avoiding triangular solves with multiple right-hand sides.
//!
//! The simulator executes the parallel algorithms on real matrix data held
//! as per-rank tiles, charging alpha-beta-gamma costs to every participant
//! of each superstep; the cost model evaluates the same charge formulas by
//! unrolling the algorithms' recurrences, so the two sides can be compared
//! exactly. A tuner selects processor-grid shapes and block sizes from the
//! closed-form optima.

pub mod collectives;
pub mod costmodel;
pub mod costs;
pub mod error;
pub mod gen;
pub mod grid;
pub mod layout;
pub mod machine;
pub mod matfile;
pub mod matmul;
pub mod matrix;
pub mod sim;
pub mod triinv;
pub mod trsm;

pub use error::{Error, Result};
pub use grid::{grid_shape_2d, AxisSel, Grid};
pub use layout::{DistMatrix, Layout, MatShape};
pub use machine::{step, CostLedger, CostVector, MachineParams, Rank};
pub use matrix::Matrix;
pub use sim::Simulator;
