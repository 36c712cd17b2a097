use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{EigenphaseTable, Pair};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::flow::{Branch, UnitaryFamily};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyOptions {
    pub initial_points: usize,
    /// bisection levels allowed below the initial spacing
    pub max_depth: u32,
    /// largest branch motion tolerated between neighbouring energies
    pub max_step: f64,
    pub execution: Execution,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            initial_points: 16,
            max_depth: 40,
            max_step: 0.5 * PI,
            execution: Execution::Parallel,
        }
    }
}

/// Tables of one pair on an adaptively refined energy grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SMatrixFamily {
    pub pair: Pair,
    pub grid: Vec<f64>,
    pub tables: Vec<EigenphaseTable>,
    pub depth: u32,
}

fn branch_value(t: &EigenphaseTable, ell: u32) -> f64 {
    t.entry(ell).map_or(0.0, |e| e.theta)
}

/// Largest change of any branch between two tables; channels absent from one
/// side count as phase 0.
pub(crate) fn max_branch_step(a: &EigenphaseTable, b: &EigenphaseTable) -> f64 {
    let top = a.l_max.max(b.l_max);
    (0..=top)
        .map(|l| (branch_value(a, l) - branch_value(b, l)).abs())
        .fold(0.0, f64::max)
}

impl SMatrixFamily {
    /// Evaluates `eval` on a uniform grid over [e_lo, e_hi] and bisects every
    /// interval across which some branch moves by `max_step` or more.
    pub fn build<F>(pair: Pair, e_lo: f64, e_hi: f64, eval: F, opts: &FamilyOptions) -> Result<Self>
    where
        F: Fn(f64) -> Result<EigenphaseTable> + Sync + Send,
    {
        if !(e_lo < e_hi && e_lo > 0.0) {
            return Err(Error::Domain(format!(
                "energy window [{e_lo}, {e_hi}] is empty or not positive"
            )));
        }
        let n = opts.initial_points.max(2);
        let grid0: Vec<f64> = (0..n)
            .map(|i| e_lo + (e_hi - e_lo) * i as f64 / (n - 1) as f64)
            .collect();
        Self::build_on_grid(pair, grid0, eval, opts)
    }

    /// As [`SMatrixFamily::build`] with a caller-supplied initial grid.
    pub fn build_on_grid<F>(
        pair: Pair,
        grid0: Vec<f64>,
        eval: F,
        opts: &FamilyOptions,
    ) -> Result<Self>
    where
        F: Fn(f64) -> Result<EigenphaseTable> + Sync + Send,
    {
        if grid0.len() < 2 || grid0.windows(2).any(|w| !(w[1] > w[0])) || !(grid0[0] > 0.0) {
            return Err(Error::Domain(
                "initial energy grid must be positive and strictly increasing".into(),
            ));
        }
        let tables0 = exec::try_map(opts.execution, &grid0, |&e| eval(e))?;
        let mut pts: Vec<(f64, EigenphaseTable, u32)> = grid0
            .into_iter()
            .zip(tables0)
            .map(|(e, t)| (e, t, 0))
            .collect();
        let mut depth = 0;
        loop {
            let bad: Vec<usize> = (0..pts.len() - 1)
                .filter(|&i| max_branch_step(&pts[i].1, &pts[i + 1].1) >= opts.max_step)
                .collect();
            if bad.is_empty() {
                break;
            }
            let level = bad
                .iter()
                .map(|&i| pts[i].2.max(pts[i + 1].2))
                .max()
                .unwrap_or(0)
                + 1;
            if level > opts.max_depth {
                let i = bad[0];
                return Err(Error::Resolution(format!(
                    "{pair}: branch step {:.3} still >= {:.3} on [{:.15e}, {:.15e}] after {} bisections",
                    max_branch_step(&pts[i].1, &pts[i + 1].1),
                    opts.max_step,
                    pts[i].0,
                    pts[i + 1].0,
                    opts.max_depth
                )));
            }
            let mids: Vec<(f64, u32)> = bad
                .iter()
                .map(|&i| {
                    (
                        0.5 * (pts[i].0 + pts[i + 1].0),
                        pts[i].2.max(pts[i + 1].2) + 1,
                    )
                })
                .collect();
            let new = exec::try_map(opts.execution, &mids, |&(e, _)| eval(e))?;
            for ((e, lvl), t) in mids.into_iter().zip(new) {
                depth = depth.max(lvl);
                pts.push((e, t, lvl));
            }
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let (grid, tables): (Vec<f64>, Vec<EigenphaseTable>) =
            pts.into_iter().map(|(e, t, _)| (e, t)).unzip();
        Ok(SMatrixFamily {
            pair,
            grid,
            tables,
            depth,
        })
    }

    /// Weighted phase branches, one per channel, on the energy grid.
    pub fn branches(&self) -> Vec<Branch> {
        let top = self.tables.iter().map(|t| t.l_max).max().unwrap_or(0);
        (0..=top)
            .map(|l| {
                let weight = self
                    .tables
                    .iter()
                    .find_map(|t| t.entry(l).map(|e| e.weight))
                    .unwrap_or(1);
                Branch {
                    label: l,
                    weight,
                    values: self.tables.iter().map(|t| branch_value(t, l)).collect(),
                }
            })
            .collect()
    }

    /// The family with E as the increasing parameter.
    pub fn unitary_family(&self) -> UnitaryFamily {
        UnitaryFamily::DiagonalBranches {
            grid: self.grid.clone(),
            branches: self.branches(),
        }
    }

    /// The family run from e_hi down to e_lo, reparametrised so the parameter increases.
    pub fn reversed_family(&self) -> UnitaryFamily {
        let grid: Vec<f64> = self.grid.iter().rev().map(|e| -e).collect();
        let branches = self
            .branches()
            .into_iter()
            .map(|mut b| {
                b.values.reverse();
                b
            })
            .collect();
        UnitaryFamily::DiagonalBranches { grid, branches }
    }
}
