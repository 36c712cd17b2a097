//! Channel eigenphases assembled into scattering-matrix tables for the pairs
//! (H, H0), (H^ext, H0) and (H, H^ext).

mod family;

pub use family::{FamilyOptions, SMatrixFamily};

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numerics::linalg::{chord, principal_angle, TWO_PI};
use crate::potential::{Dimension, PotentialTriple, RadialPotential};
use crate::radial::{
    channel_cutoff, channel_phases, phase_shift, BsKernels, Channel, Perturbation, SolverOptions,
    StationaryBase, StationaryResult,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pair {
    #[serde(rename = "H,H0")]
    HH0,
    #[serde(rename = "Hext,H0")]
    HextH0,
    #[serde(rename = "H,Hext")]
    HHext,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::HH0, Pair::HextH0, Pair::HHext];
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pair::HH0 => "H,H0",
            Pair::HextH0 => "Hext,H0",
            Pair::HHext => "H,Hext",
        })
    }
}

impl std::str::FromStr for Pair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace(['(', ')', ' '], "").to_ascii_lowercase().as_str() {
            "h,h0" | "hh0" => Ok(Pair::HH0),
            "hext,h0" | "hexth0" => Ok(Pair::HextH0),
            "h,hext" | "hhext" => Ok(Pair::HHext),
            other => Err(Error::Config(format!("unknown pair '{other}'"))),
        }
    }
}

/// How many channels enter a table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmaxPolicy {
    /// first l whose barrier at the support radius tops 4E, plus `margin`
    Centrifugal {
        margin: u32,
    },
    Fixed(u32),
}

impl Default for LmaxPolicy {
    fn default() -> Self {
        LmaxPolicy::Centrifugal { margin: 5 }
    }
}

impl LmaxPolicy {
    pub fn l_max(&self, dimension: Dimension, energy: f64, hbar: f64, radius: f64) -> Result<u32> {
        match *self {
            LmaxPolicy::Fixed(l) => Ok(l),
            LmaxPolicy::Centrifugal { margin } => {
                Ok(channel_cutoff(dimension, energy, hbar, radius)? - 5 + margin)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub ell: u32,
    pub weight: u32,
    /// continuous branch of the eigenphase (2 delta)
    pub theta: f64,
    /// theta mod 2 pi in [0, 2 pi)
    pub theta_mod: f64,
}

impl PhaseEntry {
    pub fn new(ell: u32, weight: u32, theta: f64) -> Self {
        PhaseEntry {
            ell,
            weight,
            theta,
            theta_mod: principal_angle(theta),
        }
    }
}

/// Eigenphases of S(E) for one pair, one entry per channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenphaseTable {
    pub energy: f64,
    pub hbar: f64,
    pub dimension: Dimension,
    pub pair: Pair,
    pub l_max: u32,
    /// sorted by l
    pub entries: Vec<PhaseEntry>,
    /// w times the angular distance from 1 of the first channel left out
    pub tail_bound: f64,
    /// largest |2 delta_V - 2 delta_ext - 2 Delta| over channels (zero for tables without a triple)
    pub chain_defect: f64,
}

impl EigenphaseTable {
    pub fn max_weighted_phase(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.weight as f64 * e.theta.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_phase(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.theta.abs())
            .fold(0.0, f64::max)
    }

    pub fn weighted_phase_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.weight as f64 * e.theta).sum()
    }

    pub fn entry(&self, ell: u32) -> Option<&PhaseEntry> {
        self.entries
            .binary_search_by_key(&ell, |e| e.ell)
            .ok()
            .map(|i| &self.entries[i])
    }

    fn check_invariants(&self) -> Result<()> {
        for w in self.entries.windows(2) {
            if w[1].ell <= w[0].ell {
                return Err(Error::Structural("table entries not sorted by l".into()));
            }
        }
        for e in &self.entries {
            if e.weight == 0 {
                return Err(Error::Structural(format!("zero weight at l = {}", e.ell)));
            }
            let d = (e.theta - e.theta_mod).rem_euclid(TWO_PI);
            if d.min(TWO_PI - d) > 1e-12 * e.theta.abs().max(1.0) {
                return Err(Error::Structural(format!(
                    "principal value inconsistent at l = {}",
                    e.ell
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AssemblyOptions {
    pub l_max: LmaxPolicy,
    pub solver: SolverOptions,
    pub execution: Execution,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            l_max: LmaxPolicy::default(),
            solver: SolverOptions::default(),
            execution: Execution::Parallel,
        }
    }
}

/// The three tables at one energy. The (H, H0) branch is 2 delta_ext + 2 Delta
/// with Delta from the Wronskian formula, so pair differences keep full
/// relative precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSet {
    pub hh0: EigenphaseTable,
    pub hext_h0: EigenphaseTable,
    pub h_hext: EigenphaseTable,
}

impl TableSet {
    pub fn get(&self, pair: Pair) -> &EigenphaseTable {
        match pair {
            Pair::HH0 => &self.hh0,
            Pair::HextH0 => &self.hext_h0,
            Pair::HHext => &self.h_hext,
        }
    }
}

/// Angular distance of e^{i theta} from 1.
fn off_identity(theta: f64) -> f64 {
    let p = principal_angle(theta);
    p.min(TWO_PI - p)
}

fn support_radius(v: &RadialPotential) -> f64 {
    v.support_radius()
        .max(v.breakpoints().last().copied().unwrap_or(0.0))
        .max(1e-3)
}

pub fn assemble_all(
    triple: &PotentialTriple,
    energy: f64,
    hbar: f64,
    opts: &AssemblyOptions,
) -> Result<TableSet> {
    if !(energy > 0.0) {
        return Err(Error::Domain(format!(
            "scattering energy must be positive, got {energy}"
        )));
    }
    let dim = triple.dimension;
    let radius = support_radius(triple.v()).max(support_radius(triple.v_ext()));
    let l_max = opts.l_max.l_max(dim, energy, hbar, radius)?;
    let phases = exec::try_map_range(opts.execution, (l_max + 2) as usize, |l| {
        channel_phases(
            triple,
            Channel::new(dim, l as u32),
            energy,
            hbar,
            &opts.solver,
        )
    })?;
    let (kept, tail) = phases.split_at(l_max as usize + 1);
    let t = &tail[0];
    let w_tail = t.channel.weight() as f64;
    let mut chain: f64 = 0.0;
    let mut e_hh0 = Vec::with_capacity(kept.len());
    let mut e_ext = Vec::with_capacity(kept.len());
    let mut e_diff = Vec::with_capacity(kept.len());
    for p in kept {
        let (l, w) = (p.channel.ell, p.channel.weight());
        let th_ext = 2.0 * p.delta_ext;
        let th_diff = 2.0 * p.delta_diff;
        chain = chain.max(2.0 * p.consistency);
        e_hh0.push(PhaseEntry::new(l, w, th_ext + th_diff));
        e_ext.push(PhaseEntry::new(l, w, th_ext));
        e_diff.push(PhaseEntry::new(l, w, th_diff));
    }
    let mk = |pair, entries, tail_bound| EigenphaseTable {
        energy,
        hbar,
        dimension: dim,
        pair,
        l_max,
        entries,
        tail_bound,
        chain_defect: chain,
    };
    let set = TableSet {
        hh0: mk(Pair::HH0, e_hh0, w_tail * off_identity(2.0 * t.delta_v)),
        hext_h0: mk(
            Pair::HextH0,
            e_ext,
            w_tail * off_identity(2.0 * t.delta_ext),
        ),
        h_hext: mk(
            Pair::HHext,
            e_diff,
            w_tail * off_identity(2.0 * t.delta_diff),
        ),
    };
    set.hh0.check_invariants()?;
    Ok(set)
}

/// Table for one pair of the triple.
pub fn assemble(
    triple: &PotentialTriple,
    pair: Pair,
    energy: f64,
    hbar: f64,
    opts: &AssemblyOptions,
) -> Result<EigenphaseTable> {
    let set = assemble_all(triple, energy, hbar, opts)?;
    Ok(match pair {
        Pair::HH0 => set.hh0,
        Pair::HextH0 => set.hext_h0,
        Pair::HHext => set.h_hext,
    })
}

/// Table of the pair (H0 + V, H0) for a potential without a triple.
pub fn assemble_potential(
    v: &RadialPotential,
    dimension: Dimension,
    energy: f64,
    hbar: f64,
    opts: &AssemblyOptions,
) -> Result<EigenphaseTable> {
    let l_max = opts
        .l_max
        .l_max(dimension, energy, hbar, support_radius(v))?;
    let phases = exec::try_map_range(opts.execution, (l_max + 2) as usize, |l| {
        phase_shift(
            v,
            Channel::new(dimension, l as u32),
            energy,
            hbar,
            &opts.solver,
        )
    })?;
    let entries: Vec<PhaseEntry> = phases[..=l_max as usize]
        .iter()
        .map(|p| PhaseEntry::new(p.channel.ell, p.channel.weight(), 2.0 * p.delta))
        .collect();
    let t = &phases[l_max as usize + 1];
    Ok(EigenphaseTable {
        energy,
        hbar,
        dimension,
        pair: Pair::HH0,
        l_max,
        entries,
        tail_bound: t.channel.weight() as f64 * off_identity(2.0 * t.delta),
        chain_defect: 0.0,
    })
}

fn same_channels(t1: &EigenphaseTable, t2: &EigenphaseTable) -> Result<()> {
    let same = t1.dimension == t2.dimension
        && t1.entries.len() == t2.entries.len()
        && t1
            .entries
            .iter()
            .zip(&t2.entries)
            .all(|(a, b)| a.ell == b.ell && a.weight == b.weight);
    if same {
        Ok(())
    } else {
        Err(Error::Structural(format!(
            "channel sets differ ({} vs {} entries)",
            t1.entries.len(),
            t2.entries.len()
        )))
    }
}

/// ||S1 - S2|| for two tables diagonal in the same channel basis.
pub fn op_norm_diff(t1: &EigenphaseTable, t2: &EigenphaseTable) -> Result<f64> {
    same_channels(t1, t2)?;
    Ok(t1
        .entries
        .iter()
        .zip(&t2.entries)
        .map(|(a, b)| chord(a.theta, b.theta))
        .fold(0.0, f64::max))
}

/// ||S1 - S2|| with channels missing from one table treated as trivial.
pub fn op_norm_diff_padded(t1: &EigenphaseTable, t2: &EigenphaseTable) -> Result<f64> {
    if t1.dimension != t2.dimension {
        return Err(Error::Structural("tables of different dimension".into()));
    }
    let l_top = t1.l_max.max(t2.l_max);
    let mut d: f64 = 0.0;
    for l in 0..=l_top {
        let a = t1.entry(l).map_or(0.0, |e| e.theta);
        let b = t2.entry(l).map_or(0.0, |e| e.theta);
        d = d.max(chord(a, b));
    }
    Ok(d)
}

/// ||S - I||.
pub fn s_minus_identity(t: &EigenphaseTable) -> f64 {
    t.entries
        .iter()
        .map(|e| chord(e.theta, 0.0))
        .fold(0.0, f64::max)
}

/// Both sides of ||S(E; H, H^ext) - I|| <= 2 a^{-1} ||B|| (1 + a^{-2} ||B||^2)^{-1/2}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    /// None when a = dist(1, sigma(A)) vanishes to tolerance
    pub rhs: Option<f64>,
    pub a_gap: f64,
    pub b_norm: f64,
    pub holds: bool,
}

pub fn s_matrix_bound(b_norm: f64, a_gap: f64) -> Option<f64> {
    if a_gap <= 1e-12 {
        return None;
    }
    let x = b_norm / a_gap;
    Some(2.0 * x / (1.0 + x * x).sqrt())
}

/// Bound check per channel and for the full operator (a = min over channels, ||B|| = max).
pub fn bound_check(table: &EigenphaseTable, kernels: &[BsKernels]) -> Result<BoundCheck> {
    if table.pair != Pair::HHext {
        return Err(Error::Structural(format!(
            "bound check needs the (H,Hext) table, got {}",
            table.pair
        )));
    }
    let mut a_gap = f64::INFINITY;
    let mut b_norm: f64 = 0.0;
    let mut per_channel_ok = true;
    for k in kernels {
        let e = table.entry(k.channel.ell).ok_or_else(|| {
            Error::Structural(format!("no table entry for l = {}", k.channel.ell))
        })?;
        let g = k.a_gap();
        a_gap = a_gap.min(g);
        b_norm = b_norm.max(k.b_norm);
        if let Some(r) = s_matrix_bound(k.b_norm, g) {
            per_channel_ok &= chord(e.theta, 0.0) <= r * (1.0 + 1e-6) + 1e-12;
        }
    }
    let lhs = s_minus_identity(table);
    let rhs = s_matrix_bound(b_norm, a_gap);
    let holds = per_channel_ok && rhs.is_none_or(|r| lhs <= r * (1.0 + 1e-6) + 1e-12);
    Ok(BoundCheck {
        lhs,
        rhs,
        a_gap,
        b_norm,
        holds,
    })
}

/// Weighted count of principal eigenphases in [theta1, theta2), negated for
/// theta1 > theta2.
pub fn arc_count(t: &EigenphaseTable, theta1: f64, theta2: f64) -> i64 {
    let phases: Vec<(f64, u32)> = t.entries.iter().map(|e| (e.theta_mod, e.weight)).collect();
    crate::flow::count_phases_on_arc(&phases, theta1, theta2)
}

/// ||S(E1) - S(E2)|| / |E1 - E2|^gamma.
pub fn hoelder_ratio(t1: &EigenphaseTable, t2: &EigenphaseTable, gamma: f64) -> Result<f64> {
    if t1.energy == t2.energy {
        return Err(Error::Precondition("Hoelder ratio needs E1 != E2".into()));
    }
    if t1.pair != t2.pair {
        return Err(Error::Structural("tables of different pairs".into()));
    }
    Ok(op_norm_diff_padded(t1, t2)? / (t1.energy - t2.energy).abs().powf(gamma))
}

/// Hoelder ratio for a pair of the triple evaluated at E1 and E2.
pub fn hoelder_scan(
    triple: &PotentialTriple,
    pair: Pair,
    e1: f64,
    e2: f64,
    hbar: f64,
    gamma: f64,
    opts: &AssemblyOptions,
) -> Result<f64> {
    if e1 == e2 {
        return Err(Error::Precondition("Hoelder ratio needs E1 != E2".into()));
    }
    let t1 = assemble(triple, pair, e1, hbar, opts)?;
    let t2 = assemble(triple, pair, e2, hbar, opts)?;
    hoelder_ratio(&t1, &t2, gamma)
}

/// Channel value of S(E) for a pair through the stationary representation.
pub fn stationary_channel(
    triple: &PotentialTriple,
    pair: Pair,
    channel: Channel,
    energy: f64,
    hbar: f64,
    opts: &crate::radial::KernelOptions,
) -> Result<StationaryResult> {
    let v = triple.v();
    let ve = triple.v_ext();
    match pair {
        Pair::HH0 => {
            let f = |r: f64| v.value(r);
            let w = Perturbation {
                value: &f,
                support: support_radius(v),
                breakpoints: v.breakpoints().to_vec(),
            };
            crate::radial::stationary_smatrix(channel, StationaryBase::Free, &w, energy, hbar, opts)
        }
        Pair::HextH0 => {
            let f = |r: f64| ve.value(r);
            let w = Perturbation {
                value: &f,
                support: support_radius(ve),
                breakpoints: ve.breakpoints().to_vec(),
            };
            crate::radial::stationary_smatrix(channel, StationaryBase::Free, &w, energy, hbar, opts)
        }
        Pair::HHext => {
            let f = |r: f64| -triple.v0(r);
            let w = Perturbation {
                value: &f,
                support: triple.v0_support(),
                breakpoints: triple.v0_breakpoints(),
            };
            crate::radial::stationary_smatrix(
                channel,
                StationaryBase::Potential(ve),
                &w,
                energy,
                hbar,
                opts,
            )
        }
    }
}

/// Long-format CSV: E, ell, w, theta_branch, theta_mod2pi, pair.
pub fn write_csv<W: Write>(tables: &[EigenphaseTable], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["E", "ell", "w", "theta_branch", "theta_mod2pi", "pair"])?;
    let mut sorted: Vec<&EigenphaseTable> = tables.iter().collect();
    sorted.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.pair.cmp(&b.pair)));
    for t in sorted {
        for e in &t.entries {
            wtr.write_record([
                format!("{:.17e}", t.energy),
                e.ell.to_string(),
                e.weight.to_string(),
                format!("{:.17e}", e.theta),
                format!("{:.17e}", e.theta_mod),
                t.pair.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn table(entries: &[(u32, u32, f64)]) -> EigenphaseTable {
        EigenphaseTable {
            energy: 1.0,
            hbar: 0.1,
            dimension: Dimension::Three,
            pair: Pair::HH0,
            l_max: entries.len() as u32 - 1,
            entries: entries
                .iter()
                .map(|&(l, w, t)| PhaseEntry::new(l, w, t))
                .collect(),
            tail_bound: 0.0,
            chain_defect: 0.0,
        }
    }

    #[test]
    fn arc_count_with_weights_and_reversal() {
        let t = table(&[(0, 1, PI / 2.0), (1, 3, PI)]);
        assert_eq!(arc_count(&t, PI / 4.0, 1.5 * PI), 4);
        assert_eq!(arc_count(&t, 1.5 * PI, PI / 4.0), -4);
    }

    #[test]
    fn norm_of_antipodal_phases_is_two() {
        let a = table(&[(0, 1, 0.0)]);
        let b = table(&[(0, 1, PI)]);
        assert!((op_norm_diff(&a, &b).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(op_norm_diff(&a, &a).unwrap(), 0.0);
        let c = table(&[(0, 1, 0.0), (1, 3, 0.0)]);
        assert!(matches!(op_norm_diff(&a, &c), Err(Error::Structural(_))));
    }

    #[test]
    fn pair_names_round_trip() {
        for p in Pair::ALL {
            assert_eq!(p.to_string().parse::<Pair>().unwrap(), p);
        }
    }

    #[test]
    fn csv_has_fixed_columns() {
        let t = table(&[(0, 1, 0.25), (1, 3, -0.5)]);
        let mut buf = Vec::new();
        write_csv(&[t], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(
            lines.next().unwrap(),
            "E,ell,w,theta_branch,theta_mod2pi,pair"
        );
        assert!(lines
            .next()
            .unwrap()
            .starts_with("1.00000000000000000e0,0,1,2.50000000000000000e-1"));
    }
}
