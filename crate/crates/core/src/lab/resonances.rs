use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::config::EnergyWindow;
use crate::error::{Error, Result};
use crate::flow::THETA_EPS;
use crate::numerics::linalg::TWO_PI;
use crate::potential::PotentialTriple;
use crate::radial::{bound_states, BoundStateList, BoundStateOptions, Channel};
use crate::scattering::{assemble, AssemblyOptions, EigenphaseTable, Pair};

/// An eigenvalue of H^int inside the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantEnergy {
    pub energy: f64,
    pub multiplicity: u32,
    pub channels: Vec<u32>,
    /// distance to the nearest other interior eigenvalue
    pub isolation: f64,
    pub hbar: f64,
}

const CHANNEL_BATCH: u32 = 8;

/// Interior spectrum below `e_cut` over every channel that has a state there.
/// Channels are added in batches until a whole batch comes back empty; the
/// lowest level of a channel rises with l.
pub fn interior_spectrum(
    triple: &PotentialTriple,
    hbar: f64,
    e_cut: f64,
    opts: &BoundStateOptions,
) -> Result<BoundStateList> {
    let dim = triple.dimension;
    let mut start = 0u32;
    let mut all: Option<BoundStateList> = None;
    loop {
        let chs: Vec<Channel> = (start..start + CHANNEL_BATCH)
            .map(|l| Channel::new(dim, l))
            .collect();
        let part = bound_states(triple, hbar, &chs, e_cut, opts)?;
        let empty = part.is_empty();
        all = Some(match all {
            None => part,
            Some(mut acc) => {
                acc.states.extend(part.states);
                acc.orthonormality_residual = acc
                    .orthonormality_residual
                    .max(part.orthonormality_residual);
                acc
            }
        });
        if empty {
            break;
        }
        start += CHANNEL_BATCH;
        if start > 10_000 {
            return Err(Error::Truncation(format!(
                "interior states in channels beyond l = {start}"
            )));
        }
    }
    let mut list = all.expect("loop runs once");
    list.states.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.channel.ell.cmp(&b.channel.ell))
    });
    list.levels = merge_levels(&list, opts.coincidence_tol);
    Ok(list)
}

fn merge_levels(list: &BoundStateList, tol: f64) -> Vec<crate::radial::Level> {
    let mut levels: Vec<crate::radial::Level> = Vec::new();
    for s in &list.states {
        match levels.last_mut() {
            Some(last) if (s.energy - last.energy).abs() <= tol * s.energy.abs().max(1.0) => {
                last.multiplicity += s.channel.weight();
                last.channels.push(s.channel);
            }
            _ => levels.push(crate::radial::Level {
                energy: s.energy,
                multiplicity: s.channel.weight(),
                channels: vec![s.channel],
            }),
        }
    }
    levels
}

/// Interior eigenvalues in the window with multiplicities and isolation radii.
pub fn locate_resonances(
    triple: &PotentialTriple,
    hbar: f64,
    window: &EnergyWindow,
    opts: &BoundStateOptions,
) -> Result<Vec<ResonantEnergy>> {
    let list = interior_spectrum(triple, hbar, triple.options.e_plus, opts)?;
    Ok(resonances_from(&list, hbar, window, triple.options.e_plus))
}

pub fn resonances_from(
    list: &BoundStateList,
    hbar: f64,
    window: &EnergyWindow,
    e_plus: f64,
) -> Vec<ResonantEnergy> {
    let levels = &list.levels;
    levels
        .iter()
        .enumerate()
        .filter(|(_, l)| window.contains(l.energy))
        .map(|(i, l)| {
            let below = if i > 0 {
                l.energy - levels[i - 1].energy
            } else {
                l.energy
            };
            let above = levels
                .get(i + 1)
                .map_or(e_plus - l.energy, |n| n.energy - l.energy);
            ResonantEnergy {
                energy: l.energy,
                multiplicity: l.multiplicity,
                channels: l.channels.iter().map(|c| c.ell).collect(),
                isolation: below.min(above),
                hbar,
            }
        })
        .collect()
}

/// Lowest resonant energy with a state in channel `ell`.
pub fn lowest_in_channel(res: &[ResonantEnergy], ell: u32) -> Option<&ResonantEnergy> {
    res.iter().find(|r| r.channels.contains(&ell))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleArc {
    pub start: f64,
    pub end: f64,
}

impl AngleArc {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta > self.start && theta < self.end
    }

    pub fn middle(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleReport {
    pub energy: f64,
    pub hbar: f64,
    pub margin: f64,
    pub arcs: Vec<AngleArc>,
    /// total length of the arcs
    pub measure: f64,
    /// (l, principal eigenphase) of every channel
    pub eigenphases: Vec<(u32, f64)>,
}

impl AngleReport {
    pub fn contains(&self, theta: f64) -> bool {
        self.arcs.iter().any(|a| a.contains(theta))
    }

    /// `probe` itself when admissible, otherwise the middle of the widest arc.
    pub fn choose(&self, probe: f64) -> Option<f64> {
        if self.contains(probe) {
            return Some(probe);
        }
        self.arcs
            .iter()
            .max_by(|a, b| a.width().total_cmp(&b.width()))
            .map(|a| a.middle())
    }
}

/// Angular half-width of the exclusion for chord distance `margin`.
fn half_width(margin: f64) -> f64 {
    2.0 * (0.5 * margin).min(1.0).asin()
}

/// Arcs of (0, 2 pi) whose points lie farther than `margin` from every
/// eigenvalue of the table and from 1.
pub fn admissible_arcs(table: &EigenphaseTable, margin: f64) -> Result<AngleReport> {
    if !(margin > 0.0) {
        return Err(Error::Domain(format!(
            "angle margin must be positive, got {margin}"
        )));
    }
    let a = half_width(margin).max(THETA_EPS);
    if table.tail_bound > a {
        log::warn!(
            "E = {}: truncated channels may move eigenvalues by {:.3e}, beyond the margin {a:.3e}",
            table.energy,
            table.tail_bound
        );
    }
    let mut blocked: Vec<(f64, f64)> = vec![(-a, a), (TWO_PI - a, TWO_PI + a)];
    for e in &table.entries {
        let p = e.theta_mod;
        blocked.push((p - a, p + a));
        blocked.push((p - TWO_PI - a, p - TWO_PI + a));
        blocked.push((p + TWO_PI - a, p + TWO_PI + a));
    }
    blocked.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut arcs = Vec::new();
    let mut cursor = 0.0;
    for (lo, hi) in blocked {
        if lo > cursor && cursor < TWO_PI {
            let end = lo.min(TWO_PI);
            if end > cursor {
                arcs.push(AngleArc { start: cursor, end });
            }
        }
        cursor = cursor.max(hi);
    }
    let measure = arcs.iter().map(|a| a.width()).sum();
    let report = AngleReport {
        energy: table.energy,
        hbar: table.hbar,
        margin,
        arcs,
        measure,
        eigenphases: table.entries.iter().map(|e| (e.ell, e.theta_mod)).collect(),
    };
    if report.arcs.is_empty() {
        let shown: Vec<String> = report
            .eigenphases
            .iter()
            .map(|(l, p)| format!("l={l}: {p:.6}"))
            .collect();
        return Err(Error::Precondition(format!(
            "no angle at distance {margin:e} from sigma(S) at E = {}; blocking eigenphases {}",
            table.energy,
            shown.join(", ")
        )));
    }
    Ok(report)
}

/// Admissible angles at a resonant energy, read from S(E_res; Hext, H0).
pub fn admissible_angles(
    triple: &PotentialTriple,
    energy: f64,
    hbar: f64,
    margin: f64,
    opts: &AssemblyOptions,
) -> Result<AngleReport> {
    let t = assemble(triple, Pair::HextH0, energy, hbar, opts)?;
    admissible_arcs(&t, margin)
}

/// Fraction of the circle outside a neighbourhood of 1 of half-width `a`
/// covered by the arcs.
pub fn coverage_away_from_one(report: &AngleReport, a: f64) -> f64 {
    let total = TWO_PI - 2.0 * a;
    let inside: f64 = report
        .arcs
        .iter()
        .map(|arc| (arc.end.min(TWO_PI - a) - arc.start.max(a)).max(0.0))
        .sum();
    inside / total
}

pub fn default_probe() -> f64 {
    PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Dimension;
    use crate::scattering::PhaseEntry;

    fn table(phases: &[f64]) -> EigenphaseTable {
        EigenphaseTable {
            energy: 1.0,
            hbar: 0.1,
            dimension: Dimension::Three,
            pair: Pair::HextH0,
            l_max: phases.len().saturating_sub(1) as u32,
            entries: phases
                .iter()
                .enumerate()
                .map(|(l, &p)| PhaseEntry::new(l as u32, 2 * l as u32 + 1, p))
                .collect(),
            tail_bound: 0.0,
            chain_defect: 0.0,
        }
    }

    #[test]
    fn free_exterior_leaves_the_circle_minus_one() {
        let r = admissible_arcs(&table(&[0.0, 0.0]), 1e-6).unwrap();
        assert_eq!(r.arcs.len(), 1);
        assert!((r.arcs[0].start - 1e-6).abs() < 1e-9);
        assert!((r.arcs[0].end - (TWO_PI - 1e-6)).abs() < 1e-9);
    }

    #[test]
    fn eigenphases_split_the_circle() {
        let r = admissible_arcs(&table(&[1.0, -2.0]), 0.1).unwrap();
        assert_eq!(r.arcs.len(), 3);
        assert!(!r.contains(1.0));
        assert!(!r.contains(TWO_PI - 2.0));
        assert!(r.contains(PI));
        assert_eq!(r.choose(1.0).map(|t| r.contains(t)), Some(true));
    }

    #[test]
    fn oversized_margin_reports_the_blocking_phases() {
        let err = admissible_arcs(&table(&[2.0, 4.0]), 1.99).unwrap_err();
        assert!(err.to_string().contains("l=1"), "{err}");
    }
}
