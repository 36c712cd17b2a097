use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::breit_wigner::{
    breit_wigner_sweep, endpoint_identity, BreitWignerOptions, BreitWignerReport,
};
use super::config::ExperimentConfig;
use super::fit::{exponential_fit_points, power_fit_points, FitResult};
use super::record::{Provenance, SweepRecord};
use super::resonances::{
    admissible_arcs, interior_spectrum, lowest_in_channel, resonances_from, ResonantEnergy,
};
use super::robustness::{robustness_experiment, RobustnessReport};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::flow::synthetic::{random_hermitian, random_unitary, tracked_flow, ProductFamilies};
use crate::flow::{
    equality_check, flow_difference_identity, mu_anchored, mu_via_birman_schwinger,
    product_perturbation_check, rotation_bound_check, spectral_flow, BsCountOptions, FlowOptions,
};
use crate::numerics::linalg::TWO_PI;
use crate::potential::{
    agmon_distance, classically_accessible, Dimension, PotentialTriple, RadialPotential,
};
use crate::radial::{
    bs_kernels_converged, outgoing_green, phase_shift, smatrix_eigenvalue, stationary_smatrix,
    BoundStateList, Channel, KernelOptions, Perturbation, SolverOptions, StationaryBase,
};
use crate::scattering::{
    arc_count, assemble, assemble_all, hoelder_ratio, op_norm_diff_padded, s_minus_identity,
    stationary_channel, AssemblyOptions, Pair,
};

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }

    /// A check that could not be carried out fails with the reason.
    pub fn from_error(name: &str, err: &Error) -> Self {
        Verdict::new(name, false, format!("not evaluated: {err}"))
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

pub fn all_passed(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.passed)
}

/// Interior data that every check at one hbar needs.
#[derive(Clone, Debug)]
pub struct HbarContext {
    pub hbar: f64,
    pub interior: BoundStateList,
    pub resonances: Vec<ResonantEnergy>,
}

impl HbarContext {
    pub fn levels(&self) -> Vec<f64> {
        self.interior.levels.iter().map(|l| l.energy).collect()
    }
}

/// `n` evenly spaced energies in (lo, hi); energies within `guard` of a level
/// move to the midpoint between the neighbouring levels.
pub fn off_resonant_energies(levels: &[f64], lo: f64, hi: f64, n: usize, guard: f64) -> Vec<f64> {
    let mut marks: Vec<f64> = levels
        .iter()
        .copied()
        .filter(|&e| e > lo && e < hi)
        .collect();
    marks.sort_by(f64::total_cmp);
    (0..n)
        .map(|i| {
            let e = lo + (i as f64 + 0.5) * (hi - lo) / n as f64;
            if marks.iter().all(|&m| (m - e).abs() > guard) {
                return e;
            }
            let below = marks.iter().copied().filter(|&m| m <= e).fold(lo, f64::max);
            let above = marks.iter().copied().filter(|&m| m > e).fold(hi, f64::min);
            let near = if (e - below).abs() < (above - e).abs() {
                below
            } else {
                above
            };
            // midpoint of the gap on the side away from the nearby level
            if near == below {
                let next = marks
                    .iter()
                    .copied()
                    .filter(|&m| m > below)
                    .fold(hi, f64::min);
                0.5 * (below + next)
            } else {
                let prev = marks
                    .iter()
                    .copied()
                    .filter(|&m| m < above)
                    .fold(lo, f64::max);
                0.5 * (prev + above)
            }
        })
        .collect()
}

/// Point of [lo, hi] farthest from every level.
pub fn most_isolated(levels: &[f64], lo: f64, hi: f64) -> f64 {
    let mut marks: Vec<f64> = levels
        .iter()
        .copied()
        .filter(|&e| e > lo && e < hi)
        .collect();
    marks.sort_by(f64::total_cmp);
    if marks.is_empty() {
        return 0.5 * (lo + hi);
    }
    let dist = |e: f64| {
        levels
            .iter()
            .map(|&m| (m - e).abs())
            .fold(f64::INFINITY, f64::min)
    };
    let mut cands = vec![lo, hi];
    let mut prev = lo;
    for &m in &marks {
        cands.push(0.5 * (prev + m));
        prev = m;
    }
    cands.push(0.5 * (prev + hi));
    cands
        .into_iter()
        .max_by(|a, b| dist(*a).total_cmp(&dist(*b)))
        .expect("candidates are non-empty")
}

pub mod names {
    pub const FLOW_S_WAVE: &str = "resonance flow equals multiplicity (lowest l=0 level)";
    pub const FLOW_P_WAVE: &str = "resonance flow equals multiplicity (lowest l=1 level)";
    pub const COUNTING_SPLIT: &str =
        "counting function splits into exterior part plus interior count";
    pub const BS_COUNT: &str =
        "counting function equals Birman-Schwinger count of A + cot(theta/2) B";
    pub const BS_INTERIOR: &str = "interior bound states equal eigenvalues of K_int above one";
    pub const TUNNEL_B: &str = "tunnelling estimate for the exterior kernel B";
    pub const TUNNEL_A: &str = "tunnelling estimate for A - K_int";
    pub const S_PAIR: &str = "off-resonant S-matrix pair difference is exponentially small";
    pub const S_IDENTITY: &str = "off-resonant S(H, Hext) - I is exponentially small";
    pub const SSF_JUMP: &str = "spectral shift function drops by the multiplicity";
    pub const SSF_DETERMINANT: &str = "determinant of S matches the spectral shift function";
    pub const SYNTHETIC: &str = "product perturbation bounds on synthetic families";
    pub const ORACLE: &str = "stationary representation agrees with ODE phase shifts";
    pub const CLOSED_FORMS: &str = "square well and free Green kernel closed forms";
    pub const ARC_COUNTS: &str = "arc eigenvalue counts grow at most like hbar^-d";
    pub const ROBUSTNESS: &str = "resonant energies do not depend on the interior construction";
    pub const HOELDER: &str = "Hoelder ratios stay below one envelope";
    pub const CHAIN_RULE: &str = "chain rule S(H, H0) = S(H, Hext) S(Hext, H0) off resonance";
}

/// Experiments on one configured model, with the interior spectrum cached per hbar.
pub struct Lab {
    pub config: ExperimentConfig,
    pub triple: PotentialTriple,
    pub execution: Execution,
    cache: Mutex<Vec<(u64, Arc<HbarContext>)>>,
}

impl Lab {
    pub fn new(config: ExperimentConfig, execution: Execution) -> Result<Self> {
        let triple = config.build_triple()?;
        Ok(Lab {
            config,
            triple,
            execution,
            cache: Mutex::new(Vec::new()),
        })
    }

    pub fn assembly(&self) -> AssemblyOptions {
        self.config.assembly(self.execution)
    }

    fn sequential_assembly(&self) -> AssemblyOptions {
        self.config.assembly(Execution::Sequential)
    }

    pub fn breit_wigner_options(&self) -> BreitWignerOptions {
        BreitWignerOptions {
            assembly: self.assembly(),
            family: self.config.family(self.execution),
            flow: self.config.flow(self.execution),
            angle_margin: self.config.angles.margin,
            ..BreitWignerOptions::default()
        }
    }

    pub fn context(&self, hbar: f64) -> Result<Arc<HbarContext>> {
        let key = hbar.to_bits();
        if let Some((_, c)) = self
            .cache
            .lock()
            .expect("cache lock")
            .iter()
            .find(|(k, _)| *k == key)
        {
            return Ok(c.clone());
        }
        let e_plus = self.triple.options.e_plus;
        let interior = interior_spectrum(
            &self.triple,
            hbar,
            e_plus,
            &self.config.bound_states(self.execution),
        )?;
        let resonances = resonances_from(&interior, hbar, &self.config.window, e_plus);
        let ctx = Arc::new(HbarContext {
            hbar,
            interior,
            resonances,
        });
        self.cache
            .lock()
            .expect("cache lock")
            .push((key, ctx.clone()));
        Ok(ctx)
    }

    /// First admissible probe angle at E_res, or the middle of the widest arc.
    pub fn choose_theta(&self, energy: f64, hbar: f64) -> Result<f64> {
        let t = assemble(&self.triple, Pair::HextH0, energy, hbar, &self.assembly())?;
        let report = admissible_arcs(&t, self.config.angles.margin)?;
        for &p in &self.config.angles.probes {
            if report.contains(p) {
                return Ok(p);
            }
        }
        report
            .choose(PI)
            .ok_or_else(|| Error::Precondition(format!("no admissible angle at E = {energy}")))
    }

    /// Breit-Wigner sweep across the lowest resonance of channel `ell`.
    pub fn resonance_flow(&self, hbar: f64, ell: u32) -> Result<BreitWignerReport> {
        let ctx = self.context(hbar)?;
        let res = lowest_in_channel(&ctx.resonances, ell).ok_or_else(|| {
            Error::Precondition(format!(
                "no l = {ell} resonance in the window at hbar = {hbar}"
            ))
        })?;
        let theta = self.choose_theta(res.energy, hbar)?;
        let (report, _) = breit_wigner_sweep(
            &self.triple,
            res,
            &ctx.interior,
            theta,
            &self.breit_wigner_options(),
        )?;
        Ok(report)
    }

    pub fn flow_verdict(name: &str, r: &BreitWignerReport) -> Verdict {
        Verdict::new(
            name,
            r.passed,
            format!(
                "hbar {} E_res {:.10} m {} theta {:.4} flow {} (window +-{:.2e}, width {:.2e}, {} points)",
                r.resonance.hbar,
                r.resonance.energy,
                r.resonance.multiplicity,
                r.theta,
                r.flow.flow,
                r.epsilon,
                r.width,
                r.grid_points
            ),
        )
    }

    pub fn counting_energies(&self, ctx: &HbarContext) -> Vec<f64> {
        let w = &self.config.window;
        off_resonant_energies(
            &ctx.levels(),
            w.lo(),
            w.hi(),
            self.config.checks.counting_energies,
            1e-3 * w.delta,
        )
    }

    /// mu(H, H0) = mu(Hext, H0) + N(H^int) at off-resonant energies.
    pub fn counting_split(&self, hbar: f64) -> Result<Verdict> {
        let ctx = self.context(hbar)?;
        let energies = self.counting_energies(&ctx);
        let rows = exec::try_map(
            self.execution,
            &energies,
            |&e| -> Result<(f64, f64, bool, bool)> {
                let set = assemble_all(&self.triple, e, hbar, &self.sequential_assembly())?;
                let arcs = admissible_arcs(&set.hext_h0, self.config.angles.margin)?;
                let theta = arcs
                    .choose(PI)
                    .expect("admissible_arcs never returns an empty report");
                let id = endpoint_identity(
                    &set.hh0,
                    &set.hext_h0,
                    &ctx.interior,
                    theta,
                    self.config.angles.margin,
                );
                Ok((e, theta, id.equality_holds, id.sandwich_holds))
            },
        )?;
        let bad: Vec<String> = rows
            .iter()
            .filter(|r| !(r.2 && r.3))
            .map(|r| format!("E={:.6} theta={:.4}", r.0, r.1))
            .collect();
        Ok(Verdict::new(
            names::COUNTING_SPLIT,
            bad.is_empty(),
            format!(
                "hbar {hbar}: {} energies, {} violations {}",
                rows.len(),
                bad.len(),
                bad.join("; ")
            ),
        ))
    }

    /// mu(H, Hext) against the Birman-Schwinger count at (E, theta) pairs,
    /// theta cycling over the probe list.
    pub fn birman_schwinger_count(&self, hbar: f64) -> Result<Verdict> {
        let ctx = self.context(hbar)?;
        let energies = self.counting_energies(&ctx);
        let probes = &self.config.angles.probes;
        let pairs: Vec<(f64, f64)> = energies
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, probes[i % probes.len()]))
            .collect();
        let bs_opts = BsCountOptions {
            kernels: self.config.kernels(),
            execution: Execution::Sequential,
            ..BsCountOptions::default()
        };
        let rows = exec::try_map(
            self.execution,
            &pairs,
            |&(e, th)| -> Result<(f64, f64, i64, i64)> {
                let t = assemble(
                    &self.triple,
                    Pair::HHext,
                    e,
                    hbar,
                    &self.sequential_assembly(),
                )?;
                let bs = mu_via_birman_schwinger(&self.triple, e, th, hbar, &bs_opts)?;
                Ok((e, th, mu_anchored(&t, th), bs.count))
            },
        )?;
        let bad: Vec<String> = rows
            .iter()
            .filter(|r| r.2 != r.3)
            .map(|r| format!("E={:.6} theta={:.4}: {} vs {}", r.0, r.1, r.2, r.3))
            .collect();
        let total: i64 = rows.iter().map(|r| r.2).sum();
        Ok(Verdict::new(
            names::BS_COUNT,
            bad.is_empty(),
            format!(
                "hbar {hbar}: {} pairs, total count {total}, {} mismatches {}",
                rows.len(),
                bad.len(),
                bad.join("; ")
            ),
        ))
    }

    /// Weighted N((1, oo); K_int(E)) against N((-oo, E); H^int).
    pub fn interior_birman_schwinger(&self, hbar: f64) -> Result<Verdict> {
        let ctx = self.context(hbar)?;
        let energies = self.counting_energies(&ctx);
        let l_top = ctx
            .interior
            .states
            .iter()
            .map(|s| s.channel.ell)
            .max()
            .unwrap_or(0)
            + 1;
        let dim = self.triple.dimension;
        let kernels = self.config.kernels();
        let rows = exec::try_map(self.execution, &energies, |&e| -> Result<(f64, i64, i64)> {
            let mut n = 0i64;
            for l in 0..=l_top {
                let ch = Channel::new(dim, l);
                let k = bs_kernels_converged(&self.triple, ch, e, hbar, &kernels)?;
                let (c, _) = k
                    .interior_count()
                    .ok_or_else(|| Error::Precondition(format!("K_int needs E = {e} below E+")))?;
                n += ch.weight() as i64 * c as i64;
            }
            Ok((e, n, ctx.interior.count_below(e) as i64))
        })?;
        let bad: Vec<String> = rows
            .iter()
            .filter(|r| r.1 != r.2)
            .map(|r| format!("E={:.6}: {} vs {}", r.0, r.1, r.2))
            .collect();
        let counts: Vec<String> = rows.iter().map(|r| r.2.to_string()).collect();
        Ok(Verdict::new(
            names::BS_INTERIOR,
            bad.is_empty(),
            format!(
                "hbar {hbar}: counts [{}], {} mismatches {}",
                counts.join(","),
                bad.len(),
                bad.join("; ")
            ),
        ))
    }

    /// Tunnelling, S-matrix, arc-count, Hoelder and chain-rule quantities on the hbar list.
    pub fn semiclassical_scan(&self, hbars: &[f64]) -> Result<SweepRecord> {
        let mut rec = SweepRecord::new(Provenance::new(self.config.hash()));
        let checks = &self.config.checks;
        let v = self.triple.v().clone();
        let kernels = self.config.kernels();
        let dim = self.triple.dimension;
        for &h in hbars {
            let ctx = self.context(h)?;
            let levels = ctx.levels();
            let e_star = most_isolated(
                &levels,
                checks.reference_energy - checks.reference_spread,
                checks.reference_energy + checks.reference_spread,
            );
            let k_rows = exec::try_map_range(self.execution, 5, |l| {
                bs_kernels_converged(
                    &self.triple,
                    Channel::new(dim, l as u32),
                    e_star,
                    h,
                    &kernels,
                )
            })?;
            let b = k_rows.iter().map(|k| k.b_norm).fold(0.0, f64::max);
            let a = k_rows
                .iter()
                .filter_map(|k| k.a_minus_k_int_norm)
                .fold(0.0, f64::max);
            rec.push(h, e_star, None, "b_ext_norm", b);
            rec.push(h, e_star, None, "a_ext_minus_k_int_norm", a);
            let (lo, hi) = classically_accessible(&v, e_star)?
                .barrier()
                .ok_or_else(|| Error::Precondition(format!("no barrier at E = {e_star}")))?;
            let rho = agmon_distance(&v, e_star, self.triple.v0_support().max(lo), hi)?;
            rec.push(h, e_star, None, "agmon_distance", rho);
            let set = assemble_all(&self.triple, e_star, h, &self.assembly())?;
            rec.push(
                h,
                e_star,
                Some(Pair::HH0),
                "s_pair_difference",
                op_norm_diff_padded(&set.hh0, &set.hext_h0)?,
            );
            rec.push(
                h,
                e_star,
                Some(Pair::HHext),
                "s_minus_identity",
                s_minus_identity(&set.h_hext),
            );

            let reference = assemble(
                &self.triple,
                Pair::HextH0,
                checks.reference_energy,
                h,
                &self.assembly(),
            )?;
            let n = arc_count(&reference, checks.arc.0, checks.arc.1);
            rec.push(
                h,
                checks.reference_energy,
                Some(Pair::HextH0),
                "arc_count",
                n as f64,
            );

            let w = &self.config.window;
            let grid = 9;
            let mut energies: Vec<f64> = (0..grid)
                .map(|i| w.lo() + (i as f64 + 0.5) * (w.hi() - w.lo()) / grid as f64)
                .collect();
            energies.extend(ctx.resonances.iter().map(|r| r.energy));
            let steps = [1e-2, 1e-3];
            let gamma = checks.gamma;
            let ratios =
                exec::try_map(self.execution, &energies, |&e| -> Result<(f64, f64, f64)> {
                    let opts = self.sequential_assembly();
                    let t0 = assemble_all(&self.triple, e, h, &opts)?;
                    let mut worst: f64 = 0.0;
                    let mut chain = t0.hh0.chain_defect;
                    for &s in &steps {
                        let e2 = if e + s < w.hi() { e + s } else { e - s };
                        let t1 = assemble(&self.triple, Pair::HextH0, e2, h, &opts)?;
                        worst = worst.max(hoelder_ratio(&t0.hext_h0, &t1, gamma)?);
                        chain = chain.max(t1.chain_defect);
                    }
                    Ok((e, worst, chain))
                })?;
            let r = ratios.iter().map(|x| x.1).fold(0.0, f64::max);
            let c = ratios[..grid].iter().map(|x| x.2).fold(0.0, f64::max);
            let c_res = ratios[grid..].iter().map(|x| x.2).fold(0.0, f64::max);
            rec.push(h, f64::NAN, Some(Pair::HH0), "chain_defect_resonant", c_res);
            rec.push(h, f64::NAN, Some(Pair::HextH0), "hoelder_ratio", r);
            rec.push(h, f64::NAN, Some(Pair::HH0), "chain_defect", c);
        }
        rec.sort();
        Ok(rec)
    }

    pub fn robustness(&self, hbars: &[f64]) -> Result<RobustnessReport> {
        let name = self
            .config
            .robustness
            .as_ref()
            .map(|r| r.alternative.clone())
            .ok_or_else(|| {
                Error::Config("no alternative construction configured under [robustness]".into())
            })?;
        let other = self.config.catalogue.triple(&name)?;
        robustness_experiment(
            &self.triple,
            &other,
            hbars,
            self.triple.options.e_plus,
            &self.config.bound_states(self.execution),
        )
    }

    /// Every check of the property suite on `hbars`; resonance flows run at
    /// the smallest hbar of the list.
    pub fn run_suite(&self, hbars: &[f64]) -> Vec<Verdict> {
        let mut out = Vec::new();
        let h_min = hbars.iter().copied().fold(f64::INFINITY, f64::min);
        let mut reports = Vec::new();
        for (ell, name) in [(0, names::FLOW_S_WAVE), (1, names::FLOW_P_WAVE)] {
            match self.resonance_flow(h_min, ell) {
                Ok(r) => {
                    out.push(Lab::flow_verdict(name, &r));
                    reports.push(r);
                }
                Err(e) => out.push(Verdict::from_error(name, &e)),
            }
        }
        out.extend(ssf_verdicts(&reports));
        for (name, f) in [
            (
                names::COUNTING_SPLIT,
                Lab::counting_split as fn(&Lab, f64) -> Result<Verdict>,
            ),
            (names::BS_COUNT, Lab::birman_schwinger_count),
            (names::BS_INTERIOR, Lab::interior_birman_schwinger),
        ] {
            out.push(f(self, h_min).unwrap_or_else(|e| Verdict::from_error(name, &e)));
        }
        match self.semiclassical_scan(hbars) {
            Ok(rec) => out.extend(scan_verdicts(
                &rec,
                self.config.checks.gamma,
                self.triple.dimension,
            )),
            Err(e) => out.push(Verdict::from_error("semiclassical scan", &e)),
        }
        out.push(match self.robustness(hbars) {
            Ok(r) => robustness_verdict(&r),
            Err(e) => Verdict::from_error(names::ROBUSTNESS, &e),
        });
        let checks = &self.config.checks;
        let flow = self.config.flow(Execution::Sequential);
        out.push(synthetic_verdict(&synthetic_suite(
            self.config.seed,
            checks.synthetic_pairs,
            checks.synthetic_steps,
            &flow,
            self.execution,
        )));
        let oracle_hbars: Vec<f64> = hbars.iter().copied().take(2).collect();
        out.push(
            oracle_equivalence(
                &self.triple,
                &oracle_hbars,
                &self.config.kernels(),
                &self.config.solver(),
            )
            .unwrap_or_else(|e| Verdict::from_error(names::ORACLE, &e)),
        );
        out.push(
            closed_forms(&self.config.solver())
                .unwrap_or_else(|e| Verdict::from_error(names::CLOSED_FORMS, &e)),
        );
        out
    }
}

/// Jump of the unwrapped spectral shift function and the determinant defect
/// over every tested resonance.
pub fn ssf_verdicts(reports: &[BreitWignerReport]) -> Vec<Verdict> {
    if reports.is_empty() {
        return vec![
            Verdict::new(names::SSF_JUMP, false, "no resonance sweep succeeded"),
            Verdict::new(
                names::SSF_DETERMINANT,
                false,
                "no resonance sweep succeeded",
            ),
        ];
    }
    let jumps: Vec<String> = reports
        .iter()
        .map(|r| {
            format!(
                "E_res {:.8} m {}: {:+.4}",
                r.resonance.energy, r.resonance.multiplicity, r.ssf_jump
            )
        })
        .collect();
    let jump_ok = reports
        .iter()
        .all(|r| (r.ssf_jump + r.resonance.multiplicity as f64).abs() <= 0.05);
    let defect = reports
        .iter()
        .map(|r| r.determinant_defect)
        .fold(0.0, f64::max);
    vec![
        Verdict::new(names::SSF_JUMP, jump_ok, jumps.join("; ")),
        Verdict::new(
            names::SSF_DETERMINANT,
            defect <= 1e-8,
            format!("max |exp(-2 pi i xi) - det S| = {defect:.2e}"),
        ),
    ]
}

fn decay_verdict(name: &str, fit: Result<FitResult>, rate: Option<f64>) -> Verdict {
    match fit {
        Err(e) => Verdict::from_error(name, &e),
        Ok(f) => {
            let mut ok = f.decays(0.9);
            let mut detail = format!(
                "slope {:.4} R^2 {:.4} ({})",
                f.slope,
                f.r_squared,
                f.verdict()
            );
            if let Some(rho) = rate {
                let target = 2.0 * rho;
                let rel = (f.slope.abs() - target).abs() / target;
                ok &= rel <= 0.3;
                detail.push_str(&format!(
                    ", 2 x Agmon distance {target:.4}, relative deviation {rel:.3}"
                ));
            }
            Verdict::new(name, ok, detail)
        }
    }
}

/// Verdicts read off a semiclassical scan.
pub fn scan_verdicts(rec: &SweepRecord, gamma: f64, dim: Dimension) -> Vec<Verdict> {
    let agmon = rec.points("agmon_distance");
    let rho = if agmon.is_empty() {
        None
    } else {
        Some(agmon.iter().map(|p| p.1).sum::<f64>() / agmon.len() as f64)
    };
    let mut out = vec![
        decay_verdict(
            names::TUNNEL_B,
            exponential_fit_points("b_ext_norm", &rec.points("b_ext_norm")),
            rho,
        ),
        decay_verdict(
            names::TUNNEL_A,
            exponential_fit_points(
                "a_ext_minus_k_int_norm",
                &rec.points("a_ext_minus_k_int_norm"),
            ),
            rho,
        ),
        decay_verdict(
            names::S_PAIR,
            exponential_fit_points("s_pair_difference", &rec.points("s_pair_difference")),
            None,
        ),
        decay_verdict(
            names::S_IDENTITY,
            exponential_fit_points("s_minus_identity", &rec.points("s_minus_identity")),
            None,
        ),
    ];
    out.push(
        match power_fit_points("arc_count", &rec.points("arc_count")) {
            Err(e) => Verdict::from_error(names::ARC_COUNTS, &e),
            Ok(f) => {
                let eta = -f.slope;
                let d = dim.as_f64();
                Verdict::new(
                    names::ARC_COUNTS,
                    eta <= d && f.r_squared >= 0.85,
                    format!("eta {eta:.3} (d = {d}), R^2 {:.4}", f.r_squared),
                )
            }
        },
    );
    out.push(hoelder_verdict(&rec.points("hoelder_ratio"), gamma));
    let chain = rec
        .points("chain_defect")
        .iter()
        .map(|p| p.1)
        .fold(0.0, f64::max);
    let at_res = rec
        .points("chain_defect_resonant")
        .iter()
        .map(|p| p.1)
        .fold(0.0, f64::max);
    out.push(Verdict::new(
        names::CHAIN_RULE,
        chain <= 1e-8,
        format!(
            "max phase defect {chain:.2e} off resonance ({at_res:.2e} at the resonant energies)"
        ),
    ));
    out
}

/// Envelope C hbar^{-2-gamma} calibrated at the largest hbar.
pub fn hoelder_verdict(points: &[(f64, f64)], gamma: f64) -> Verdict {
    let Some(&(h0, r0)) = points.iter().max_by(|a, b| a.0.total_cmp(&b.0)) else {
        return Verdict::new(names::HOELDER, false, "no Hoelder ratios");
    };
    let p = 2.0 + gamma;
    let c = r0 * h0.powf(p);
    let worst = points
        .iter()
        .map(|&(h, r)| r / (c * h.powf(-p)))
        .fold(0.0, f64::max);
    Verdict::new(
        names::HOELDER,
        worst <= 1.0 + 1e-12,
        format!("gamma {gamma}, C {c:.3e}, largest ratio / envelope {worst:.3}"),
    )
}

pub fn robustness_verdict(r: &RobustnessReport) -> Verdict {
    match &r.fit {
        None => Verdict::new(
            names::ROBUSTNESS,
            false,
            "too few positive ground-state gaps to fit",
        ),
        Some(f) => {
            let gaps: Vec<String> = r
                .rows
                .iter()
                .map(|row| format!("{:.2e}", row.gaps.first().copied().unwrap_or(f64::NAN)))
                .collect();
            Verdict::new(
                names::ROBUSTNESS,
                f.decays(0.9),
                format!(
                    "ground-state gaps [{}], slope {:.4} R^2 {:.4}",
                    gaps.join(", "),
                    f.slope,
                    f.r_squared
                ),
            )
        }
    }
}

/// Tallies of the randomized product-perturbation suite.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSummary {
    pub instances: usize,
    pub product_violations: usize,
    pub equality_violations: usize,
    pub rotation_violations: usize,
    pub difference_violations: usize,
    pub oracle_disagreements: usize,
    /// (seed, message) of instances that raised an error
    pub errors: Vec<(u64, String)>,
}

impl SyntheticSummary {
    pub fn violations(&self) -> usize {
        self.product_violations
            + self.equality_violations
            + self.rotation_violations
            + self.difference_violations
            + self.oracle_disagreements
            + self.errors.len()
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct InstanceOutcome {
    product: bool,
    equality: bool,
    rotation: bool,
    difference: bool,
    oracle: bool,
}

fn synthetic_instance(seed: u64, steps: usize, opts: &FlowOptions) -> Result<InstanceOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(2..=8usize);
    let phi = rng.random_range(0.2..1.0);
    let theta = rng.random_range(phi + 0.1..TWO_PI - phi - 0.1);
    let others = [
        rng.random_range(0.1..TWO_PI - 0.1),
        rng.random_range(0.1..TWO_PI - 0.1),
    ];
    let points = 64;

    let p = ProductFamilies::random(rng.random(), dim, phi, false);
    let u = p.u_family(points)?;
    let ut = p.u_tilde_family(points)?;
    let product = product_perturbation_check(&u, &ut, theta, phi, opts)?.holds();

    let closed = ProductFamilies::random(rng.random(), dim, phi, true);
    let equality = equality_check(
        &closed.u_family(points)?,
        &closed.u_tilde_family(points)?,
        &[theta, others[0], others[1]],
        opts,
    )?
    .holds();

    let norm = phi * rng.random_range(0.3..1.0);
    let a = random_hermitian(&mut rng, dim, norm);
    let u0 = random_unitary(&mut rng, dim);
    let rotation = rotation_bound_check(&a, &u0, phi, theta, 32, opts)?.holds();

    let (lhs, rhs) = flow_difference_identity(&u, others[0], others[1], opts)?;
    let difference = lhs == rhs;

    let sf_u = spectral_flow(&u, theta, opts)?.flow;
    let sf_m = spectral_flow(&ut, PI, opts)?.flow;
    let oracle = sf_u == tracked_flow(|t| p.u(t), 0.0, 1.0, steps, theta)?
        && sf_m == tracked_flow(|t| p.u_tilde(t), 0.0, 1.0, steps, PI)?
        && sf_m == p.expected_m();
    Ok(InstanceOutcome {
        product,
        equality,
        rotation,
        difference,
        oracle,
    })
}

/// `pairs` random instances in dimensions 2 to 8, seeded from `seed`.
pub fn synthetic_suite(
    seed: u64,
    pairs: usize,
    steps: usize,
    opts: &FlowOptions,
    execution: Execution,
) -> SyntheticSummary {
    let seeds: Vec<u64> = (0..pairs as u64)
        .map(|i| seed.wrapping_add(i.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
        .collect();
    let outcomes = exec::map(execution, &seeds, |&s| {
        (s, synthetic_instance(s, steps, opts))
    });
    let mut sum = SyntheticSummary {
        instances: pairs,
        ..SyntheticSummary::default()
    };
    for (s, o) in outcomes {
        match o {
            Ok(o) => {
                sum.product_violations += !o.product as usize;
                sum.equality_violations += !o.equality as usize;
                sum.rotation_violations += !o.rotation as usize;
                sum.difference_violations += !o.difference as usize;
                sum.oracle_disagreements += !o.oracle as usize;
            }
            Err(e) => sum.errors.push((s, e.to_string())),
        }
    }
    sum
}

pub fn synthetic_verdict(s: &SyntheticSummary) -> Verdict {
    let mut detail = format!(
        "{} instances: two-sided bound {}, equality {}, rotation {}, difference {}, oracle {} violations",
        s.instances,
        s.product_violations,
        s.equality_violations,
        s.rotation_violations,
        s.difference_violations,
        s.oracle_disagreements
    );
    if let Some((seed, msg)) = s.errors.first() {
        detail.push_str(&format!(
            "; {} errors, first at seed {seed}: {msg}",
            s.errors.len()
        ));
    }
    Verdict::new(names::SYNTHETIC, s.violations() == 0, detail)
}

fn oracle_grid() -> Vec<(f64, u32)> {
    let energies = [0.35, 0.65, 0.95, 1.25, 1.45];
    energies
        .iter()
        .flat_map(|&e| (0..4u32).map(move |l| (e, l)))
        .collect()
}

/// Largest |s_stationary - e^{2 i delta}| over the (E, l) grid for the
/// square well and the configured model.
pub fn oracle_equivalence(
    triple: &PotentialTriple,
    hbars: &[f64],
    kernels: &KernelOptions,
    solver: &SolverOptions,
) -> Result<Verdict> {
    let dim = triple.dimension;
    let well = RadialPotential::square_well(2.0, 1.0)?;
    let f = |r: f64| well.value(r);
    let w = Perturbation {
        value: &f,
        support: 1.0,
        breakpoints: vec![1.0],
    };
    let grid = oracle_grid();
    let mut worst_well: f64 = 0.0;
    let mut worst_model: f64 = 0.0;
    for &h in hbars {
        for &(e, l) in &grid {
            let ch = Channel::new(dim, l);
            let s = stationary_smatrix(ch, StationaryBase::Free, &w, e, h, kernels)?;
            let exact = smatrix_eigenvalue(&phase_shift(&well, ch, e, h, solver)?);
            worst_well = worst_well.max((s.value - exact).norm());
            let s = stationary_channel(triple, Pair::HH0, ch, e, h, kernels)?;
            let exact = smatrix_eigenvalue(&phase_shift(triple.v(), ch, e, h, solver)?);
            worst_model = worst_model.max((s.value - exact).norm());
        }
    }
    let tol = 1e-6;
    Ok(Verdict::new(
        names::ORACLE,
        worst_well <= tol && worst_model <= tol,
        format!(
            "{} points per model at hbar {:?}: square well {worst_well:.2e}, model {worst_model:.2e}",
            grid.len(),
            hbars
        ),
    ))
}

/// s-wave square well against -ka + atan(k tan(Ka) / K) and the free
/// outgoing kernel against sin(k r<) e^{i k r>} / k.
pub fn closed_forms(solver: &SolverOptions) -> Result<Verdict> {
    let (depth, a, hbar) = (3.0, 1.0, 0.5);
    let well = RadialPotential::square_well(depth, a)?;
    let ch = Channel::new(Dimension::Three, 0);
    let mut worst_phase: f64 = 0.0;
    for i in 0..50 {
        let e = 0.05 + 0.1 * i as f64;
        let k = e.sqrt() / hbar;
        let kk = (e + depth).sqrt() / hbar;
        let delta = -k * a + (k * (kk * a).tan() / kk).atan();
        let exact = Complex64::from_polar(1.0, 2.0 * delta);
        let got = smatrix_eigenvalue(&phase_shift(&well, ch, e, hbar, solver)?);
        worst_phase = worst_phase.max((got - exact).norm());
    }
    let zero = RadialPotential::zero();
    let nodes = [0.05, 0.3, 0.71, 1.2, 2.9, 4.4];
    let mut worst_green: f64 = 0.0;
    for &e in &[0.4_f64, 1.0, 2.3, 5.0] {
        let g = outgoing_green(ch, &zero, e, 1.0, &nodes, solver)?;
        let k = e.sqrt();
        for (i, &r) in nodes.iter().enumerate() {
            for (j, &s) in nodes.iter().enumerate() {
                let (lo, hi) = (r.min(s), r.max(s));
                let exact = Complex64::new(0.0, k * hi).exp() * ((k * lo).sin() / k);
                worst_green = worst_green.max((g.values[(i, j)] - exact).norm());
            }
        }
    }
    Ok(Verdict::new(
        names::CLOSED_FORMS,
        worst_phase <= 1e-8 && worst_green <= 1e-9,
        format!(
            "square-well s-wave over 50 energies {worst_phase:.2e}, free kernel {worst_green:.2e}"
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn off_resonant_energies_avoid_levels() {
        let levels = [0.25, 0.5000001];
        let es = off_resonant_energies(&levels, 0.0, 1.0, 4, 1e-3);
        assert_eq!(es.len(), 4);
        for e in &es {
            assert!(levels.iter().all(|l| (l - e).abs() > 1e-3), "{e}");
        }
        assert!((es[0] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn most_isolated_point_of_an_interval() {
        assert!((most_isolated(&[0.9, 1.1], 0.95, 1.05) - 1.0).abs() < 1e-12);
        assert!((most_isolated(&[], 0.0, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hoelder_envelope_uses_the_largest_hbar() {
        let pts = vec![(0.2, 1.0), (0.1, 1.0 * 2f64.powf(2.5))];
        assert!(hoelder_verdict(&pts, 0.5).passed);
        let pts = vec![(0.2, 1.0), (0.1, 1.1 * 2f64.powf(2.5))];
        assert!(!hoelder_verdict(&pts, 0.5).passed);
    }

    #[test]
    fn closed_forms_hold() {
        let v = closed_forms(&SolverOptions::default()).unwrap();
        assert!(v.passed, "{}", v.line());
    }

    #[test]
    fn a_few_synthetic_instances() {
        let s = synthetic_suite(5, 4, 2000, &FlowOptions::default(), Execution::Sequential);
        assert_eq!(s.violations(), 0, "{}", synthetic_verdict(&s).line());
    }
}
