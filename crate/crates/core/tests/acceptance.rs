//! Property and oracle suite on the bundled ring-barrier model.
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero when any fails.

use std::process::ExitCode;
use std::time::Instant;

use resoflow::lab::verify::{
    closed_forms, names, oracle_equivalence, robustness_verdict, scan_verdicts, ssf_verdicts,
    synthetic_suite, synthetic_verdict, Lab, Verdict,
};
use resoflow::lab::ExperimentConfig;
use resoflow::{Execution, Result};

const FLOW_HBAR: f64 = 0.12;
const ORACLE_HBARS: [f64; 2] = [0.2, 0.15];

struct Criterion {
    title: &'static str,
    parts: Vec<Verdict>,
    seconds: f64,
}

impl Criterion {
    fn passed(&self) -> bool {
        !self.parts.is_empty() && self.parts.iter().all(|v| v.passed)
    }

    fn print(&self) {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        println!("{tag} {} ({:.1} s)", self.title, self.seconds);
        for v in &self.parts {
            println!("    {}", v.line());
        }
    }
}

fn or_fail(name: &str, r: Result<Verdict>) -> Verdict {
    r.unwrap_or_else(|e| Verdict::from_error(name, &e))
}

fn pick(all: &[Verdict], wanted: &[&str]) -> Vec<Verdict> {
    wanted
        .iter()
        .map(|n| {
            all.iter()
                .find(|v| v.name == *n)
                .cloned()
                .unwrap_or_else(|| Verdict::new(n, false, "not produced"))
        })
        .collect()
}

fn timed<F: FnOnce() -> Vec<Verdict>>(title: &'static str, f: F) -> Criterion {
    let t = Instant::now();
    let parts = f();
    let c = Criterion {
        title,
        parts,
        seconds: t.elapsed().as_secs_f64(),
    };
    c.print();
    c
}

fn main() -> ExitCode {
    let config = ExperimentConfig::default_model();
    let hbars = config.hbar.clone();
    let lab = Lab::new(config, Execution::default()).expect("bundled model builds");
    let mut done = Vec::new();

    let mut reports = Vec::new();
    done.push(timed(
        "resonance flow equals the multiplicity at hbar 0.12",
        || {
            let mut parts = Vec::new();
            for (ell, name) in [(0, names::FLOW_S_WAVE), (1, names::FLOW_P_WAVE)] {
                match lab.resonance_flow(FLOW_HBAR, ell) {
                    Ok(r) => {
                        parts.push(Lab::flow_verdict(name, &r));
                        reports.push(r);
                    }
                    Err(e) => parts.push(Verdict::from_error(name, &e)),
                }
            }
            parts
        },
    ));
    done.push(timed(
        "counting function splits at off-resonant energies",
        || {
            vec![or_fail(
                names::COUNTING_SPLIT,
                lab.counting_split(FLOW_HBAR),
            )]
        },
    ));
    done.push(timed(
        "counting function equals the exterior Birman-Schwinger count",
        || {
            vec![or_fail(
                names::BS_COUNT,
                lab.birman_schwinger_count(FLOW_HBAR),
            )]
        },
    ));
    done.push(timed("interior Birman-Schwinger principle", || {
        vec![or_fail(
            names::BS_INTERIOR,
            lab.interior_birman_schwinger(FLOW_HBAR),
        )]
    }));

    let t = Instant::now();
    let scan = match lab.semiclassical_scan(&hbars) {
        Ok(rec) => scan_verdicts(&rec, lab.config.checks.gamma, lab.triple.dimension),
        Err(e) => [
            names::TUNNEL_B,
            names::TUNNEL_A,
            names::S_PAIR,
            names::S_IDENTITY,
            names::ARC_COUNTS,
            names::HOELDER,
        ]
        .iter()
        .map(|n| Verdict::from_error(n, &e))
        .collect(),
    };
    let scan_seconds = t.elapsed().as_secs_f64();
    println!("semiclassical scan over hbar {hbars:?}: {scan_seconds:.1} s");

    done.push(timed(
        "tunnelling estimates decay at twice the Agmon distance",
        || pick(&scan, &[names::TUNNEL_B, names::TUNNEL_A]),
    ));
    done.push(timed(
        "off-resonant S-matrix differences decay exponentially",
        || pick(&scan, &[names::S_PAIR, names::S_IDENTITY]),
    ));
    done.push(timed(
        "spectral shift function across the tested resonances",
        || ssf_verdicts(&reports),
    ));
    done.push(timed(
        "product perturbation bounds on 200 synthetic families",
        || {
            let checks = &lab.config.checks;
            let flow = lab.config.flow(Execution::Sequential);
            let s = synthetic_suite(
                lab.config.seed,
                checks.synthetic_pairs,
                checks.synthetic_steps,
                &flow,
                lab.execution,
            );
            vec![synthetic_verdict(&s)]
        },
    ));
    done.push(timed(
        "stationary representation against ODE phase shifts",
        || {
            vec![or_fail(
                names::ORACLE,
                oracle_equivalence(
                    &lab.triple,
                    &ORACLE_HBARS,
                    &lab.config.kernels(),
                    &lab.config.solver(),
                ),
            )]
        },
    ));
    done.push(timed("closed forms", || {
        vec![or_fail(
            names::CLOSED_FORMS,
            closed_forms(&lab.config.solver()),
        )]
    }));
    done.push(timed("arc eigenvalue counts", || {
        pick(&scan, &[names::ARC_COUNTS])
    }));
    done.push(timed("independence of the interior construction", || {
        vec![match lab.robustness(&hbars) {
            Ok(r) => robustness_verdict(&r),
            Err(e) => Verdict::from_error(names::ROBUSTNESS, &e),
        }]
    }));
    done.push(timed("Hoelder envelope", || pick(&scan, &[names::HOELDER])));

    let extra = pick(&scan, &[names::CHAIN_RULE]);
    for v in &extra {
        println!("supplementary: {}", v.line());
    }

    let failed: Vec<&str> = done
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.title)
        .collect();
    println!(
        "{} of {} criteria passed",
        done.len() - failed.len(),
        done.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        for f in failed {
            println!("failed: {f}");
        }
        ExitCode::FAILURE
    }
}
