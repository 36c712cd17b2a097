use std::f64::consts::PI;

use proptest::prelude::*;

use resoflow::flow::mu_anchored;
use resoflow::lab::config::EnergyWindow;
use resoflow::lab::resonances::resonances_from;
use resoflow::lab::{admissible_arcs, exponential_fit, power_fit, Provenance, SweepRecord};
use resoflow::numerics::linalg::{chord, TWO_PI};
use resoflow::potential::Dimension;
use resoflow::scattering::{arc_count, op_norm_diff, EigenphaseTable, Pair, PhaseEntry};

fn table(phases: &[(f64, u32)]) -> EigenphaseTable {
    EigenphaseTable {
        energy: 1.0,
        hbar: 0.1,
        dimension: Dimension::Three,
        pair: Pair::HextH0,
        l_max: phases.len().saturating_sub(1) as u32,
        entries: phases
            .iter()
            .enumerate()
            .map(|(l, &(t, w))| PhaseEntry::new(l as u32, w, t))
            .collect(),
        tail_bound: 0.0,
        chain_defect: 0.0,
    }
}

fn phases() -> impl Strategy<Value = Vec<(f64, u32)>> {
    prop::collection::vec((-20.0..20.0f64, 1u32..9), 1..12)
}

proptest! {
    #[test]
    fn arc_counts_add_over_adjacent_arcs(p in phases(), a in 0.0..TWO_PI, b in 0.0..TWO_PI, c in 0.0..TWO_PI) {
        let t = table(&p);
        let mut x = [a, b, c];
        x.sort_by(f64::total_cmp);
        prop_assert_eq!(arc_count(&t, x[0], x[1]) + arc_count(&t, x[1], x[2]), arc_count(&t, x[0], x[2]));
    }

    #[test]
    fn reversed_arc_negates_the_count(p in phases(), a in 0.0..TWO_PI, b in 0.0..TWO_PI) {
        let t = table(&p);
        prop_assert_eq!(arc_count(&t, a, b), -arc_count(&t, b, a));
    }

    #[test]
    fn full_circle_counts_every_eigenvalue(p in phases()) {
        let t = table(&p);
        let total: i64 = p.iter().map(|q| q.1 as i64).sum();
        prop_assert_eq!(arc_count(&t, 0.0, TWO_PI), total);
    }

    #[test]
    fn anchored_count_drops_by_the_arc_count(p in phases(), a in 0.0..TWO_PI, b in 0.0..TWO_PI) {
        let t = table(&p);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert_eq!(mu_anchored(&t, lo) - mu_anchored(&t, hi), arc_count(&t, lo, hi));
    }

    #[test]
    fn anchored_count_shifts_by_total_weight_per_turn(p in phases(), th in 0.0..TWO_PI) {
        let t = table(&p);
        let total: i64 = p.iter().map(|q| q.1 as i64).sum();
        prop_assert_eq!(mu_anchored(&t, th) - mu_anchored(&t, th + TWO_PI), total);
    }

    #[test]
    fn admissible_angles_keep_their_margin(p in phases(), margin in 1e-3..0.3f64) {
        let t = table(&p);
        let report = admissible_arcs(&t, margin).unwrap();
        prop_assert!(report.measure <= TWO_PI + 1e-12);
        for arc in &report.arcs {
            let mid = arc.middle();
            prop_assert!(report.contains(mid));
            prop_assert!(chord(mid, 0.0) >= margin * (1.0 - 1e-9));
            for e in &t.entries {
                prop_assert!(chord(mid, e.theta) >= margin * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn eigenvalue_angles_are_never_admissible(p in phases()) {
        let t = table(&p);
        let report = admissible_arcs(&t, 1e-3).unwrap();
        for e in &t.entries {
            prop_assert!(!report.contains(e.theta_mod));
        }
    }

    #[test]
    fn identical_tables_are_at_distance_zero(p in phases()) {
        let t = table(&p);
        prop_assert_eq!(op_norm_diff(&t, &t.clone()).unwrap(), 0.0);
    }

    #[test]
    fn exponential_fit_recovers_the_rate(c in 0.1..5.0f64, a in -3.0..3.0f64) {
        let mut rec = SweepRecord::new(Provenance::new("test"));
        for h in [0.2, 0.17, 0.15, 0.13, 0.12, 0.1] {
            rec.push(h, 1.0, None, "q", (a - c / h).exp());
        }
        let f = exponential_fit("q", &rec).unwrap();
        prop_assert!((f.slope + c).abs() < 1e-9 * c.max(1.0));
        prop_assert!((f.intercept - a).abs() < 1e-8);
        prop_assert!(f.r_squared > 1.0 - 1e-12);
        prop_assert!(f.decays(0.9));
    }

    #[test]
    fn power_fit_recovers_the_exponent(eta in 0.5..4.0f64) {
        let mut rec = SweepRecord::new(Provenance::new("test"));
        for h in [0.2, 0.17, 0.15, 0.13, 0.12, 0.1] {
            rec.push(h, 1.0, None, "n", 3.0 * h.powf(-eta));
        }
        let f = power_fit("n", &rec).unwrap();
        prop_assert!((f.slope + eta).abs() < 1e-9);
    }
}

#[test]
fn a_window_without_levels_has_no_resonances() {
    use resoflow::lab::config::ExperimentConfig;
    use resoflow::lab::resonances::interior_spectrum;
    use resoflow::Execution;

    let cfg = ExperimentConfig::default_model();
    let triple = cfg.build_triple().unwrap();
    let list = interior_spectrum(
        &triple,
        0.2,
        triple.options.e_plus,
        &cfg.bound_states(Execution::Sequential),
    )
    .unwrap();
    let lowest = list.levels.first().map(|l| l.energy).unwrap();
    let below = EnergyWindow {
        center: 0.5 * lowest,
        delta: 0.25 * lowest,
    };
    assert!(resonances_from(&list, 0.2, &below, triple.options.e_plus).is_empty());
    let all = EnergyWindow {
        center: 0.75,
        delta: 0.7,
    };
    let res = resonances_from(&list, 0.2, &all, triple.options.e_plus);
    assert!(!res.is_empty());
    assert!(res.iter().all(|r| r.isolation > 0.0 && r.multiplicity >= 1));
}

#[test]
fn fits_need_three_points() {
    let mut rec = SweepRecord::new(Provenance::new("test"));
    rec.push(0.2, 1.0, None, "q", 1e-3);
    rec.push(0.1, 1.0, None, "q", 1e-6);
    assert!(exponential_fit("q", &rec).is_err());
}

#[test]
fn pi_is_the_default_probe() {
    assert_eq!(resoflow::lab::resonances::default_probe(), PI);
}
