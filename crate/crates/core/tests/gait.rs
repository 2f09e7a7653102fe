mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snapnet::elements::{support_chamber_volume, Lobe, SnapElement, SnapSpec, Source};
use snapnet::gait::*;
use snapnet::netsim::*;

use common::*;

fn calibrated_cycle() -> TipPath {
    let trace = simulate(&single_dome_with(0.4 * ML, FITTED_WEAK_SB), &SolverConfig::default(), 2.1).unwrap();
    tip_trajectory(&trace, "dome", &calibrated_kinematics()).unwrap()
}

/// Even-odd point-in-polygon test.
fn inside(x: &[f64], y: &[f64], px: f64, py: f64) -> bool {
    let n = x.len();
    let mut c = false;
    let mut j = n - 1;
    for i in 0..n {
        if (y[i] > py) != (y[j] > py) && px < (x[j] - x[i]) * (py - y[i]) / (y[j] - y[i]) + x[i] {
            c = !c;
        }
        j = i;
    }
    c
}

#[test]
fn calibrated_cycle_area_matches_monte_carlo() {
    let path = calibrated_cycle();
    let area = swept_area(&path).unwrap().area;
    let (x0, x1) = path.x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (y0, y1) = path.y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 400_000;
    let hits = (0..n)
        .filter(|_| inside(&path.x, &path.y, rng.gen_range(x0..x1), rng.gen_range(y0..y1)))
        .count();
    let mc = hits as f64 / n as f64 * (x1 - x0) * (y1 - y0);
    assert!((mc - area).abs() <= 0.01 * area, "shoelace {area:e}, Monte-Carlo {mc:e}");
}

#[test]
fn calibrated_cycle_ranges() {
    let path = calibrated_cycle();
    assert!((path.x_range() - 8e-3).abs() <= 0.8e-3, "x range {}", path.x_range());
    assert!((path.y_range() - 5e-3).abs() <= 0.5e-3, "y range {}", path.y_range());
}

#[test]
fn resting_element_sits_at_origin() {
    let path = calibrated_cycle();
    assert_eq!((path.x[0], path.y[0]), (0.0, 0.0));
}

#[test]
fn symmetric_lobes_give_no_lateral_motion() {
    let spec = SnapSpec::from_folds(41.0 * MBAR, 0.0, 20.0 * UL, 60.0 * UL);
    let el = SnapElement::new(spec, spec, 2e-3, support_chamber_volume(10e-3, 3.5e-3)).unwrap();
    let net = validate(&Network {
        nodes: vec![node("cavity", 6.0 * ML), ambient()],
        elements: vec![ElementSpec { name: "dome".into(), node: "cavity".into(), kind: ElementKind::Snap(el) }],
        sources: vec![SourceSpec {
            name: "pump".into(),
            node: "cavity".into(),
            source: Source::flow_ramp(0.4 * ML, 0.4 * ML, 0.1),
            resistance: None,
        }],
        ..Network::default()
    })
    .unwrap();
    let trace = simulate(&net, &SolverConfig::default(), 2.1).unwrap();
    let path = tip_trajectory(&trace, "dome", &calibrated_kinematics()).unwrap();
    assert!(path.x.iter().all(|&x| x == 0.0));
    assert!(path.y_range() > 0.0);
    assert_eq!(swept_area(&path).unwrap().area, 0.0);
    let contact = ContactModel { contact_height: -1e-3, mode: ContactMode::Ratchet };
    let g = body_displacement(&[path], &contact, 2.1, vec![]).unwrap();
    assert_eq!(g.stride, 0.0);
}

fn quadruped_paths(trace: &Trace) -> Vec<TipPath> {
    ["RL", "RR", "FL", "FR"].iter().map(|leg| tip_trajectory(trace, leg, &calibrated_kinematics()).unwrap()).collect()
}

#[test]
fn contact_below_path_moves_nothing() {
    let trace = simulate(&quadruped(1.0, BRIDGE, 600.0 * MBAR), &SolverConfig::default(), 2.0).unwrap();
    let paths = quadruped_paths(&trace);
    let low = paths.iter().flat_map(|p| p.y.iter().copied()).fold(f64::INFINITY, f64::min);
    let contact = ContactModel { contact_height: low - 1e-3, mode: ContactMode::Ratchet };
    let g = body_displacement(&paths, &contact, 1.0, vec![]).unwrap();
    assert!(g.displacement.iter().all(|&d| d == 0.0));
}

fn regime_at(f: f64) -> (RegimeReport, Trace) {
    let trace = simulate(&quadruped(f, BRIDGE, 600.0 * MBAR), &SolverConfig::default(), 5.0 / f).unwrap();
    (classify_regime(&trace, &rear_front(), 1.0 / f).unwrap(), trace)
}

#[test]
fn walking_at_one_hz_jump_like_at_seven_and_a_half() {
    assert_eq!(regime_at(1.0).0.regime, Regime::Walking);
    let (r, trace) = regime_at(7.5);
    assert_eq!(r.regime, Regime::JumpLike);
    let p = 1.0 / 7.5;
    let t1 = trace.duration();
    let legs: Vec<String> = ["RL", "RR", "FL", "FR"].map(String::from).to_vec();
    let phases = phase_diagram(&trace.events, p, &legs, t1 - 2.0 * p, t1 - p).unwrap();
    for lp in &phases {
        let front = lp.leg.starts_with('F');
        assert_eq!(lp.intervals.is_empty(), front, "{}: {:?}", lp.leg, lp.intervals);
    }
}

#[test]
fn zero_drive_is_flagged_walking() {
    let trace = simulate(&quadruped(1.0, BRIDGE, 0.0), &SolverConfig::default(), 3.0).unwrap();
    let r = classify_regime(&trace, &rear_front(), 1.0).unwrap();
    assert_eq!(r.regime, Regime::Walking);
    assert!(r.zero_events);
}

#[test]
fn short_trace_rejected() {
    let trace = simulate(&quadruped(1.0, BRIDGE, 600.0 * MBAR), &SolverConfig::default(), 2.0).unwrap();
    assert!(matches!(classify_regime(&trace, &rear_front(), 1.0), Err(GaitError::TooShort { .. })));
}

#[test]
fn rear_intervals_lead_front_at_one_hz() {
    let trace = simulate(&quadruped(1.0, BRIDGE, 600.0 * MBAR), &SolverConfig::default(), 4.0).unwrap();
    let legs: Vec<String> = ["RL", "RR", "FL", "FR"].map(String::from).to_vec();
    let phases = phase_diagram(&trace.events, 1.0, &legs, 2.0, 3.0).unwrap();
    let start = |leg: &str| phases.iter().find(|p| p.leg == leg).unwrap().intervals[0].start;
    assert!(start("RL") < start("FL") && start("RR") < start("FR"));
    assert!(trace.events.iter().any(|e| e.lobe == Lobe::Strong));
}

fn polygon() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec(0.2..1.0f64, 5..40).prop_map(|r| {
        let n = r.len();
        let ang = |i: usize| 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        ((0..n).map(|i| r[i] * ang(i).cos()).collect(), (0..n).map(|i| r[i] * ang(i).sin()).collect())
    })
}

proptest! {
    #[test]
    fn area_invariant_under_rigid_motion(
        (x, y) in polygon(),
        theta in 0.0..std::f64::consts::TAU,
        dx in -10.0..10.0f64,
        dy in -10.0..10.0f64,
    ) {
        let a = shoelace(&x, &y);
        let (c, s) = (theta.cos(), theta.sin());
        let xr: Vec<f64> = x.iter().zip(&y).map(|(x, y)| c * x - s * y + dx).collect();
        let yr: Vec<f64> = x.iter().zip(&y).map(|(x, y)| s * x + c * y + dy).collect();
        let b = shoelace(&xr, &yr);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs(), "{} vs {}", a, b);
    }

    #[test]
    fn ratchet_never_moves_backward(
        xs in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 50), 1..5),
        ys in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 50), 1..5),
        h in -1.0..1.0f64,
    ) {
        let n = xs.len().min(ys.len());
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.01).collect();
        let paths: Vec<TipPath> = (0..n)
            .map(|i| TipPath { leg: format!("L{i}"), t: t.clone(), x: xs[i].clone(), y: ys[i].clone() })
            .collect();
        let g = body_displacement(&paths, &ContactModel { contact_height: h, mode: ContactMode::Ratchet }, 0.1, vec![]).unwrap();
        prop_assert!(g.displacement.windows(2).all(|w| w[1] >= w[0]));
    }
}
