//! One PASS/FAIL line per acceptance criterion, run on the shipped presets
//! through the same calibration chain a user would run:
//!
//! 1. fit `single_dome` to `fig10_sim` (thresholds and H),
//! 2. fit the result to `trajectory` (tip gains),
//! 3. carry both into `quadruped_1hz` and fit `stride_1hz` (contact height),
//! 4. carry everything into `freq_sweep`.
//!
//! A criterion prints FAIL when any of its checks fails. The run exits
//! non-zero only on checks outside `EXPECTED_FAILURES`.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snapnet::analysis::{loop_work, sequencing_delay, PvLoop};
use snapnet::elements::{Lobe, Source};
use snapnet::gait::{Regime, TipPath};
use snapnet::netsim::{
    simulate, validate, EdgeSpec, ElementKind, ElementSpec, EventKind, Network, NodeSpec, SnapEvent, SolverConfig,
    SourceSpec, Trace,
};
use snapnet_cli::commands::{run_simulation, sweep_rows, SweepRow};
use snapnet_cli::presets::{self, Kind};
use snapnet_cli::report::{analyze, Report, Thresholds};
use snapnet_cli::scenario::{get_number, scenario_from_table, set_number, Scenario};
use snapnet_cli::{cmd_fit, cmd_simulate, cmd_sweep, load_input, Input};

/// (criterion, check) pairs known not to be met by this model.
const EXPECTED_FAILURES: [(&str, &str); 1] = [("trajectory", "swept area")];

struct Criterion {
    name: &'static str,
    checks: Vec<(&'static str, bool, String)>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Self { name, checks: Vec::new() }
    }

    fn check(&mut self, label: &'static str, ok: bool, detail: String) {
        self.checks.push((label, ok, detail));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }

    fn line(&self) -> String {
        let details: Vec<String> = self
            .checks
            .iter()
            .map(|(l, ok, d)| format!("{l}{}: {d}", if *ok { "" } else { " [FAIL]" }))
            .collect();
        format!("{} {}: {}", if self.passed() { "PASS" } else { "FAIL" }, self.name, details.join("; "))
    }
}

fn preset_input(name: &str) -> Input {
    load_input(name, Kind::Scenario).unwrap()
}

fn preset_table(name: &str) -> toml::Table {
    toml::from_str(presets::lookup(Kind::Scenario, name).unwrap()).unwrap()
}

fn table_input(label: &str, t: &toml::Table) -> Input {
    Input { label: label.into(), bytes: toml::to_string_pretty(t).unwrap().into_bytes() }
}

/// Run `fit` and return the fitted scenario table.
fn fit(scenario: &Input, targets: &str, dir: &Path) -> toml::Table {
    let out = dir.join(targets);
    cmd_fit(scenario, &load_input(targets, Kind::Targets).unwrap(), None, None, Some(&out))
        .unwrap_or_else(|e| panic!("fit {targets}: {e}"));
    toml::from_str(&fs::read_to_string(out.join("fitted.toml")).unwrap()).unwrap()
}

fn copy_number(from: &toml::Table, to: &mut toml::Table, path: &str) {
    set_number(to, path, get_number(from, path).unwrap()).unwrap();
}

fn run(table: &toml::Table) -> (Scenario, Trace, Report) {
    let sc = scenario_from_table(table).unwrap();
    let net = sc.check().unwrap();
    let trace = run_simulation(&sc, &net).unwrap();
    let report = analyze(&sc, &net, &trace);
    (sc, trace, report)
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn thresholds(report: &Report) -> Criterion {
    let mut c = Criterion::new("thresholds");
    let strong = match &report.thresholds {
        Thresholds::Found(ts) => ts.iter().find(|t| t.lobe == Lobe::Strong).cloned(),
        _ => None,
    };
    let st = strong.as_ref().and_then(|t| t.snap_through).map_or(f64::NAN, |p| p / 100.0);
    let sb = strong.as_ref().and_then(|t| t.snap_back).map_or(f64::NAN, |p| p / 100.0);
    c.check("strong snap-through", within(st, 41.0, 1.0), format!("{st:.3} mbar (41 ± 1)"));
    c.check("strong snap-back", within(sb, 0.0, 2.0), format!("{sb:.3} mbar (0 ± 2)"));
    c
}

fn hysteresis(report: &Report) -> Criterion {
    let mut c = Criterion::new("hysteresis");
    let h = report.hysteresis.as_ref().map_or(f64::NAN, |(_, h)| 100.0 * h.h);
    c.check("H", within(h, 36.6, 2.0), format!("{h:.3} % (36.6 ± 2)"));

    let (a, b, n) = (0.2e-6, 1500.0, 5000);
    let pi = std::f64::consts::PI;
    let pt = |th: f64| (0.3e-6 + a * th.cos(), 2000.0 + b * th.sin());
    let loading = (0..=n).map(|k| pt(pi - pi * k as f64 / n as f64)).collect();
    let unloading = (0..=n).map(|k| pt(-pi * k as f64 / n as f64)).collect();
    let r = loop_work(&PvLoop::new(loading, unloading, 1e-9).unwrap()).unwrap();
    let rel = ((r.w_in - r.w_out) - pi * a * b).abs() / (pi * a * b);
    c.check("ellipse area", rel <= 1e-4, format!("relative error {rel:.2e} (≤ 1e-4)"));
    c
}

/// Step response of two chambers behind resistors: node a behind `r1`,
/// node b behind `r2`. With e = p - p_in the system is e' = A e.
fn two_chamber_exact(p_in: f64, r1: f64, c1: f64, r2: f64, c2: f64, t: f64) -> (f64, f64) {
    let a11 = -(1.0 / r1 + 1.0 / r2) / c1;
    let a12 = 1.0 / (r2 * c1);
    let a21 = 1.0 / (r2 * c2);
    let a22 = -1.0 / (r2 * c2);
    let tr = a11 + a22;
    let det = a11 * a22 - a12 * a21;
    let disc = (0.25 * tr * tr - det).sqrt();
    let (l1, l2) = (0.5 * tr + disc, 0.5 * tr - disc);
    let (v1, v2) = ((a12, l1 - a11), (a12, l2 - a11));
    let d = v1.0 * v2.1 - v2.0 * v1.1;
    let k1 = (-p_in * v2.1 + p_in * v2.0) / d;
    let k2 = (-p_in * v1.0 + p_in * v1.1) / d;
    let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
    (p_in + k1 * v1.0 * e1 + k2 * v2.0 * e2, p_in + k1 * v1.1 * e1 + k2 * v2.1 * e2)
}

fn rc_oracle() -> Criterion {
    let mut c = Criterion::new("rc oracle");
    let (p_in, r1, c1, r2, c2) = (5000.0, 2.6e8, 4e-12, 5e8, 2e-12);
    let node = |name: &str| NodeSpec { name: name.into(), dead_volume: 0.0, ambient: false };
    let cap = |name: &str, n: &str, cv: f64| ElementSpec { name: name.into(), node: n.into(), kind: ElementKind::Capacitance(cv) };
    let net = validate(&Network {
        nodes: vec![node("a"), node("b"), NodeSpec { name: "atm".into(), dead_volume: 0.0, ambient: true }],
        edges: vec![EdgeSpec { name: "bridge".into(), from: "a".into(), to: "b".into(), resistance: r2 }],
        elements: vec![cap("ca", "a", c1), cap("cb", "b", c2)],
        sources: vec![SourceSpec {
            name: "step".into(),
            node: "a".into(),
            source: Source::pressure_wave(p_in, 0.0),
            resistance: Some(r1),
        }],
    })
    .unwrap();
    let cfg = SolverConfig { dt_min: 1e-9, rtol: 1e-10, atol: 1e-18, output_interval: 1e-4, ..SolverConfig::default() };
    let trace = simulate(&net, &cfg, 0.01).unwrap();
    let mut worst: f64 = 0.0;
    for (k, &t) in trace.times.iter().enumerate().skip(1) {
        let (ea, eb) = two_chamber_exact(p_in, r1, c1, r2, c2, t);
        worst = worst.max(((trace.pressures[0][k] - ea) / ea).abs());
        worst = worst.max(((trace.pressures[1][k] - eb) / eb).abs());
    }
    let start = trace.pressures[0][0] == 0.0 && trace.pressures[1][0] == 0.0;
    c.check("two-chamber step", worst <= 1e-6 && start, format!("worst relative error {worst:.2e} over {} samples (≤ 1e-6)", trace.times.len()));
    c
}

fn mass_conservation(sweep: &[SweepRow]) -> Criterion {
    let mut c = Criterion::new("mass conservation");
    for name in presets::names(Kind::Scenario) {
        let (_, trace, _) = run(&preset_table(name));
        let e = trace.mass_balance_error();
        c.check(name, e <= 1e-9, format!("{e:.2e} m3"));
    }
    let worst = sweep.iter().map(|r| r.mass_balance_error).fold(0.0, f64::max);
    c.check("calibrated sweep", worst <= 1e-9, format!("{worst:.2e} m3 over {} frequencies", sweep.len()));
    c
}

fn first_strong(events: &[SnapEvent], group: &[&str], kind: EventKind, t0: f64) -> f64 {
    events
        .iter()
        .filter(|e| e.lobe == Lobe::Strong && e.kind == kind && e.t >= t0 && group.contains(&e.element.as_str()))
        .map(|e| e.t)
        .fold(f64::INFINITY, f64::min)
}

fn sequencing() -> Criterion {
    let mut c = Criterion::new("sequencing");
    let table = preset_table("quadruped_1hz");
    let (sc, trace, _) = run(&table);
    let (rear, front) = (["RL", "RR"], ["FL", "FR"]);
    let t0 = 2.0;
    let r_on = first_strong(&trace.events, &rear, EventKind::SnapThrough, t0);
    let f_on = first_strong(&trace.events, &front, EventKind::SnapThrough, t0);
    let r_off = first_strong(&trace.events, &rear, EventKind::SnapBack, r_on);
    let f_off = first_strong(&trace.events, &front, EventKind::SnapBack, f_on);
    c.check("inflation", r_on < f_on && f_on.is_finite(), format!("rear {r_on:.4} s, front {f_on:.4} s"));
    c.check("deflation", r_off < f_off && f_off.is_finite(), format!("rear {r_off:.4} s, front {f_off:.4} s"));

    let groups = sc.groups().unwrap();
    let path = "network.edges.bridge.resistance_mbar_s_per_mL";
    let r0 = get_number(&table, path).unwrap();
    let delays: Vec<f64> = [0.5, 1.0, 1.5, 2.0, 3.0]
        .iter()
        .map(|k| {
            let mut t = table.clone();
            set_number(&mut t, path, k * r0).unwrap();
            let (_, tr, _) = run(&t);
            sequencing_delay(&tr.events, &groups, 2.0, 3.0).unwrap()
        })
        .collect();
    let ok = delays.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = delays.iter().map(|d| format!("{:.2}", d * 1e3)).collect();
    c.check("bridge sweep", ok, format!("delay [{}] ms at [0.5, 1, 1.5, 2, 3] × R", shown.join(", ")));
    c
}

/// Even-odd point-in-polygon test.
fn inside(x: &[f64], y: &[f64], px: f64, py: f64) -> bool {
    let mut c = false;
    let mut j = x.len() - 1;
    for i in 0..x.len() {
        if (y[i] > py) != (y[j] > py) && px < (x[j] - x[i]) * (py - y[i]) / (y[j] - y[i]) + x[i] {
            c = !c;
        }
        j = i;
    }
    c
}

fn monte_carlo_area(path: &TipPath, n: usize) -> f64 {
    let bounds = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let ((x0, x1), (y0, y1)) = (bounds(&path.x), bounds(&path.y));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let hits = (0..n).filter(|_| inside(&path.x, &path.y, rng.gen_range(x0..x1), rng.gen_range(y0..y1))).count();
    hits as f64 / n as f64 * (x1 - x0) * (y1 - y0)
}

fn trajectory(report: &Report) -> Criterion {
    let mut c = Criterion::new("trajectory");
    let path = &report.tip_paths[0];
    let (x, y) = (path.x_range() * 1e3, path.y_range() * 1e3);
    c.check("x range", within(x, 8.0, 0.8), format!("{x:.3} mm (8 ± 0.8)"));
    c.check("y range", within(y, 5.0, 0.5), format!("{y:.3} mm (5 ± 0.5)"));
    let area = report.swept.as_ref().map_or(f64::NAN, |s| s.area);
    c.check("swept area", within(area * 1e6, 28.6, 1.5), format!("{:.3} mm2 (28.6 ± 1.5)", area * 1e6));
    let mc = monte_carlo_area(path, 400_000);
    let rel = (mc - area).abs() / area;
    c.check("monte-carlo oracle", rel <= 0.01, format!("relative difference {rel:.2e} (≤ 1e-2)"));
    c
}

fn locomotion(sweep: &[SweepRow]) -> Criterion {
    let mut c = Criterion::new("locomotion");
    let at = |f: f64| sweep.iter().find(|r| r.f_hz == f).unwrap();
    let speeds: Vec<f64> = [2.0, 3.0, 4.0].iter().map(|&f| at(f).gait.result.speed * 1e3).collect();
    let strides: Vec<f64> = [2.0, 3.0, 4.0].iter().map(|&f| at(f).gait.result.stride * 1e3).collect();
    let show = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    c.check("speed 2-4 Hz increasing", speeds.windows(2).all(|w| w[1] > w[0]), format!("[{}] mm/s", show(&speeds)));
    c.check(
        "strides 2-4 Hz",
        strides.iter().all(|s| (4.2..=5.5).contains(s)),
        format!("[{}] mm in [4.2, 5.5]", show(&strides)),
    );
    let one = &at(1.0).gait.result;
    c.check(
        "1 Hz",
        within(one.normalized_speed, 0.21, 0.02),
        format!("{:.3} mm/s, {:.4} BL/s (0.21 ± 0.02)", one.speed * 1e3, one.normalized_speed),
    );
    c
}

fn regime(sweep: &[SweepRow]) -> Criterion {
    let mut c = Criterion::new("regime");
    let reg: Vec<(f64, Option<Regime>)> = sweep.iter().map(|r| (r.f_hz, r.gait.result.regime)).collect();
    let low: Vec<&(f64, Option<Regime>)> = reg.iter().filter(|(f, _)| *f <= 4.0).collect();
    let walking_low = low.iter().all(|(_, r)| *r == Some(Regime::Walking));
    c.check("walking up to 4 Hz", walking_low, format!("{} frequencies", low.len()));
    let jump = reg.iter().find(|(f, _)| *f == 7.5).and_then(|(_, r)| *r);
    c.check("7.5 Hz", jump == Some(Regime::JumpLike), jump.map_or("-", |r| r.label()).to_string());
    let switches: Vec<f64> = reg.windows(2).filter(|w| w[0].1 != w[1].1).map(|w| w[1].0).collect();
    let unique = matches!(switches.as_slice(), [f] if *f > 4.0 && *f <= 7.5);
    c.check("unique transition", unique, format!("switches at {switches:?} Hz"));
    c
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism(dir: &Path) -> Criterion {
    let mut c = Criterion::new("determinism");
    for name in presets::names(Kind::Scenario) {
        let runs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
            .map(|k| {
                let out = dir.join(format!("{name}-{k}"));
                if name == "freq_sweep" {
                    cmd_sweep(&preset_input(name), None, Some(&out)).unwrap();
                } else {
                    cmd_simulate(&preset_input(name), Some(&out)).unwrap();
                }
                dir_bytes(&out)
            })
            .collect();
        c.check(name, runs[0] == runs[1], format!("{} files", runs[0].len()));
    }
    c
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let thresholds_fit = fit(&preset_input("single_dome"), "fig10_sim", dir);
    let (_, _, dome) = run(&thresholds_fit);
    let gains_fit = fit(&table_input("single_dome+fig10_sim", &thresholds_fit), "trajectory", dir);
    let (_, _, tip) = run(&gains_fit);

    let calibrated = [
        "models.dome.strong.p_snap_through_mbar",
        "models.dome.strong.p_snap_back_mbar",
        "models.dome.weak.p_snap_back_mbar",
        "kinematics.lateral_gain_mm",
        "kinematics.vertical_gain_mm",
    ];
    let mut walker = preset_table("quadruped_1hz");
    for p in calibrated {
        copy_number(&gains_fit, &mut walker, p);
    }
    let stride_fit = fit(&table_input("quadruped_1hz+calibrated", &walker), "stride_1hz", dir);
    let mut sweep_table = preset_table("freq_sweep");
    for p in calibrated.iter().chain(&["gait.contact_height_mm"]) {
        copy_number(&stride_fit, &mut sweep_table, p);
    }
    let sweep_sc = scenario_from_table(&sweep_table).unwrap();
    let freqs = sweep_sc.sweep.as_ref().unwrap().freqs_hz.clone();
    let sweep = sweep_rows(&sweep_sc, &sweep_table, &freqs).unwrap();

    let criteria = [
        thresholds(&dome),
        hysteresis(&dome),
        rc_oracle(),
        mass_conservation(&sweep),
        sequencing(),
        trajectory(&tip),
        locomotion(&sweep),
        regime(&sweep),
        determinism(dir),
    ];
    for c in &criteria {
        println!("{}", c.line());
    }
    let unexpected: Vec<String> = criteria
        .iter()
        .flat_map(|c| c.checks.iter().filter(|k| !k.1).map(move |k| (c.name, k.0)))
        .filter(|f| !EXPECTED_FAILURES.contains(f))
        .map(|(c, k)| format!("{c}: {k}"))
        .collect();
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
