//! The four commands. Each is a pure function of its inputs and writes its
//! artifacts plus a manifest into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use snapnet::analysis::fit::{fit_parameters, FitError, FitProblem, FitReport, FreeParameter, Target};
use snapnet::analysis::{events_from_states, loop_work, pv_loop_from_series, thresholds_from_pressure_log, detect_thresholds};
use snapnet::elements::Lobe;
use snapnet::gait::phase_diagram;
use snapnet::netsim::{read_trace_csv, simulate, write_events_csv, write_trace_csv, CheckedNetwork, Trace, TraceFile};

use crate::error::CliError;
use crate::manifest::{Input, Manifest};
use crate::presets;
use crate::report::{self, analyze, gait_summary, metrics, GaitSummary, Report};
use crate::scenario::{get_number, parse_scenario, scenario_from_table, set_number, Scenario, PA_PER_MBAR};

pub const DEFAULT_OUT_DIR: &str = "snapnet-out";
/// Jump size and look-ahead window used to pick snaps out of a sensor log.
pub const LOG_MIN_JUMP: f64 = 2.0 * PA_PER_MBAR;
pub const LOG_WINDOW: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub artifacts: Vec<String>,
    pub summary: String,
}

/// A file path, or the name of an embedded preset when no such file exists.
pub fn load_input(arg: &str, kind: presets::Kind) -> Result<Input, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(Input { label: arg.to_string(), bytes: fs::read(path)? });
    }
    match presets::lookup(kind, arg) {
        Some(text) => Ok(Input { label: format!("preset:{arg}"), bytes: text.as_bytes().to_vec() }),
        None => Err(CliError::Parse(format!(
            "`{arg}` is neither a file nor a {} preset (known: {})",
            kind.label(),
            presets::names(kind).join(", ")
        ))),
    }
}

pub fn load_file(arg: &str) -> Result<Input, CliError> {
    Ok(Input { label: arg.to_string(), bytes: fs::read(arg)? })
}

struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, names: Vec::new() })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.names.push(name.to_string());
        Ok(())
    }
}

fn resolve_out_dir(explicit: Option<&Path>, scenario: Option<&Scenario>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| scenario.and_then(|s| s.output_dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn load_scenario(input: &Input) -> Result<(Scenario, toml::Table, CheckedNetwork), CliError> {
    let (scenario, table) = parse_scenario(input.text()?).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", input.label)),
        other => other,
    })?;
    let net = scenario.check()?;
    Ok((scenario, table, net))
}

pub fn run_simulation(scenario: &Scenario, net: &CheckedNetwork) -> Result<Trace, CliError> {
    let cfg = scenario.solver_config()?;
    let t_end = scenario.t_end(net)?;
    simulate(net, &cfg, t_end).map_err(|e| CliError::Solver(e.to_string()))
}

fn trace_files(trace: &Trace, arts: &mut Artifacts) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf)?;
    arts.put("trace.csv", &buf)?;
    let mut buf = Vec::new();
    write_events_csv(&trace.events, &mut buf)?;
    arts.put("events.csv", &buf)?;
    Ok(())
}

fn report_artifacts(report: &Report, arts: &mut Artifacts) -> Result<String, CliError> {
    for (name, bytes) in report::report_files(report)? {
        arts.put(&name, &bytes)?;
    }
    let text = report::report_text(report);
    arts.put("report.txt", text.as_bytes())?;
    Ok(text)
}

pub fn cmd_simulate(scenario_in: &Input, out_dir: Option<&Path>) -> Result<Outcome, CliError> {
    let (scenario, table, net) = load_scenario(scenario_in)?;
    let trace = run_simulation(&scenario, &net)?;
    let report = analyze(&scenario, &net, &trace);
    let mut arts = Artifacts::new(resolve_out_dir(out_dir, Some(&scenario)))?;
    trace_files(&trace, &mut arts)?;
    let summary = report_artifacts(&report, &mut arts)?;
    Manifest {
        command: "simulate",
        inputs: vec![("scenario", scenario_in)],
        overrides: Vec::new(),
        parameters: Some(table),
        extra: toml::Table::new(),
    }
    .write(&arts.dir, &arts.names)?;
    Ok(Outcome { out_dir: arts.dir, artifacts: arts.names, summary })
}

/// Parse a comma-separated frequency list.
pub fn parse_freqs(list: &str) -> Result<Vec<f64>, CliError> {
    let items: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Parse("empty frequency list".into()));
    }
    items
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Parse(format!("bad frequency `{s}`"))))
        .collect()
}

/// Scenario with the swept source retuned to `f`.
pub fn at_frequency(table: &toml::Table, source: &str, f: f64) -> Result<Scenario, CliError> {
    let mut t = table.clone();
    set_number(&mut t, &format!("network.sources.{source}.frequency_hz"), f)?;
    scenario_from_table(&t)
}

pub struct SweepRow {
    pub f_hz: f64,
    pub gait: GaitSummary,
    pub mass_balance_error: f64,
    pub trace: Trace,
}

/// Simulate and measure the gait at each frequency. Rows come back sorted
/// by frequency.
pub fn sweep_rows(scenario: &Scenario, table: &toml::Table, freqs: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    if freqs.is_empty() {
        return Err(CliError::Parse("empty frequency list".into()));
    }
    if let Some(f) = freqs.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(CliError::Validation(format!("sweep frequency {f} must be positive")));
    }
    if scenario.gait.is_none() {
        return Err(CliError::Validation("sweep needs a gait section".into()));
    }
    let source = scenario.sweep_source()?;
    let mut freqs = freqs.to_vec();
    freqs.sort_by(f64::total_cmp);
    freqs
        .par_iter()
        .map(|&f| {
            let sc = at_frequency(table, &source, f)?;
            let net = sc.check()?;
            let trace = run_simulation(&sc, &net)?;
            let gait = gait_summary(&sc, &net, &trace).map_err(|e| CliError::Analysis(format!("{f} Hz: {e}")))?;
            Ok(SweepRow { f_hz: f, gait, mass_balance_error: trace.mass_balance_error(), trace })
        })
        .collect()
}

pub fn cmd_sweep(scenario_in: &Input, freqs: Option<&str>, out_dir: Option<&Path>) -> Result<Outcome, CliError> {
    let (scenario, table, _) = load_scenario(scenario_in)?;
    let list = match freqs {
        Some(s) => parse_freqs(s)?,
        None => match &scenario.sweep {
            Some(s) if !s.freqs_hz.is_empty() => s.freqs_hz.clone(),
            _ => return Err(CliError::Parse("no frequencies: pass --freqs or set sweep.freqs_hz".into())),
        },
    };
    let rows = sweep_rows(&scenario, &table, &list)?;
    let mut arts = Artifacts::new(resolve_out_dir(out_dir, Some(&scenario)))?;
    let gaits: Vec<&GaitSummary> = rows.iter().map(|r| &r.gait).collect();
    arts.put("sweep.csv", &report::gait_csv(&gaits)?)?;
    let mut text = format!("scenario: {}\n", scenario.label());
    for r in &rows {
        text.push_str(&format!(
            "{:.3} Hz: speed {:.3} mm/s, stride {:.3} mm, regime {}, mass balance error {:.3e} m3\n",
            r.f_hz,
            r.gait.result.speed * 1e3,
            r.gait.result.stride * 1e3,
            r.gait.result.regime.map_or("-", |g| g.label()),
            r.mass_balance_error
        ));
    }
    text.push_str("note: JUMP_LIKE speeds are ratchet-model values; ballistic motion is outside the model\n");
    arts.put("report.txt", text.as_bytes())?;
    let overrides = freqs.map(|f| vec![("freqs".to_string(), f.to_string())]).unwrap_or_default();
    Manifest { command: "sweep", inputs: vec![("scenario", scenario_in)], overrides, parameters: Some(table), extra: toml::Table::new() }
        .write(&arts.dir, &arts.names)?;
    Ok(Outcome { out_dir: arts.dir, artifacts: arts.names, summary: text })
}

pub fn cmd_analyze(trace_in: &Input, scenario_in: Option<&Input>, out_dir: Option<&Path>) -> Result<Outcome, CliError> {
    let file = read_trace_csv(trace_in.bytes.as_slice())?;
    let scenario = match scenario_in {
        Some(i) => Some(load_scenario(i)?),
        None => None,
    };
    let sc = scenario.as_ref().map(|(s, _, _)| s);
    let net = scenario.as_ref().map(|(_, _, n)| n);
    let mut arts = Artifacts::new(resolve_out_dir(out_dir, sc))?;
    let mut text = format!("input: {}\n", trace_in.label);
    let mut notes = Vec::new();
    match file {
        TraceFile::PressureLog(log) => {
            text.push_str("kind: pressure log\n");
            notes.push("PV work skipped: a pressure log carries no volume data".to_string());
            match thresholds_from_pressure_log(&log.times, &log.pressures, LOG_MIN_JUMP, LOG_WINDOW) {
                Ok(ts) => {
                    arts.put("thresholds.csv", &report::thresholds_csv(&ts)?)?;
                    text.push_str(&threshold_lines(&ts));
                }
                Err(_) => {
                    arts.put("thresholds.csv", &report::thresholds_csv(&[])?)?;
                    text.push_str("thresholds: NO_EVENTS\n");
                }
            }
        }
        TraceFile::Trace(tab) => {
            text.push_str("kind: simulation trace\n");
            let pick_node = |name: Option<&String>| -> usize {
                name.and_then(|n| tab.pressures.iter().position(|(p, _)| p == n)).unwrap_or(0)
            };
            let pv_idx = pick_node(sc.and_then(|s| s.analysis.pv_node.as_ref()));
            let volume: Vec<f64> = tab.injected.iter().zip(&tab.vented).map(|(i, o)| i - o).collect();
            let (node, p) = &tab.pressures[pv_idx];
            match pv_loop_from_series(&volume, p).and_then(|l| loop_work(&l)) {
                Ok(h) => {
                    let row = format!("node,w_in_mJ,w_out_mJ,h_percent\n{node},{:.6},{:.6},{:.6}\n", h.w_in * 1e3, h.w_out * 1e3, 100.0 * h.h);
                    arts.put("hysteresis.csv", row.as_bytes())?;
                    text.push_str(&format!(
                        "hysteresis at {node}: W_in {:.4} mJ, W_out {:.4} mJ, H {:.2} %\n",
                        h.w_in * 1e3,
                        h.w_out * 1e3,
                        100.0 * h.h
                    ));
                }
                Err(e) => notes.push(format!("PV loop at `{node}`: {e}")),
            }

            // Each lobe needs the pressure of its own node.
            let mut lobe_p: Vec<&[f64]> = Vec::new();
            let mut states = Vec::new();
            let mut resolved = true;
            for (el, lobe, st) in &tab.states {
                let node = match net.and_then(|n| n.element_index(el).map(|i| n.elements[i].node)) {
                    Some(i) => net.map(|n| n.node_names[i].clone()),
                    None if tab.pressures.len() == 1 => Some(tab.pressures[0].0.clone()),
                    None => None,
                };
                let Some(col) = node.and_then(|n| tab.pressures.iter().position(|(p, _)| *p == n)) else {
                    resolved = false;
                    break;
                };
                lobe_p.push(&tab.pressures[col].1);
                let l = if lobe == "weak" { Lobe::Weak } else { Lobe::Strong };
                states.push((el.clone(), l, st.clone()));
            }
            if !resolved {
                notes.push("thresholds skipped: element nodes are ambiguous without --scenario".to_string());
            } else {
                let events = events_from_states(&tab.times, &lobe_p, &states);
                match detect_thresholds(&events) {
                    Ok(ts) => {
                        arts.put("thresholds.csv", &report::thresholds_csv(&ts)?)?;
                        text.push_str(&threshold_lines(&ts));
                    }
                    Err(_) => {
                        arts.put("thresholds.csv", &report::thresholds_csv(&[])?)?;
                        text.push_str("thresholds: NO_EVENTS\n");
                    }
                }
                match (sc, net.and_then(|n| n.drive_period())) {
                    (Some(s), Some(period)) if s.gait.is_some() => {
                        let legs = &s.gait.as_ref().map(|g| g.legs.clone()).unwrap_or_default();
                        let t1 = tab.times.last().copied().unwrap_or(0.0) - period;
                        match phase_diagram(&events, period, legs, 0.0, t1) {
                            Ok(ph) => arts.put("phases.csv", &report::phases_csv(&ph)?)?,
                            Err(e) => notes.push(format!("phases: {e}")),
                        }
                    }
                    _ => notes.push("phases skipped: needs --scenario with a gait section and a periodic source".into()),
                }
            }
        }
    }
    for n in &notes {
        text.push_str(&format!("note: {n}\n"));
    }
    arts.put("report.txt", text.as_bytes())?;
    let mut inputs = vec![("trace", trace_in)];
    if let Some(i) = scenario_in {
        inputs.push(("scenario", i));
    }
    Manifest { command: "analyze", inputs, overrides: Vec::new(), parameters: None, extra: toml::Table::new() }
        .write(&arts.dir, &arts.names)?;
    Ok(Outcome { out_dir: arts.dir, artifacts: arts.names, summary: text })
}

fn threshold_lines(ts: &[snapnet::analysis::LobeThresholds]) -> String {
    let mut s = String::from("thresholds:\n");
    for t in ts {
        let f = |v: Option<f64>| v.map_or("none".to_string(), |p| format!("{:.2} mbar", p / PA_PER_MBAR));
        s.push_str(&format!("  {} {}: snap-through {}, snap-back {}\n", t.element, t.lobe.label(), f(t.snap_through), f(t.snap_back)));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub max_evals: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub params: Vec<ParamDef>,
    pub targets: Vec<TargetDef>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDef {
    /// Dotted scenario path, in the units of that field.
    pub path: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub initial: Option<f64>,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDef {
    pub metric: String,
    pub value: f64,
    #[serde(default = "unit_weight")]
    pub weight: f64,
    #[serde(default)]
    pub scale: Option<f64>,
}

pub const DEFAULT_MAX_EVALS: usize = 400;
pub const DEFAULT_TOL: f64 = 1e-6;

pub fn parse_targets(input: &Input) -> Result<TargetsFile, CliError> {
    toml::from_str(input.text()?).map_err(|e: toml::de::Error| CliError::Parse(format!("{}: {e}", input.label)))
}

/// Reject target sets no SnapSpec can meet.
pub fn check_targets(t: &TargetsFile) -> Result<(), CliError> {
    for back in &t.targets {
        let Some(lobe) = back.metric.strip_suffix(".p_snap_back_mbar") else { continue };
        let through = format!("{lobe}.p_snap_through_mbar");
        if let Some(st) = t.targets.iter().find(|x| x.metric == through) {
            if back.value > st.value {
                return Err(CliError::Validation(format!(
                    "infeasible target: {lobe} snap-back {} mbar exceeds snap-through {} mbar (need p_snap_back < p_snap_through)",
                    back.value, st.value
                )));
            }
        }
    }
    Ok(())
}

/// Keys of the sections that change the simulated trace.
const SIM_SECTIONS: [&str; 4] = ["network", "models", "solver", "simulation"];

fn sim_key(t: &toml::Table) -> String {
    let sub: toml::Table = SIM_SECTIONS.iter().filter_map(|k| t.get(*k).map(|v| (k.to_string(), v.clone()))).collect();
    toml::to_string(&sub).unwrap_or_default()
}

/// Evaluate the fit targets for a scenario table. Traces are reused while
/// only analysis-side parameters change.
pub struct Evaluator {
    metrics: Vec<String>,
    cache: Option<(String, CheckedNetwork, Trace)>,
}

impl Evaluator {
    pub fn new(metrics: Vec<String>) -> Self {
        Self { metrics, cache: None }
    }

    pub fn evaluate(&mut self, table: &toml::Table) -> Result<(Vec<f64>, Report), CliError> {
        let scenario = scenario_from_table(table)?;
        let key = sim_key(table);
        let hit = matches!(&self.cache, Some((k, _, _)) if *k == key);
        if !hit {
            let net = scenario.check()?;
            let trace = run_simulation(&scenario, &net)?;
            self.cache = Some((key, net, trace));
        }
        let (_, net, trace) = self.cache.as_ref().expect("cache filled above");
        let report = analyze(&scenario, net, trace);
        let m = metrics(&report);
        let mut values = Vec::with_capacity(self.metrics.len());
        for name in &self.metrics {
            match m.get(name) {
                Some(v) => values.push(*v),
                None => {
                    let why = if report.notes.is_empty() { String::new() } else { format!(" ({})", report.notes.join("; ")) };
                    return Err(CliError::Analysis(format!("metric `{name}` unavailable{why}")));
                }
            }
        }
        Ok((values, report))
    }
}

pub struct FitRun {
    pub report: FitReport,
    pub fitted: toml::Table,
    pub problem: FitProblem,
}

pub fn run_fit(table: &toml::Table, targets: &TargetsFile, seed: u64, tol: f64) -> Result<FitRun, CliError> {
    check_targets(targets)?;
    let mut params = Vec::new();
    for p in &targets.params {
        let current = get_number(table, &p.path)
            .ok_or_else(|| CliError::Validation(format!("parameter path `{}` does not name a number in the scenario", p.path)))?;
        params.push(FreeParameter { name: p.path.clone(), lower: p.lower, upper: p.upper, initial: p.initial.unwrap_or(current) });
    }
    let fit_targets: Vec<Target> = targets
        .targets
        .iter()
        .map(|t| {
            let mut x = Target::new(&t.metric, t.value, t.weight);
            if let Some(s) = t.scale {
                x.scale = s;
            }
            x
        })
        .collect();
    let problem = FitProblem {
        params,
        targets: fit_targets,
        max_evals: targets.max_evals.unwrap_or(DEFAULT_MAX_EVALS),
        tol,
        seed,
    };
    problem.check().map_err(|e| CliError::Validation(e.to_string()))?;
    let with = |x: &[f64]| -> Result<toml::Table, CliError> {
        let mut t = table.clone();
        for (p, v) in problem.params.iter().zip(x) {
            set_number(&mut t, &p.name, *v)?;
        }
        Ok(t)
    };
    let mut eval = Evaluator::new(problem.targets.iter().map(|t| t.name.clone()).collect());
    let report = fit_parameters(&problem, |x| {
        let t = with(x).map_err(|e| e.to_string())?;
        eval.evaluate(&t).map(|(v, _)| v).map_err(|e| e.to_string())
    })
    .map_err(|e| match e {
        FitError::Invalid(m) => CliError::Validation(m),
        e @ FitError::EvaluatorFailure { .. } => CliError::Solver(e.to_string()),
    })?;
    let fitted = with(&report.params)?;
    Ok(FitRun { report, fitted, problem })
}

pub fn cmd_fit(
    scenario_in: &Input,
    targets_in: &Input,
    seed: Option<u64>,
    tol: Option<f64>,
    out_dir: Option<&Path>,
) -> Result<Outcome, CliError> {
    let (scenario, table, _) = load_scenario(scenario_in)?;
    let targets = parse_targets(targets_in)?;
    let seed_v = seed.or(targets.seed).or(scenario.seed).unwrap_or(0);
    let tol_v = tol.or(targets.tol).unwrap_or(DEFAULT_TOL);
    let run = run_fit(&table, &targets, seed_v, tol_v)?;

    let text = toml::to_string_pretty(&run.fitted).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let (reparsed, _) = parse_scenario(&text)?;
    if reparsed != scenario_from_table(&run.fitted)? {
        return Err(CliError::Validation("fitted scenario does not re-parse identically".into()));
    }
    reparsed.check()?;

    let mut arts = Artifacts::new(resolve_out_dir(out_dir, Some(&scenario)))?;
    arts.put("fitted.toml", text.as_bytes())?;
    let r = &run.report;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path", "initial", "fitted", "lower", "upper"])?;
    for (p, v) in run.problem.params.iter().zip(&r.params) {
        w.write_record([p.name.clone(), format!("{}", p.initial), format!("{v}"), format!("{}", p.lower), format!("{}", p.upper)])?;
    }
    arts.put("fit_params.csv", &w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "target", "value", "residual", "weight"])?;
    for ((t, v), res) in run.problem.targets.iter().zip(&r.values).zip(&r.residuals) {
        w.write_record([t.name.clone(), format!("{}", t.value), format!("{v:.6}"), format!("{res:.6e}"), format!("{}", t.weight)])?;
    }
    arts.put("fit_report.csv", &w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["eval".to_string()];
    header.extend(run.problem.params.iter().map(|p| p.name.clone()));
    header.extend(run.problem.targets.iter().map(|t| t.name.clone()));
    header.push("objective".into());
    w.write_record(&header)?;
    for (k, e) in r.log.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(e.params.iter().map(|v| format!("{v}")));
        row.extend(e.values.iter().map(|v| format!("{v}")));
        row.push(format!("{:e}", e.objective));
        w.write_record(&row)?;
    }
    arts.put("fit_log.csv", &w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)?;

    let mut summary = format!(
        "targets: {}\nevaluations: {}\nrestarts: {}\nconverged: {}\nobjective: {:.6e} (initial {:.6e})\n",
        targets.name.as_deref().unwrap_or(&targets_in.label),
        r.log.len(),
        r.restarts,
        r.converged,
        r.objective,
        r.initial_objective
    );
    for (p, v) in run.problem.params.iter().zip(&r.params) {
        summary.push_str(&format!("  {} = {v:.6} (from {:.6})\n", p.name, p.initial));
    }
    for ((t, v), res) in run.problem.targets.iter().zip(&r.values).zip(&r.residuals) {
        summary.push_str(&format!("  {}: {v:.4} vs target {} (residual {:+.3} %)\n", t.name, t.value, 100.0 * res));
    }
    arts.put("report.txt", summary.as_bytes())?;

    let mut overrides = Vec::new();
    if let Some(s) = seed {
        overrides.push(("seed".to_string(), s.to_string()));
    }
    if let Some(t) = tol {
        overrides.push(("tol".to_string(), format!("{t:e}")));
    }
    let mut extra = toml::Table::new();
    let mut fit = toml::Table::new();
    fit.insert("seed".into(), (seed_v as i64).into());
    fit.insert("tol".into(), tol_v.into());
    fit.insert("converged".into(), r.converged.into());
    fit.insert("evaluations".into(), (r.log.len() as i64).into());
    fit.insert("objective".into(), r.objective.into());
    let fitted: toml::Table = run.problem.params.iter().zip(&r.params).map(|(p, v)| (p.name.clone(), (*v).into())).collect();
    fit.insert("fitted".into(), fitted.into());
    extra.insert("fit".into(), fit.into());
    Manifest {
        command: "fit",
        inputs: vec![("scenario", scenario_in), ("targets", targets_in)],
        overrides,
        parameters: Some(run.fitted.clone()),
        extra,
    }
    .write(&arts.dir, &arts.names)?;
    if !r.converged {
        return Err(CliError::MaxEvals(run.problem.max_evals));
    }
    Ok(Outcome { out_dir: arts.dir, artifacts: arts.names, summary })
}
