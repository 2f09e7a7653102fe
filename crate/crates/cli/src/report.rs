//! Analysis of a simulated trace and the CSV/text reports written from it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use snapnet::analysis::{detect_thresholds, loop_work, pv_loop_from_trace, sequencing_delay, HysteresisReport, LobeThresholds};
use snapnet::gait::{
    body_displacement, classify_regime, phase_diagram, swept_area, tip_trajectory, GaitResult, LegPhases, Orientation,
    RegimeReport, SweptArea, TipPath,
};
use snapnet::netsim::{CheckedNetwork, Trace};

use crate::scenario::{Scenario, M_PER_MM, PA_PER_MBAR};

#[derive(Debug, Clone, PartialEq)]
pub enum Thresholds {
    Disabled,
    NoEvents,
    Found(Vec<LobeThresholds>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitSummary {
    pub f_hz: f64,
    pub result: GaitResult,
    pub regime: Option<RegimeReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub events: usize,
    pub mass_balance_error: f64,
    pub hysteresis: Option<(String, HysteresisReport)>,
    pub thresholds: Thresholds,
    pub tip_paths: Vec<TipPath>,
    pub swept: Option<SweptArea>,
    pub gait: Option<GaitSummary>,
    pub delay: Option<f64>,
    pub notes: Vec<String>,
}

/// Gait over the trace after the settling periods.
pub fn gait_summary(scenario: &Scenario, net: &CheckedNetwork, trace: &Trace) -> Result<GaitSummary, String> {
    let (Some(g), Some(kin), Some(contact)) = (&scenario.gait, scenario.tip_kinematics(), scenario.contact_model()) else {
        return Err("no gait section".into());
    };
    let period = net.drive_period().ok_or("gait needs a periodic source")?;
    let t_end = trace.times.last().copied().unwrap_or(0.0);
    let t0 = g.settle_periods * period;
    if t0 + period > t_end + 1e-9 * period {
        return Err(format!("trace of {t_end} s leaves no full period after settling"));
    }
    let mut paths = Vec::with_capacity(g.legs.len());
    for leg in &g.legs {
        paths.push(tip_trajectory(trace, leg, &kin).map_err(|e| e.to_string())?.window(t0, t_end));
    }
    let phases: Vec<LegPhases> = phase_diagram(&trace.events, period, &g.legs, t0, t_end - period).map_err(|e| e.to_string())?;
    let mut result = body_displacement(&paths, &contact, period, phases).map_err(|e| e.to_string())?;
    let regime = match scenario.groups() {
        Some(groups) => Some(classify_regime(trace, &groups, period).map_err(|e| e.to_string())?),
        None => None,
    };
    result.regime = regime.map(|r| r.regime);
    Ok(GaitSummary { f_hz: 1.0 / period, result, regime })
}

pub fn analyze(scenario: &Scenario, net: &CheckedNetwork, trace: &Trace) -> Report {
    let mut notes = Vec::new();
    let hysteresis = scenario.analysis.pv_node.as_ref().and_then(|node| {
        let idx = trace.node_index(node)?;
        match pv_loop_from_trace(trace, idx).and_then(|l| loop_work(&l)) {
            Ok(h) => Some((node.clone(), h)),
            Err(e) => {
                notes.push(format!("PV loop at `{node}`: {e}"));
                None
            }
        }
    });
    let thresholds = if !scenario.analysis.thresholds {
        Thresholds::Disabled
    } else {
        match detect_thresholds(&trace.events) {
            Ok(t) => Thresholds::Found(t),
            Err(_) => Thresholds::NoEvents,
        }
    };

    let mut tip_paths = Vec::new();
    let mut swept = None;
    if let Some(kin) = scenario.tip_kinematics() {
        let (t0, t1) = scenario.analysis.trajectory_window_s.map_or((f64::NEG_INFINITY, f64::INFINITY), |w| (w[0], w[1]));
        for name in &scenario.analysis.trajectory {
            match tip_trajectory(trace, name, &kin) {
                Ok(p) => tip_paths.push(p.window(t0, t1)),
                Err(e) => notes.push(format!("tip path `{name}`: {e}")),
            }
        }
        if let Some(first) = tip_paths.first() {
            match swept_area(first) {
                Ok(a) => swept = Some(a),
                Err(e) => notes.push(format!("swept area of `{}`: {e}", first.leg)),
            }
        }
    }

    let gait = if scenario.gait.is_some() {
        match gait_summary(scenario, net, trace) {
            Ok(g) => Some(g),
            Err(e) => {
                notes.push(format!("gait: {e}"));
                None
            }
        }
    } else {
        None
    };

    let delay = scenario.groups().and_then(|groups| {
        let period = net.drive_period();
        let settle = scenario.gait.as_ref().map_or(0.0, |g| g.settle_periods);
        let (t0, t1) = match period {
            Some(p) => (settle * p, (settle + 1.0) * p),
            None => (0.0, f64::INFINITY),
        };
        match sequencing_delay(&trace.events, &groups, t0, t1) {
            Ok(d) => Some(d),
            Err(e) => {
                notes.push(format!("sequencing delay: {e}"));
                None
            }
        }
    });

    Report {
        scenario: scenario.label().to_string(),
        events: trace.events.len(),
        mass_balance_error: trace.mass_balance_error(),
        hysteresis,
        thresholds,
        tip_paths,
        swept,
        gait,
        delay,
        notes,
    }
}

/// Named scalar results, the vocabulary of fit targets.
pub fn metrics(report: &Report) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    if let Some((_, h)) = &report.hysteresis {
        m.insert("h_percent".into(), 100.0 * h.h);
        m.insert("w_in_mJ".into(), h.w_in * 1e3);
        m.insert("w_out_mJ".into(), h.w_out * 1e3);
    }
    if let Thresholds::Found(ts) = &report.thresholds {
        for t in ts {
            let key = format!("{}.{}", t.element, t.lobe.label());
            if let Some(p) = t.snap_through {
                m.insert(format!("{key}.p_snap_through_mbar"), p / PA_PER_MBAR);
            }
            if let Some(p) = t.snap_back {
                m.insert(format!("{key}.p_snap_back_mbar"), p / PA_PER_MBAR);
            }
        }
    }
    if let Some(p) = report.tip_paths.first() {
        m.insert("x_range_mm".into(), p.x_range() / M_PER_MM);
        m.insert("y_range_mm".into(), p.y_range() / M_PER_MM);
    }
    if let Some(a) = &report.swept {
        m.insert("swept_area_mm2".into(), a.area / (M_PER_MM * M_PER_MM));
    }
    if let Some(g) = &report.gait {
        m.insert("speed_mm_s".into(), g.result.speed / M_PER_MM);
        m.insert("stride_mm".into(), g.result.stride / M_PER_MM);
        m.insert("bl_per_s".into(), g.result.normalized_speed);
    }
    if let Some(d) = report.delay {
        m.insert("delay_ms".into(), d * 1e3);
    }
    m
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

fn opt(v: Option<f64>, scale: f64) -> String {
    v.map_or(String::new(), |x| format!("{:.6}", x / scale))
}

pub const GAIT_HEADER: [&str; 5] = ["f_hz", "speed_mm_s", "stride_mm", "regime", "bl_per_s"];

pub fn gait_row(g: &GaitSummary) -> Vec<String> {
    vec![
        format!("{:.6}", g.f_hz),
        format!("{:.6}", g.result.speed / M_PER_MM),
        format!("{:.6}", g.result.stride / M_PER_MM),
        g.result.regime.map_or("", |r| r.label()).to_string(),
        format!("{:.6}", g.result.normalized_speed),
    ]
}

pub fn gait_csv(rows: &[&GaitSummary]) -> Result<Vec<u8>, csv::Error> {
    csv_bytes(&GAIT_HEADER, rows.iter().map(|g| gait_row(g)))
}

pub fn thresholds_csv(ts: &[LobeThresholds]) -> Result<Vec<u8>, csv::Error> {
    csv_bytes(
        &["element", "lobe", "p_snap_through_mbar", "p_snap_back_mbar"],
        ts.iter().map(|t| {
            vec![
                t.element.clone(),
                t.lobe.label().to_string(),
                opt(t.snap_through, PA_PER_MBAR),
                opt(t.snap_back, PA_PER_MBAR),
            ]
        }),
    )
}

pub fn phases_csv(phases: &[LegPhases]) -> Result<Vec<u8>, csv::Error> {
    csv_bytes(
        &["leg", "cycle", "start", "end"],
        phases.iter().flat_map(|l| {
            l.intervals
                .iter()
                .map(|i| vec![l.leg.clone(), i.cycle.to_string(), format!("{:.6}", i.start), format!("{:.6}", i.end)])
        }),
    )
}

/// CSV artifacts of a report as (file name, bytes).
pub fn report_files(report: &Report) -> Result<Vec<(String, Vec<u8>)>, csv::Error> {
    let mut files = Vec::new();
    if let Some((node, h)) = &report.hysteresis {
        let row = vec![
            node.clone(),
            format!("{:.6}", h.w_in * 1e3),
            format!("{:.6}", h.w_out * 1e3),
            format!("{:.6}", 100.0 * h.h),
        ];
        files.push(("hysteresis.csv".into(), csv_bytes(&["node", "w_in_mJ", "w_out_mJ", "h_percent"], [row])?));
    }
    match &report.thresholds {
        Thresholds::Disabled => {}
        Thresholds::NoEvents => files.push(("thresholds.csv".into(), thresholds_csv(&[])?)),
        Thresholds::Found(ts) => files.push(("thresholds.csv".into(), thresholds_csv(ts)?)),
    }
    if !report.tip_paths.is_empty() {
        let rows = report.tip_paths.iter().flat_map(|p| {
            (0..p.t.len()).map(move |k| {
                vec![
                    format!("{:.9}", p.t[k]),
                    p.leg.clone(),
                    format!("{:.6}", p.x[k] / M_PER_MM),
                    format!("{:.6}", p.y[k] / M_PER_MM),
                ]
            })
        });
        files.push(("tip_paths.csv".into(), csv_bytes(&["t_s", "leg", "x_mm", "y_mm"], rows)?));
    }
    if let Some(g) = &report.gait {
        files.push(("gait.csv".into(), gait_csv(&[g])?));
        files.push(("phases.csv".into(), phases_csv(&g.result.phases)?));
    }
    Ok(files)
}

pub fn report_text(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", report.scenario);
    let _ = writeln!(s, "events: {}", report.events);
    let _ = writeln!(s, "mass balance error: {:.3e} m3", report.mass_balance_error);
    if let Some((node, h)) = &report.hysteresis {
        let _ = writeln!(
            s,
            "hysteresis at {node}: W_in {:.4} mJ, W_out {:.4} mJ, H {:.2} %",
            h.w_in * 1e3,
            h.w_out * 1e3,
            100.0 * h.h
        );
    }
    match &report.thresholds {
        Thresholds::Disabled => {}
        Thresholds::NoEvents => s.push_str("thresholds: NO_EVENTS\n"),
        Thresholds::Found(ts) => {
            s.push_str("thresholds:\n");
            for t in ts {
                let f = |v: Option<f64>| v.map_or("none".to_string(), |p| format!("{:.2} mbar", p / PA_PER_MBAR));
                let _ = writeln!(
                    s,
                    "  {} {}: snap-through {}, snap-back {}",
                    t.element,
                    t.lobe.label(),
                    f(t.snap_through),
                    f(t.snap_back)
                );
            }
        }
    }
    if let Some(p) = report.tip_paths.first() {
        let _ = write!(s, "trajectory of {}: x-range {:.3} mm, y-range {:.3} mm", p.leg, p.x_range() / M_PER_MM, p.y_range() / M_PER_MM);
        if let Some(a) = &report.swept {
            let dir = match a.orientation {
                Orientation::CounterClockwise => "counterclockwise",
                Orientation::Clockwise => "clockwise",
                Orientation::Degenerate => "degenerate",
            };
            let _ = write!(s, ", swept area {:.3} mm2 ({dir})", a.area / (M_PER_MM * M_PER_MM));
        }
        s.push('\n');
    }
    if let Some(g) = &report.gait {
        let _ = writeln!(
            s,
            "gait at {:.3} Hz: speed {:.3} mm/s, stride {:.3} mm, {:.4} BL/s",
            g.f_hz,
            g.result.speed / M_PER_MM,
            g.result.stride / M_PER_MM,
            g.result.normalized_speed
        );
        if let Some(r) = g.regime {
            let warn = if r.zero_events { " (warning: no strong-lobe snap-through in the final period)" } else { "" };
            let _ = writeln!(s, "regime: {}{warn}", r.regime.label());
        }
    }
    if let Some(d) = report.delay {
        let _ = writeln!(s, "sequencing delay (rear to front): {:.3} ms", d * 1e3);
    }
    for n in &report.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}
