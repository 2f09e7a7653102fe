//! PV-loop energetics, snap thresholds, sequencing delay and parameter fitting.

pub mod fit;

use thiserror::Error;

use crate::elements::{Branch, Lobe};
use crate::gait::Groups;
use crate::netsim::{EventKind, SnapEvent, Trace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("{segment} segment is not monotone in volume at sample {index}")]
    NonmonotoneSegment { segment: &'static str, index: usize },
    #[error("loop segments do not share endpoints")]
    OpenLoop,
    #[error("no snap events")]
    NoEvents,
    #[error("no strong-lobe snap-through for the {0} group in the window")]
    MissingGroupEvent(&'static str),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Pressure-volume samples split into a loading and an unloading pass.
/// Points are (volume m³, pressure Pa).
#[derive(Debug, Clone, PartialEq)]
pub struct PvLoop {
    pub loading: Vec<(f64, f64)>,
    pub unloading: Vec<(f64, f64)>,
}

impl PvLoop {
    /// Checks segment monotonicity and that the segments meet at both ends
    /// within `closure_tol` of the volume span.
    pub fn new(loading: Vec<(f64, f64)>, unloading: Vec<(f64, f64)>, closure_tol: f64) -> Result<Self, AnalysisError> {
        if loading.len() < 2 || unloading.len() < 2 {
            return Err(AnalysisError::Invalid("each segment needs two samples".into()));
        }
        if let Some(i) = (1..loading.len()).find(|&i| loading[i].0 < loading[i - 1].0) {
            return Err(AnalysisError::NonmonotoneSegment { segment: "loading", index: i });
        }
        if let Some(i) = (1..unloading.len()).find(|&i| unloading[i].0 > unloading[i - 1].0) {
            return Err(AnalysisError::NonmonotoneSegment { segment: "unloading", index: i });
        }
        let span = loading[loading.len() - 1].0 - loading[0].0;
        let tol = closure_tol * span.abs();
        if (loading[loading.len() - 1].0 - unloading[0].0).abs() > tol
            || (unloading[unloading.len() - 1].0 - loading[0].0).abs() > tol
        {
            return Err(AnalysisError::OpenLoop);
        }
        Ok(Self { loading, unloading })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisReport {
    pub w_in: f64,
    pub w_out: f64,
    pub h: f64,
}

fn trapezoid(seg: &[(f64, f64)]) -> f64 {
    seg.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum()
}

/// Loading and recovered work by trapezoidal quadrature.
pub fn loop_work(pv: &PvLoop) -> Result<HysteresisReport, AnalysisError> {
    if let Some(i) = (1..pv.loading.len()).find(|&i| pv.loading[i].0 < pv.loading[i - 1].0) {
        return Err(AnalysisError::NonmonotoneSegment { segment: "loading", index: i });
    }
    if let Some(i) = (1..pv.unloading.len()).find(|&i| pv.unloading[i].0 > pv.unloading[i - 1].0) {
        return Err(AnalysisError::NonmonotoneSegment { segment: "unloading", index: i });
    }
    let w_in = trapezoid(&pv.loading);
    let w_out = -trapezoid(&pv.unloading);
    if w_in == 0.0 {
        return Err(AnalysisError::Invalid("zero loading work".into()));
    }
    Ok(HysteresisReport { w_in, w_out, h: (w_in - w_out) / w_in })
}

/// Loop from volume and pressure series: loading up to the first sample at
/// maximum volume, unloading from the last such sample down to the first
/// return to the minimum that follows.
pub fn pv_loop_from_series(volume: &[f64], pressure: &[f64]) -> Result<PvLoop, AnalysisError> {
    if volume.len() != pressure.len() || volume.len() < 3 {
        return Err(AnalysisError::Invalid("volume and pressure series must match".into()));
    }
    let vmax = volume.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first_max = volume.iter().position(|&v| v == vmax).unwrap_or(0);
    let last_max = volume.iter().rposition(|&v| v == vmax).unwrap_or(0);
    let v0 = volume[0];
    let end = (last_max..volume.len()).find(|&k| volume[k] <= v0).unwrap_or(volume.len() - 1);
    let pts = |a: usize, b: usize| (a..=b).map(|k| (volume[k], pressure[k])).collect::<Vec<_>>();
    PvLoop::new(pts(0, first_max), pts(last_max, end), 1e-3)
}

/// PV loop of a node against net injected volume.
pub fn pv_loop_from_trace(trace: &Trace, node: usize) -> Result<PvLoop, AnalysisError> {
    let v: Vec<f64> = trace.injected.iter().zip(&trace.vented).map(|(i, o)| i - o).collect();
    let p = trace.pressures.get(node).ok_or_else(|| AnalysisError::Invalid(format!("no node {node}")))?;
    pv_loop_from_series(&v, p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LobeThresholds {
    pub element: String,
    pub lobe: Lobe,
    /// Mean node pressure at snap-through events (Pa).
    pub snap_through: Option<f64>,
    /// Mean node pressure at snap-back events (Pa).
    pub snap_back: Option<f64>,
}

/// Per-lobe threshold pressures from the recorded events, ordered by
/// first appearance.
pub fn detect_thresholds(events: &[SnapEvent]) -> Result<Vec<LobeThresholds>, AnalysisError> {
    if events.is_empty() {
        return Err(AnalysisError::NoEvents);
    }
    let mut keys: Vec<(usize, String, Lobe)> = Vec::new();
    for e in events {
        if !keys.iter().any(|(i, _, l)| *i == e.element_index && *l == e.lobe) {
            keys.push((e.element_index, e.element.clone(), e.lobe));
        }
    }
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.cmp(&b.2)));
    let mean = |idx: usize, lobe: Lobe, kind: EventKind| {
        let v: Vec<f64> = events
            .iter()
            .filter(|e| e.element_index == idx && e.lobe == lobe && e.kind == kind)
            .map(|e| e.pressure)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(keys
        .into_iter()
        .map(|(idx, element, lobe)| LobeThresholds {
            element,
            lobe,
            snap_through: mean(idx, lobe, EventKind::SnapThrough),
            snap_back: mean(idx, lobe, EventKind::SnapBack),
        })
        .collect())
}

/// Events reconstructed from sampled branch-state series. The pressure is
/// taken at the last sample before the switch.
pub fn events_from_states(
    times: &[f64],
    pressure_of_lobe: &[&[f64]],
    states: &[(String, Lobe, Vec<Branch>)],
) -> Vec<SnapEvent> {
    let mut names: Vec<&str> = Vec::new();
    let mut out = Vec::new();
    for (li, (element, lobe, st)) in states.iter().enumerate() {
        let idx = match names.iter().position(|n| n == element) {
            Some(i) => i,
            None => {
                names.push(element);
                names.len() - 1
            }
        };
        for k in 1..st.len() {
            if st[k] != st[k - 1] {
                out.push(SnapEvent {
                    t: times[k],
                    element: element.clone(),
                    element_index: idx,
                    lobe: *lobe,
                    kind: if st[k] == Branch::PostSnap { EventKind::SnapThrough } else { EventKind::SnapBack },
                    pressure: pressure_of_lobe[li][k - 1],
                });
            }
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.element_index.cmp(&b.element_index)).then(a.lobe.cmp(&b.lobe)));
    out
}

/// Thresholds from a bare pressure log of one element driven by an
/// inject/withdraw ramp. A snap-through shows as a local maximum followed
/// by a drop of at least `min_jump` within `window` seconds, a snap-back
/// as a local minimum followed by a rise of the same size. With two or more
/// jumps of a kind the first is the weak lobe and the last the strong lobe;
/// a single jump is attributed to the strong lobe.
pub fn thresholds_from_pressure_log(
    times: &[f64],
    pressure: &[f64],
    min_jump: f64,
    window: f64,
) -> Result<Vec<LobeThresholds>, AnalysisError> {
    if times.len() != pressure.len() || times.len() < 3 {
        return Err(AnalysisError::Invalid("pressure log too short".into()));
    }
    let n = pressure.len();
    let mut drops = Vec::new();
    let mut rises = Vec::new();
    for k in 1..n - 1 {
        let later = (k + 1..n).take_while(|&j| times[j] - times[k] <= window);
        if pressure[k] >= pressure[k - 1] && pressure[k] > pressure[k + 1] {
            let low = later.map(|j| pressure[j]).fold(f64::INFINITY, f64::min);
            if pressure[k] - low >= min_jump {
                drops.push(pressure[k]);
            }
        } else if pressure[k] <= pressure[k - 1] && pressure[k] < pressure[k + 1] {
            let high = later.map(|j| pressure[j]).fold(f64::NEG_INFINITY, f64::max);
            if high - pressure[k] >= min_jump {
                rises.push(pressure[k]);
            }
        }
    }
    if drops.is_empty() && rises.is_empty() {
        return Err(AnalysisError::NoEvents);
    }
    let weak = |v: &[f64]| if v.len() > 1 { v.first().copied() } else { None };
    let lobe = |lobe: Lobe, st: Option<f64>, sb: Option<f64>| LobeThresholds {
        element: "log".into(),
        lobe,
        snap_through: st,
        snap_back: sb,
    };
    Ok(vec![
        lobe(Lobe::Weak, weak(&drops), weak(&rises)),
        lobe(Lobe::Strong, drops.last().copied(), rises.last().copied()),
    ])
}

/// Time from the first rear-group strong-lobe snap-through to the first
/// front-group one within `[t0, t1)`.
pub fn sequencing_delay(events: &[SnapEvent], groups: &Groups, t0: f64, t1: f64) -> Result<f64, AnalysisError> {
    let first = |names: &[String]| {
        events
            .iter()
            .filter(|e| {
                e.lobe == Lobe::Strong
                    && e.kind == EventKind::SnapThrough
                    && e.t >= t0
                    && e.t < t1
                    && names.iter().any(|n| *n == e.element)
            })
            .map(|e| e.t)
            .fold(f64::INFINITY, f64::min)
    };
    let rear = first(&groups.rear);
    if rear.is_infinite() {
        return Err(AnalysisError::MissingGroupEvent("rear"));
    }
    let front = first(&groups.front);
    if front.is_infinite() {
        return Err(AnalysisError::MissingGroupEvent("front"));
    }
    Ok(front - rear)
}
