//! Foot-tip kinematics, swept area, ratchet locomotion and gait regime.

use thiserror::Error;

use crate::elements::{build_cubic_pv, Branch, Lobe};
use crate::netsim::{EventKind, SnapEvent, Trace};

/// Robot body length used for normalised speed (m).
pub const BODY_LENGTH: f64 = 0.025;
/// Cycle closure tolerance as a fraction of the path's bounding-box diagonal.
pub const CLOSURE_TOL: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaitError {
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("open path: endpoints {gap:.3e} m apart, tolerance {tol:.3e} m")]
    OpenPath { gap: f64, tol: f64 },
    #[error("tip paths do not share one time grid: {0}")]
    GridMismatch(String),
    #[error("trace covers {periods:.2} periods, need at least 3")]
    TooShort { periods: f64 },
    #[error("snap-through of `{element}` at t = {t:.6} s has no matching snap-back")]
    UnpairedEvent { element: String, t: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipKinematics {
    pub pillar_length: f64,
    /// Tip travel per unit lobe asymmetry (m).
    pub lateral_gain: f64,
    /// Tip travel per unit mean lobe deflection (m).
    pub vertical_gain: f64,
}

impl TipKinematics {
    pub fn check(&self) -> Result<(), GaitError> {
        if !(self.pillar_length > 0.0 && self.pillar_length.is_finite()) {
            return Err(GaitError::Invalid("pillar length must be positive".into()));
        }
        if !(self.lateral_gain.is_finite() && self.vertical_gain.is_finite()) {
            return Err(GaitError::Invalid("gains must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TipPath {
    pub leg: String,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

fn range(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if v.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

impl TipPath {
    pub fn x_range(&self) -> f64 {
        range(&self.x)
    }

    pub fn y_range(&self) -> f64 {
        range(&self.y)
    }

    pub fn diameter(&self) -> f64 {
        self.x_range().hypot(self.y_range())
    }

    /// Samples with `t0 <= t <= t1`.
    pub fn window(&self, t0: f64, t1: f64) -> TipPath {
        let idx: Vec<usize> = (0..self.t.len()).filter(|&k| self.t[k] >= t0 && self.t[k] <= t1).collect();
        TipPath {
            leg: self.leg.clone(),
            t: idx.iter().map(|&k| self.t[k]).collect(),
            x: idx.iter().map(|&k| self.x[k]).collect(),
            y: idx.iter().map(|&k| self.y[k]).collect(),
        }
    }
}

/// Tip path of one element: x from the lobe asymmetry, y from the mean
/// deflection (small pillar tilt). Deflections are measured from the rest
/// volume at gauge zero, so a resting element sits at the origin.
pub fn tip_trajectory(trace: &Trace, element: &str, kin: &TipKinematics) -> Result<TipPath, GaitError> {
    kin.check()?;
    let deflection = |lobe: Lobe| -> Result<Vec<f64>, GaitError> {
        let i = trace.lobe_index(element, lobe).ok_or_else(|| GaitError::UnknownElement(element.into()))?;
        let s = trace.lobes[i].spec;
        let pv = build_cubic_pv(s).map_err(|e| GaitError::Invalid(e.to_string()))?;
        let rest = pv.equilibrium_volume_clamped(0.0, Branch::PreSnap);
        let span = s.v_open - s.v_closed;
        Ok(trace.volumes[i].iter().map(|v| (v - rest) / span).collect())
    };
    let ww = deflection(Lobe::Weak)?;
    let ws = deflection(Lobe::Strong)?;
    Ok(TipPath {
        leg: element.into(),
        t: trace.times.clone(),
        x: ww.iter().zip(&ws).map(|(w, s)| kin.lateral_gain * (w - s)).collect(),
        y: ww.iter().zip(&ws).map(|(w, s)| -kin.vertical_gain * 0.5 * (w + s)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweptArea {
    pub area: f64,
    pub orientation: Orientation,
}

/// Signed shoelace area of the closed polygon through the points.
pub fn shoelace(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n < 3 {
        return 0.0;
    }
    // Centre on the first vertex to limit cancellation.
    let (x0, y0) = (x[0], y[0]);
    let mut s = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        s += (x[i] - x0) * (y[j] - y0) - (x[j] - x0) * (y[i] - y0);
    }
    0.5 * s
}

pub fn swept_area(path: &TipPath) -> Result<SweptArea, GaitError> {
    let n = path.x.len();
    if n == 0 {
        return Err(GaitError::Invalid("empty path".into()));
    }
    let gap = (path.x[n - 1] - path.x[0]).hypot(path.y[n - 1] - path.y[0]);
    let tol = CLOSURE_TOL * path.diameter();
    if gap > tol {
        return Err(GaitError::OpenPath { gap, tol });
    }
    let a = shoelace(&path.x, &path.y);
    let orientation = if a > 0.0 {
        Orientation::CounterClockwise
    } else if a < 0.0 {
        Orientation::Clockwise
    } else {
        Orientation::Degenerate
    };
    Ok(SweptArea { area: a.abs(), orientation })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactMode {
    /// Stick while grounded and moving rearward, slip otherwise.
    Ratchet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactModel {
    /// A tip is grounded while y <= contact_height (m).
    pub contact_height: f64,
    pub mode: ContactMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Walking,
    JumpLike,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Walking => "WALKING",
            Regime::JumpLike => "JUMP_LIKE",
        }
    }
}

/// Activation interval as a fraction of the drive period. `end < start`
/// means the interval wraps past the period boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseInterval {
    /// Drive cycle of the snap-through, counted from t = 0.
    pub cycle: u64,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegPhases {
    pub leg: String,
    pub intervals: Vec<PhaseInterval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitResult {
    pub t: Vec<f64>,
    /// Body displacement relative to the first sample (m).
    pub displacement: Vec<f64>,
    /// Displacement over each complete drive period (m).
    pub strides: Vec<f64>,
    /// Mean displacement per period, speed times period (m).
    pub stride: f64,
    pub speed: f64,
    /// Body lengths per second.
    pub normalized_speed: f64,
    pub regime: Option<Regime>,
    pub phases: Vec<LegPhases>,
}

/// Fraction of the straight segment from `y0` to `y1` lying at or below `h`.
fn grounded_fraction(y0: f64, y1: f64, h: f64) -> f64 {
    match (y0 <= h, y1 <= h) {
        (true, true) => 1.0,
        (false, false) => 0.0,
        (true, false) => (h - y0) / (y1 - y0),
        (false, true) => (y0 - h) / (y0 - y1),
    }
}

/// Ratchet locomotion: at each sample step, grounded legs whose tip moves
/// rearward stick and push the body forward by the mean rearward travel.
/// Samples are joined by straight segments, so a leg touching down or
/// lifting off mid-step contributes only its grounded part.
pub fn body_displacement(
    paths: &[TipPath],
    contact: &ContactModel,
    period: f64,
    phases: Vec<LegPhases>,
) -> Result<GaitResult, GaitError> {
    let first = paths.first().ok_or_else(|| GaitError::Invalid("no tip paths".into()))?;
    if !(period > 0.0 && period.is_finite()) {
        return Err(GaitError::Invalid("period must be positive".into()));
    }
    for p in paths {
        if p.t != first.t || p.x.len() != p.t.len() || p.y.len() != p.t.len() {
            return Err(GaitError::GridMismatch(p.leg.clone()));
        }
    }
    let n = first.t.len();
    if n < 2 {
        return Err(GaitError::Invalid("tip paths need at least two samples".into()));
    }
    let ContactMode::Ratchet = contact.mode;
    let mut d = vec![0.0; n];
    for k in 1..n {
        let mut push = 0.0;
        let mut weight = 0.0;
        for p in paths {
            let dx = p.x[k] - p.x[k - 1];
            if dx < 0.0 {
                let f = grounded_fraction(p.y[k - 1], p.y[k], contact.contact_height);
                push -= f * dx;
                weight += f;
            }
        }
        d[k] = d[k - 1] + push / weight.max(1.0);
    }
    let t0 = first.t[0];
    let duration = first.t[n - 1] - t0;
    let speed = d[n - 1] / duration;
    let mut strides = Vec::new();
    let mut k0 = 0;
    let mut cycle = 1;
    while let Some(k1) = (k0..n).find(|&k| first.t[k] - t0 >= cycle as f64 * period - 1e-9 * period) {
        strides.push(d[k1] - d[k0]);
        k0 = k1;
        cycle += 1;
    }
    Ok(GaitResult {
        t: first.t.clone(),
        displacement: d,
        strides,
        stride: speed * period,
        speed,
        normalized_speed: speed / BODY_LENGTH,
        regime: None,
        phases,
    })
}

/// Element names of the two actuator groups.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Groups {
    pub rear: Vec<String>,
    pub front: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    /// No strong-lobe snap-through at all in the final period.
    pub zero_events: bool,
}

fn strong_snaps_in(events: &[SnapEvent], elements: &[String], t0: f64, t1: f64) -> usize {
    events
        .iter()
        .filter(|e| {
            e.lobe == Lobe::Strong
                && e.kind == EventKind::SnapThrough
                && e.t > t0
                && e.t <= t1
                && elements.iter().any(|n| *n == e.element)
        })
        .count()
}

/// JUMP_LIKE when the front group stops snapping in the final period while
/// the rear group still snaps.
pub fn classify_regime(trace: &Trace, groups: &Groups, period: f64) -> Result<RegimeReport, GaitError> {
    if !(period > 0.0) {
        return Err(GaitError::Invalid("period must be positive".into()));
    }
    let periods = trace.duration() / period;
    if periods < 3.0 - 1e-9 {
        return Err(GaitError::TooShort { periods });
    }
    let t1 = trace.times.last().copied().unwrap_or(0.0);
    let t0 = t1 - period;
    let rear = strong_snaps_in(&trace.events, &groups.rear, t0, t1);
    let front = strong_snaps_in(&trace.events, &groups.front, t0, t1);
    let regime = if front == 0 && rear > 0 { Regime::JumpLike } else { Regime::Walking };
    Ok(RegimeReport { regime, zero_events: rear == 0 && front == 0 })
}

/// Strong-lobe activation intervals of each leg for snap-throughs that
/// start inside `[t0, t1)`.
pub fn phase_diagram(
    events: &[SnapEvent],
    period: f64,
    legs: &[String],
    t0: f64,
    t1: f64,
) -> Result<Vec<LegPhases>, GaitError> {
    if !(period > 0.0) {
        return Err(GaitError::Invalid("period must be positive".into()));
    }
    let phase = |t: f64| {
        let f = (t / period).fract();
        if f >= 1.0 {
            0.0
        } else {
            f
        }
    };
    let mut out = Vec::with_capacity(legs.len());
    for leg in legs {
        let ev: Vec<&SnapEvent> = events.iter().filter(|e| e.element == *leg && e.lobe == Lobe::Strong).collect();
        let mut intervals = Vec::new();
        for (i, e) in ev.iter().enumerate() {
            if e.kind != EventKind::SnapThrough || e.t < t0 || e.t >= t1 {
                continue;
            }
            let back = ev[i + 1..]
                .iter()
                .find(|b| b.kind == EventKind::SnapBack)
                .ok_or_else(|| GaitError::UnpairedEvent { element: leg.clone(), t: e.t })?;
            intervals.push(PhaseInterval { cycle: (e.t / period).floor() as u64, start: phase(e.t), end: phase(back.t) });
        }
        out.push(LegPhases { leg: leg.clone(), intervals });
    }
    Ok(out)
}
