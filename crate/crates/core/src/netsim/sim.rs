use nalgebra::DVector;
use thiserror::Error;

use super::network::{CheckedNetwork, ElementKind};
use super::sdirk::{self, OdeSystem};
use crate::elements::{source_value, Branch, Lobe, PvCharacteristic, SnapSpec, SourceKind, P_ATM};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("step failure at t = {t:.6e} s: cannot meet tolerance with dt_min")]
    StepFailure { t: f64 },
    #[error("non-finite state at t = {t:.6e} s")]
    NonfiniteState { t: f64 },
    #[error("step budget of {0} exhausted")]
    MaxSteps(usize),
    #[error("invalid solver config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt_min: f64,
    pub dt_max: f64,
    pub rtol: f64,
    /// Absolute tolerance on stored and lobe volumes (m³).
    pub atol: f64,
    pub max_steps: usize,
    pub tau_snap: Option<f64>,
    /// Spacing of the recorded output grid (s).
    pub output_interval: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_min: 1e-5,
            dt_max: 1e-4,
            rtol: 1e-6,
            atol: 1e-12,
            max_steps: 20_000_000,
            tau_snap: None,
            output_interval: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<(), SimError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.dt_min) && self.dt_min <= self.dt_max && self.dt_max.is_finite()) {
            return Err(SimError::Config("need 0 < dt_min <= dt_max".into()));
        }
        if !(pos(self.rtol) && pos(self.atol)) {
            return Err(SimError::Config("tolerances must be positive".into()));
        }
        if !pos(self.output_interval) {
            return Err(SimError::Config("output interval must be positive".into()));
        }
        if let Some(tau) = self.tau_snap {
            if !pos(tau) {
                return Err(SimError::Config("tau_snap must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    SnapThrough,
    SnapBack,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::SnapThrough => "SNAP_THROUGH",
            EventKind::SnapBack => "SNAP_BACK",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapEvent {
    pub t: f64,
    pub element: String,
    pub element_index: usize,
    pub lobe: Lobe,
    pub kind: EventKind,
    /// Gauge pressure of the element's node at the event (Pa).
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LobeInfo {
    pub element: String,
    pub element_index: usize,
    pub node: usize,
    pub lobe: Lobe,
    pub spec: SnapSpec,
}

/// Simulation record on a uniform output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub node_names: Vec<String>,
    pub lobes: Vec<LobeInfo>,
    pub times: Vec<f64>,
    /// Gauge pressure per node, node-major (Pa).
    pub pressures: Vec<Vec<f64>>,
    /// Volume per lobe, lobe-major (m³).
    pub volumes: Vec<Vec<f64>>,
    pub branches: Vec<Vec<Branch>>,
    pub injected: Vec<f64>,
    pub vented: Vec<f64>,
    /// Atmospheric-equivalent stored gas plus linear storage (m³).
    pub stored: Vec<f64>,
    pub events: Vec<SnapEvent>,
}

impl Trace {
    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.node_names.iter().position(|n| n == name)
    }

    pub fn lobe_index(&self, element: &str, lobe: Lobe) -> Option<usize> {
        self.lobes.iter().position(|l| l.element == element && l.lobe == lobe)
    }

    /// Largest |injected - vented - Δstored| over all samples (m³).
    pub fn mass_balance_error(&self) -> f64 {
        let s0 = self.stored.first().copied().unwrap_or(0.0);
        (0..self.times.len())
            .map(|k| (self.injected[k] - self.vented[k] - (self.stored[k] - s0)).abs())
            .fold(0.0, f64::max)
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }
}

struct LobeRt {
    node: usize,
    pv: PvCharacteristic,
    tau: f64,
}

/// State layout: [stored per node | volume per lobe | injected | vented].
struct System<'a> {
    net: &'a CheckedNetwork,
    lobes: Vec<LobeRt>,
    base_gas: Vec<f64>,
    lin_cap: Vec<f64>,
    branches: Vec<Branch>,
    /// Interval of the step being taken. Source inputs are sampled strictly
    /// inside it so a stage landing on a breakpoint sees the left limit.
    window: (f64, f64),
}

impl<'a> System<'a> {
    fn new(net: &'a CheckedNetwork, tau_override: Option<f64>) -> Self {
        let n = net.node_names.len();
        let mut base_gas = net.dead_volumes.clone();
        let mut lin_cap = vec![0.0; n];
        let mut lobes = Vec::new();
        for el in &net.elements {
            match &el.kind {
                ElementKind::Snap(s) => {
                    base_gas[el.node] += s.base_chamber_volume;
                    for lobe in Lobe::BOTH {
                        lobes.push(LobeRt { node: el.node, pv: *s.lobe(lobe), tau: tau_override.unwrap_or(s.tau_snap) });
                    }
                }
                ElementKind::Capacitance(c) => lin_cap[el.node] += c,
            }
        }
        let branches = vec![Branch::PreSnap; lobes.len()];
        Self { net, lobes, base_gas, lin_cap, branches, window: (f64::NEG_INFINITY, f64::INFINITY) }
    }

    fn n_nodes(&self) -> usize {
        self.base_gas.len()
    }

    fn dim(&self) -> usize {
        self.n_nodes() + self.lobes.len() + 2
    }

    fn pressures(&self, y: &[f64], p: &mut [f64]) {
        let n = self.n_nodes();
        let mut gas = self.base_gas.clone();
        for (i, l) in self.lobes.iter().enumerate() {
            gas[l.node] += y[n + i];
        }
        for k in 0..n {
            p[k] = (y[k] - gas[k]) / (gas[k] / P_ATM + self.lin_cap[k]);
        }
    }

    fn initial_state(&self) -> DVector<f64> {
        let n = self.n_nodes();
        let mut y = DVector::zeros(self.dim());
        let mut gas = self.base_gas.clone();
        for (i, l) in self.lobes.iter().enumerate() {
            let v = l.pv.equilibrium_volume_clamped(0.0, Branch::PreSnap);
            y[n + i] = v;
            gas[l.node] += v;
        }
        for k in 0..n {
            y[k] = gas[k];
        }
        y
    }

    /// Lobes whose fold condition holds in state `y`, in declaration order.
    fn crossings(&self, y: &[f64]) -> Vec<usize> {
        let mut p = vec![0.0; self.n_nodes()];
        self.pressures(y, &mut p);
        self.lobes
            .iter()
            .enumerate()
            .filter(|(i, l)| {
                let pn = p[l.node];
                match self.branches[*i] {
                    Branch::PreSnap => pn >= l.pv.spec.p_snap_through,
                    Branch::PostSnap => pn <= l.pv.spec.p_snap_back,
                }
            })
            .map(|(i, _)| i)
            .collect()
    }
}

impl OdeSystem for System<'_> {
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n_nodes();
        let nl = self.lobes.len();
        let (inj, vent) = (n + nl, n + nl + 1);
        let mut p = vec![0.0; n];
        self.pressures(y, &mut p);
        dy.iter_mut().for_each(|d| *d = 0.0);
        let at = |r: Option<usize>| r.map_or(0.0, |i| p[i]);
        for e in &self.net.edges {
            let q = (at(e.from) - at(e.to)) / e.resistance;
            match e.from {
                Some(i) => dy[i] -= q,
                None => dy[vent] -= q,
            }
            match e.to {
                Some(i) => dy[i] += q,
                None => dy[vent] += q,
            }
        }
        let (w0, w1) = self.window;
        let eps = (1e-3 * (w1 - w0)).min(1e-12);
        let ts = t.clamp(w0 + eps, w1 - eps);
        for s in &self.net.sources {
            let v = source_value(&s.source, ts);
            match s.source.kind {
                SourceKind::FlowRamp => {
                    dy[s.node] += v;
                    dy[inj] += v;
                }
                SourceKind::PressureRampWave => {
                    let q = (v - p[s.node]) / s.resistance;
                    dy[s.node] += q;
                    dy[inj] += q;
                }
                SourceKind::Vent => {
                    let q = p[s.node] / s.resistance;
                    dy[s.node] -= q;
                    dy[vent] += q;
                }
            }
        }
        for (i, l) in self.lobes.iter().enumerate() {
            let veq = l.pv.equilibrium_volume_clamped(p[l.node], self.branches[i]);
            dy[n + i] = (veq - y[n + i]) / l.tau;
        }
    }
}

fn output_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let k_max = (t_end / dt * (1.0 + 1e-12)).floor() as u64;
    let mut g: Vec<f64> = (0..=k_max).map(|k| k as f64 * dt).filter(|&t| t <= t_end).collect();
    if t_end - g.last().copied().unwrap_or(0.0) > 1e-9 * dt {
        g.push(t_end);
    }
    g
}

struct Recorder {
    trace: Trace,
}

impl Recorder {
    fn record(&mut self, sys: &System, t: f64, y: &DVector<f64>) {
        let n = sys.n_nodes();
        let nl = sys.lobes.len();
        let mut p = vec![0.0; n];
        sys.pressures(y.as_slice(), &mut p);
        let tr = &mut self.trace;
        tr.times.push(t);
        for k in 0..n {
            tr.pressures[k].push(p[k]);
        }
        for i in 0..nl {
            tr.volumes[i].push(y[n + i]);
            tr.branches[i].push(sys.branches[i]);
        }
        tr.injected.push(y[n + nl]);
        tr.vented.push(y[n + nl + 1]);
        tr.stored.push(y.rows(0, n).sum());
    }
}

const SUBSTEP_DEPTH: u32 = 4;

/// One step of size `h`, retried as two half steps when the Newton
/// iteration fails. Near a fold the branch equilibrium has a square-root
/// singularity, which can stall Newton on a step that ends just short of it.
fn substep(
    sys: &System,
    jac: &nalgebra::DMatrix<f64>,
    t: f64,
    y: &DVector<f64>,
    h: f64,
    config: &SolverConfig,
    depth: u32,
) -> Option<DVector<f64>> {
    if let Some(r) = sdirk::step(sys, jac, t, y, h, config.rtol, config.atol) {
        return Some(r.y);
    }
    if depth == 0 {
        return None;
    }
    let half = 0.5 * h;
    let y1 = substep(sys, jac, t, y, half, config, depth - 1)?;
    let jac1 = sdirk::jacobian(sys, t + half, &y1);
    substep(sys, &jac1, t + half, &y1, half, config, depth - 1)
}

/// Integrate the network from rest (all nodes at gauge zero, lobes on
/// their pre-snap branch) up to `t_end`.
pub fn simulate(net: &CheckedNetwork, config: &SolverConfig, t_end: f64) -> Result<Trace, SimError> {
    config.check()?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(SimError::Config("t_end must be positive".into()));
    }
    let mut sys = System::new(net, config.tau_snap);
    let n = sys.n_nodes();
    let lobe_infos: Vec<LobeInfo> = net
        .snap_elements()
        .flat_map(|(idx, el, s)| {
            Lobe::BOTH.map(|lobe| LobeInfo {
                element: el.name.clone(),
                element_index: idx,
                node: el.node,
                lobe,
                spec: s.lobe(lobe).spec,
            })
        })
        .collect();
    let nl = lobe_infos.len();
    let mut rec = Recorder {
        trace: Trace {
            node_names: net.node_names.clone(),
            lobes: lobe_infos,
            times: Vec::new(),
            pressures: vec![Vec::new(); n],
            volumes: vec![Vec::new(); nl],
            branches: vec![Vec::new(); nl],
            injected: Vec::new(),
            vented: Vec::new(),
            stored: Vec::new(),
            events: Vec::new(),
        },
    };

    let outputs = output_grid(t_end, config.output_interval);
    let mut stops: Vec<f64> = outputs.clone();
    for s in &net.sources {
        stops.extend(s.source.breakpoints(t_end));
    }
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end.max(1.0));

    let mut t = 0.0;
    let mut y = sys.initial_state();
    rec.record(&sys, t, &y);
    let mut next_out = 1;
    let mut next_stop = stops.iter().position(|&s| s > 0.0).unwrap_or(stops.len());
    let mut h = config.dt_min.max(0.1 * config.dt_max);
    let mut steps = 0usize;
    let mut jac_at: Option<(f64, DVector<f64>, nalgebra::DMatrix<f64>)> = None;

    while next_stop < stops.len() {
        steps += 1;
        if steps > config.max_steps {
            return Err(SimError::MaxSteps(config.max_steps));
        }
        let t_stop = stops[next_stop];
        let remaining = t_stop - t;
        let h_try = h.min(config.dt_max).min(remaining);
        let to_stop = h_try >= remaining;
        sys.window = (t, t + h_try);
        let jac = match &jac_at {
            Some((tj, yj, j)) if *tj == t && yj == &y => j.clone(),
            _ => {
                let j = sdirk::jacobian(&sys, t, &y);
                jac_at = Some((t, y.clone(), j.clone()));
                j
            }
        };
        let res = sdirk::step(&sys, &jac, t, &y, h_try, config.rtol, config.atol);
        let ok = matches!(&res, Some(r) if r.err <= 1.0);
        if !ok {
            if h_try <= config.dt_min * (1.0 + 1e-9) {
                return Err(SimError::StepFailure { t });
            }
            let factor = match &res {
                Some(r) => (0.9 * r.err.powf(-0.25)).clamp(0.1, 0.5),
                None => 0.25,
            };
            h = (h_try * factor).max(config.dt_min).min(remaining);
            continue;
        }
        let r = res.unwrap();
        if r.y.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonfiniteState { t: t + h_try });
        }
        let mut h_acc = h_try;
        let mut y_new = r.y;
        let mut crossed = sys.crossings(y_new.as_slice());
        if !crossed.is_empty() {
            let (mut lo, mut hi) = (0.0, h_try);
            while hi - lo > config.dt_min {
                let mid = 0.5 * (lo + hi);
                match substep(&sys, &jac, t, &y, mid, config, SUBSTEP_DEPTH) {
                    Some(ym) if !sys.crossings(ym.as_slice()).is_empty() => {
                        hi = mid;
                        y_new = ym;
                    }
                    _ => lo = mid,
                }
            }
            h_acc = hi;
            crossed = sys.crossings(y_new.as_slice());
        }
        t = if to_stop && h_acc == h_try { t_stop } else { t + h_acc };
        y = y_new;
        if !crossed.is_empty() {
            let mut p = vec![0.0; n];
            sys.pressures(y.as_slice(), &mut p);
            for i in crossed {
                let info = rec.trace.lobes[i].clone();
                let kind = match sys.branches[i] {
                    Branch::PreSnap => EventKind::SnapThrough,
                    Branch::PostSnap => EventKind::SnapBack,
                };
                rec.trace.events.push(SnapEvent {
                    t,
                    element: info.element,
                    element_index: info.element_index,
                    lobe: info.lobe,
                    kind,
                    pressure: p[info.node],
                });
                sys.branches[i] = match sys.branches[i] {
                    Branch::PreSnap => Branch::PostSnap,
                    Branch::PostSnap => Branch::PreSnap,
                };
            }
            jac_at = None;
        }
        if t == t_stop {
            next_stop += 1;
            if next_out < outputs.len() && outputs[next_out] <= t {
                rec.record(&sys, outputs[next_out], &y);
                next_out += 1;
            }
        }
        let grow = if r.err > 0.0 { (0.9 * r.err.powf(-0.25)).clamp(0.2, 4.0) } else { 4.0 };
        if !to_stop || h_try == h {
            h = (h_try * grow).clamp(config.dt_min, config.dt_max);
        }
    }
    Ok(rec.trace)
}

/// Events of a trace sorted by time, then element order, weak lobe first.
pub fn detect_snap_events(trace: &Trace) -> Vec<SnapEvent> {
    let mut ev = trace.events.clone();
    ev.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.element_index.cmp(&b.element_index)).then(a.lobe.cmp(&b.lobe)));
    ev
}
