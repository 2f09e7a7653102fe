//! Physical building blocks: bistable lobe PV laws, channel resistance,
//! gas capacitance and time-dependent sources.

use std::f64::consts::PI;

use thiserror::Error;

/// Atmospheric pressure used as the absolute reference (Pa).
pub const P_ATM: f64 = 101_325.0;
/// Dynamic viscosity of air at 20 °C (Pa·s).
pub const AIR_VISCOSITY: f64 = 1.81e-5;
/// Default snap relaxation time (s).
pub const DEFAULT_TAU_SNAP: f64 = 2e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElementError {
    #[error("infeasible snap spec: {0}")]
    InfeasibleSpec(String),
    #[error("volume {v:.6e} m3 outside characteristic range [{lo:.6e}, {hi:.6e}]")]
    OutOfRange { v: f64, lo: f64, hi: f64 },
    #[error("no root on {0:?} branch")]
    NoRootOnBranch(Branch),
    #[error("invalid element: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    PreSnap,
    PostSnap,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::PreSnap => "pre",
            Branch::PostSnap => "post",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lobe {
    Weak,
    Strong,
}

impl Lobe {
    pub const BOTH: [Lobe; 2] = [Lobe::Weak, Lobe::Strong];

    pub fn label(self) -> &'static str {
        match self {
            Lobe::Weak => "weak",
            Lobe::Strong => "strong",
        }
    }
}

/// Fold pressures and characteristic volumes of one lobe.
///
/// `v_closed` and `v_open` are the landing volumes of the two jumps: the
/// pre-snap branch at `p_snap_back` and the post-snap branch at
/// `p_snap_through`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapSpec {
    pub p_snap_through: f64,
    pub p_snap_back: f64,
    pub v_closed: f64,
    pub v_open: f64,
    pub v_fold_lo: f64,
    pub v_fold_hi: f64,
}

impl SnapSpec {
    /// Spec from fold pressures and fold volumes; landing volumes follow
    /// from the cubic.
    pub fn from_folds(p_snap_through: f64, p_snap_back: f64, v_fold_lo: f64, v_fold_hi: f64) -> Self {
        let span = v_fold_hi - v_fold_lo;
        Self {
            p_snap_through,
            p_snap_back,
            v_closed: v_fold_lo - 0.5 * span,
            v_open: v_fold_hi + 0.5 * span,
            v_fold_lo,
            v_fold_hi,
        }
    }

    pub fn check(&self) -> Result<(), ElementError> {
        let vals = [
            self.p_snap_through,
            self.p_snap_back,
            self.v_closed,
            self.v_open,
            self.v_fold_lo,
            self.v_fold_hi,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(ElementError::InfeasibleSpec("non-finite field".into()));
        }
        if self.p_snap_through <= self.p_snap_back {
            return Err(ElementError::InfeasibleSpec(format!(
                "p_snap_through ({} Pa) must exceed p_snap_back ({} Pa)",
                self.p_snap_through, self.p_snap_back
            )));
        }
        if !(self.v_closed < self.v_fold_lo && self.v_fold_lo < self.v_fold_hi && self.v_fold_hi < self.v_open) {
            return Err(ElementError::InfeasibleSpec(
                "volumes must satisfy v_closed < v_fold_lo < v_fold_hi < v_open".into(),
            ));
        }
        Ok(())
    }
}

/// Cubic pressure-volume law of one lobe.
///
/// Stored in centred form p = p_mid + (h/4)(u³ - 3u), u = (v - v_mid)/s,
/// which is better conditioned than the raw power basis for volumes of
/// order 1e-8 m³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvCharacteristic {
    pub spec: SnapSpec,
    p_mid: f64,
    h: f64,
    v_mid: f64,
    s: f64,
}

pub fn build_cubic_pv(spec: SnapSpec) -> Result<PvCharacteristic, ElementError> {
    spec.check()?;
    Ok(PvCharacteristic {
        spec,
        p_mid: 0.5 * (spec.p_snap_through + spec.p_snap_back),
        h: spec.p_snap_through - spec.p_snap_back,
        v_mid: 0.5 * (spec.v_fold_lo + spec.v_fold_hi),
        s: 0.5 * (spec.v_fold_hi - spec.v_fold_lo),
    })
}

impl PvCharacteristic {
    /// Power-basis coefficients `[a3, a2, a1, a0]` of p(v) in Pa over m³.
    pub fn coefficients(&self) -> [f64; 4] {
        let k = self.h / (4.0 * self.s.powi(3));
        let l = 3.0 * self.h / (4.0 * self.s);
        let m = self.v_mid;
        [k, -3.0 * k * m, 3.0 * k * m * m - l, self.p_mid - k * m * m * m + l * m]
    }

    fn u(&self, v: f64) -> f64 {
        (v - self.v_mid) / self.s
    }

    /// Pressure with no range check.
    pub fn pressure_unchecked(&self, v: f64) -> f64 {
        let u = self.u(v);
        self.p_mid + 0.25 * self.h * (u * u * u - 3.0 * u)
    }

    pub fn dp_dv(&self, v: f64) -> f64 {
        let u = self.u(v);
        0.75 * self.h * (u * u - 1.0) / self.s
    }

    pub fn volume_range(&self) -> (f64, f64) {
        let margin = self.spec.v_open - self.spec.v_closed;
        (self.spec.v_closed - margin, self.spec.v_open + margin)
    }

    /// Normalised deflection: 0 at `v_closed`, 1 at `v_open`.
    pub fn deflection(&self, v: f64) -> f64 {
        (v - self.spec.v_closed) / (self.spec.v_open - self.spec.v_closed)
    }

    /// Fold volumes and pressures recovered from the power-basis coefficients.
    pub fn folds(&self) -> [(f64, f64); 2] {
        let [a3, a2, a1, _] = self.coefficients();
        // p' = 3 a3 v² + 2 a2 v + a1
        let (qa, qb, qc) = (3.0 * a3, 2.0 * a2, a1);
        let disc = (qb * qb - 4.0 * qa * qc).sqrt();
        let q = -0.5 * (qb + qb.signum() * disc);
        let mut r = [q / qa, qc / q];
        r.sort_by(f64::total_cmp);
        r.map(|v| (v, self.pressure_unchecked(v)))
    }

    /// Unique root of p(v) = p on the requested outer branch.
    pub fn equilibrium_volume(&self, p: f64, branch: Branch) -> Result<f64, ElementError> {
        let y = 4.0 * (p - self.p_mid) / self.h;
        let u = match branch {
            Branch::PreSnap if y > 2.0 => return Err(ElementError::NoRootOnBranch(branch)),
            Branch::PostSnap if y < -2.0 => return Err(ElementError::NoRootOnBranch(branch)),
            _ => solve_depressed_cubic(y, branch),
        };
        Ok(self.v_mid + self.s * u)
    }

    /// Branch equilibrium, clamped to the fold volume once the pressure
    /// has passed it.
    pub fn equilibrium_volume_clamped(&self, p: f64, branch: Branch) -> f64 {
        match self.equilibrium_volume(p, branch) {
            Ok(v) => v,
            Err(_) => match branch {
                Branch::PreSnap => self.spec.v_fold_lo,
                Branch::PostSnap => self.spec.v_fold_hi,
            },
        }
    }
}

/// Root of u³ - 3u = y on u ≤ -1 (pre) or u ≥ 1 (post).
fn solve_depressed_cubic(y: f64, branch: Branch) -> f64 {
    if y.abs() <= 2.0 {
        let theta = (0.5 * y).clamp(-1.0, 1.0).acos();
        match branch {
            Branch::PostSnap => 2.0 * (theta / 3.0).cos(),
            Branch::PreSnap => -2.0 * ((PI - theta) / 3.0).cos(),
        }
    } else {
        let t = 0.5 * (y.abs() + (y * y - 4.0).sqrt());
        let c = t.cbrt();
        y.signum() * (c + 1.0 / c)
    }
}

pub fn lobe_pressure(pv: &PvCharacteristic, v: f64) -> Result<f64, ElementError> {
    let (lo, hi) = pv.volume_range();
    if !(lo..=hi).contains(&v) {
        return Err(ElementError::OutOfRange { v, lo, hi });
    }
    Ok(pv.pressure_unchecked(v))
}

pub fn equilibrium_volume(pv: &PvCharacteristic, p: f64, branch: Branch) -> Result<f64, ElementError> {
    pv.equilibrium_volume(p, branch)
}

/// Two-lobe eccentric dome on a support chamber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapElement {
    pub weak: PvCharacteristic,
    pub strong: PvCharacteristic,
    pub tau_snap: f64,
    pub base_chamber_volume: f64,
}

impl SnapElement {
    pub fn new(weak: SnapSpec, strong: SnapSpec, tau_snap: f64, base_chamber_volume: f64) -> Result<Self, ElementError> {
        let weak = build_cubic_pv(weak)?;
        let strong = build_cubic_pv(strong)?;
        // Identical lobes are allowed and give a symmetric dome.
        if weak.spec.p_snap_through > strong.spec.p_snap_through {
            return Err(ElementError::Invalid("weak lobe must not snap through above the strong lobe".into()));
        }
        if weak.spec.p_snap_back < strong.spec.p_snap_back {
            return Err(ElementError::Invalid("weak lobe must not snap back below the strong lobe".into()));
        }
        if !(tau_snap > 0.0 && tau_snap.is_finite()) {
            return Err(ElementError::Invalid("tau_snap must be positive".into()));
        }
        if !(base_chamber_volume >= 0.0 && base_chamber_volume.is_finite()) {
            return Err(ElementError::Invalid("base chamber volume must be non-negative".into()));
        }
        Ok(Self { weak, strong, tau_snap, base_chamber_volume })
    }

    pub fn lobe(&self, lobe: Lobe) -> &PvCharacteristic {
        match lobe {
            Lobe::Weak => &self.weak,
            Lobe::Strong => &self.strong,
        }
    }
}

/// Cylindrical support chamber volume.
pub fn support_chamber_volume(diameter: f64, depth: f64) -> f64 {
    0.25 * PI * diameter * diameter * depth
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry {
    pub diameter: f64,
    pub length: f64,
    pub fluid_viscosity: f64,
}

impl ChannelGeometry {
    pub fn check(&self) -> Result<(), ElementError> {
        for (name, v) in [("diameter", self.diameter), ("length", self.length), ("viscosity", self.fluid_viscosity)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ElementError::Invalid(format!("channel {name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Hagen-Poiseuille resistance of a circular channel (Pa·s/m³).
pub fn channel_resistance(geom: &ChannelGeometry) -> f64 {
    128.0 * geom.fluid_viscosity * geom.length / (PI * geom.diameter.powi(4))
}

/// Isothermal gas capacitance (m³/Pa).
pub fn gas_capacitance(v: f64, p_abs: f64) -> f64 {
    v / p_abs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    FlowRamp,
    PressureRampWave,
    Vent,
}

/// Boundary condition applied at a node.
///
/// FLOW_RAMP repeats every `1/frequency` when the frequency is positive.
/// PRESSURE_RAMP_WAVE with zero frequency is a step to `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub kind: SourceKind,
    pub amplitude: f64,
    pub frequency: f64,
    pub switching_delay: f64,
    pub target_volume: f64,
}

impl Source {
    pub fn flow_ramp(rate: f64, target_volume: f64, switching_delay: f64) -> Self {
        Self { kind: SourceKind::FlowRamp, amplitude: rate, frequency: 0.0, switching_delay, target_volume }
    }

    pub fn pressure_wave(amplitude: f64, frequency: f64) -> Self {
        Self { kind: SourceKind::PressureRampWave, amplitude, frequency, switching_delay: 0.0, target_volume: 0.0 }
    }

    pub fn vent() -> Self {
        Self { kind: SourceKind::Vent, amplitude: 0.0, frequency: 0.0, switching_delay: 0.0, target_volume: 0.0 }
    }

    pub fn check(&self) -> Result<(), ElementError> {
        if !self.amplitude.is_finite() {
            return Err(ElementError::Invalid("source amplitude must be finite".into()));
        }
        if !(self.frequency >= 0.0 && self.frequency.is_finite()) {
            return Err(ElementError::Invalid("source frequency must be >= 0".into()));
        }
        if !(self.switching_delay >= 0.0 && self.switching_delay.is_finite()) {
            return Err(ElementError::Invalid("switching delay must be >= 0".into()));
        }
        if self.kind == SourceKind::FlowRamp {
            if !(self.target_volume >= 0.0 && self.target_volume.is_finite()) {
                return Err(ElementError::Invalid("target volume must be >= 0".into()));
            }
            if self.frequency > 0.0 && self.ramp_duration() > 1.0 / self.frequency {
                return Err(ElementError::Invalid("flow ramp cycle longer than its period".into()));
            }
        }
        Ok(())
    }

    /// Time to deliver the target volume at the ramp rate.
    fn inject_time(&self) -> f64 {
        if self.amplitude == 0.0 {
            0.0
        } else {
            self.target_volume / self.amplitude.abs()
        }
    }

    /// Inject, hold and withdraw duration of one flow ramp cycle.
    pub fn ramp_duration(&self) -> f64 {
        2.0 * self.inject_time() + self.switching_delay
    }

    pub fn period(&self) -> Option<f64> {
        (self.frequency > 0.0).then(|| 1.0 / self.frequency)
    }

    /// Times in `(0, t_end]` where the source value jumps.
    pub fn breakpoints(&self, t_end: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self.kind {
            SourceKind::Vent => {}
            SourceKind::FlowRamp => {
                let ti = self.inject_time();
                let offsets = [ti, ti + self.switching_delay, 2.0 * ti + self.switching_delay];
                let mut k = 0u64;
                loop {
                    let base = match self.period() {
                        Some(p) => k as f64 * p,
                        None if k == 0 => 0.0,
                        None => break,
                    };
                    if base > t_end {
                        break;
                    }
                    out.extend(offsets.iter().map(|o| base + o).filter(|&t| t > 0.0 && t <= t_end));
                    if k > 0 {
                        out.push(base);
                    }
                    k += 1;
                }
            }
            SourceKind::PressureRampWave => {
                if let Some(p) = self.period() {
                    let mut k = 0u64;
                    loop {
                        let t = (k as f64 + 0.5) * p;
                        if t > t_end {
                            break;
                        }
                        out.push(t);
                        k += 1;
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// Flow (m³/s) for FLOW_RAMP, gauge pressure (Pa) otherwise.
pub fn source_value(src: &Source, t: f64) -> f64 {
    match src.kind {
        SourceKind::Vent => 0.0,
        SourceKind::PressureRampWave => {
            if src.frequency == 0.0 {
                src.amplitude
            } else {
                let phase = (src.frequency * t + 0.5).fract();
                src.amplitude * (2.0 * phase - 1.0)
            }
        }
        SourceKind::FlowRamp => {
            let tc = match src.period() {
                Some(p) => t - (t / p).floor() * p,
                None => t,
            };
            let ti = src.inject_time();
            if tc < ti {
                src.amplitude
            } else if tc < ti + src.switching_delay {
                0.0
            } else if tc < 2.0 * ti + src.switching_delay {
                -src.amplitude
            } else {
                0.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strong() -> SnapSpec {
        SnapSpec::from_folds(4100.0, 0.0, 20e-9, 60e-9)
    }

    #[test]
    fn folds_hit_spec_pressures() {
        let pv = build_cubic_pv(strong()).unwrap();
        assert_eq!(pv.pressure_unchecked(20e-9), 4100.0);
        assert!(pv.pressure_unchecked(60e-9).abs() < 1e-9);
        assert!(pv.dp_dv(20e-9).abs() < 1e-9 * 4100.0 / 20e-9);
    }

    #[test]
    fn landing_volumes_sit_on_outer_branches() {
        let pv = build_cubic_pv(strong()).unwrap();
        assert!(pv.pressure_unchecked(pv.spec.v_closed).abs() < 1e-9);
        assert!((pv.pressure_unchecked(pv.spec.v_open) - 4100.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_spec_rejected() {
        let s = SnapSpec::from_folds(100.0, 100.0, 1.0, 2.0);
        assert!(matches!(build_cubic_pv(s), Err(ElementError::InfeasibleSpec(_))));
    }

    #[test]
    fn beyond_fold_has_no_pre_root() {
        let pv = build_cubic_pv(strong()).unwrap();
        assert_eq!(
            pv.equilibrium_volume(4100.0 + 1e-6, Branch::PreSnap),
            Err(ElementError::NoRootOnBranch(Branch::PreSnap))
        );
        assert_eq!(pv.equilibrium_volume_clamped(5000.0, Branch::PreSnap), 20e-9);
    }

    #[test]
    fn clamped_post_branch_below_fold() {
        let pv = build_cubic_pv(strong()).unwrap();
        assert_eq!(pv.equilibrium_volume_clamped(-1.0, Branch::PostSnap), 60e-9);
    }

    #[test]
    fn flow_ramp_phases() {
        let s = Source::flow_ramp(0.4e-6, 0.4e-6, 0.1);
        assert_eq!(source_value(&s, 0.5), 0.4e-6);
        assert_eq!(source_value(&s, 1.05), 0.0);
        assert_eq!(source_value(&s, 1.6), -0.4e-6);
        assert_eq!(source_value(&s, 2.2), 0.0);
        assert!((s.ramp_duration() - 2.1).abs() < 1e-12);
    }

    #[test]
    fn sawtooth_convention() {
        let s = Source::pressure_wave(60000.0, 1.0);
        assert_eq!(source_value(&s, 0.0), 0.0);
        assert_eq!(source_value(&s, 0.25), 30000.0);
        assert_eq!(source_value(&s, 0.5), -60000.0);
        assert_eq!(s.breakpoints(2.0), vec![0.5, 1.5]);
    }

    #[test]
    fn step_wave_is_constant() {
        let s = Source::pressure_wave(500.0, 0.0);
        assert_eq!(source_value(&s, 0.0), 500.0);
        assert_eq!(source_value(&s, 3.0), 500.0);
        assert!(s.breakpoints(10.0).is_empty());
    }

    #[test]
    fn periodic_flow_ramp_breakpoints() {
        let mut s = Source::flow_ramp(1.0, 1.0, 0.5);
        s.frequency = 0.2;
        assert_eq!(s.breakpoints(6.0), vec![1.0, 1.5, 2.5, 5.0, 6.0]);
    }

    #[test]
    fn support_chamber_default() {
        let v = support_chamber_volume(10e-3, 3.5e-3);
        assert!((v - 274.889e-9).abs() < 1e-12);
    }
}
