//! Scenario files. Every dimensional field carries its unit in the name.

use std::collections::BTreeMap;

use serde::Deserialize;
use snapnet::elements::{
    channel_resistance, support_chamber_volume, ChannelGeometry, SnapElement, SnapSpec, Source, AIR_VISCOSITY,
    DEFAULT_TAU_SNAP,
};
use snapnet::gait::{ContactMode, ContactModel, Groups, TipKinematics};
use snapnet::netsim::{validate, CheckedNetwork, EdgeSpec, ElementKind, ElementSpec, Network, NodeSpec, SolverConfig, SourceSpec};

use crate::error::CliError;

pub const PA_PER_MBAR: f64 = 100.0;
pub const M3_PER_ML: f64 = 1e-6;
pub const M3_PER_UL: f64 = 1e-9;
pub const M_PER_MM: f64 = 1e-3;
/// 1 mbar·s/mL in Pa·s/m³.
pub const RESISTANCE_UNIT: f64 = PA_PER_MBAR / M3_PER_ML;
/// 1 µL/mbar in m³/Pa.
pub const CAPACITANCE_UNIT: f64 = M3_PER_UL / PA_PER_MBAR;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub network: NetworkSection,
    pub simulation: SimulationSection,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub models: BTreeMap<String, DomeModel>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub kinematics: Option<KinematicsSection>,
    #[serde(default)]
    pub gait: Option<GaitSection>,
    #[serde(default)]
    pub groups: Option<GroupsSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub nodes: Vec<NodeDef>,
    #[serde(default)]
    pub edges: Vec<EdgeDef>,
    #[serde(default)]
    pub elements: Vec<ElementDef>,
    #[serde(default)]
    pub sources: Vec<SourceDef>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDef {
    pub name: String,
    #[serde(rename = "dead_volume_mL", default)]
    pub dead_volume_ml: f64,
    #[serde(default)]
    pub ambient: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDef {
    pub name: String,
    pub from: String,
    pub to: String,
    #[serde(rename = "resistance_mbar_s_per_mL", default)]
    pub resistance: Option<f64>,
    #[serde(default)]
    pub channel_diameter_mm: Option<f64>,
    #[serde(default)]
    pub channel_length_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementDef {
    pub name: String,
    pub node: String,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(rename = "capacitance_uL_per_mbar", default)]
    pub capacitance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SourceKindDef {
    FlowRamp,
    PressureRampWave,
    Vent,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDef {
    pub name: String,
    pub node: String,
    pub kind: SourceKindDef,
    #[serde(default)]
    pub amplitude_mbar: Option<f64>,
    #[serde(rename = "rate_mL_s", default)]
    pub rate: Option<f64>,
    #[serde(rename = "target_volume_mL", default)]
    pub target_volume: Option<f64>,
    #[serde(default)]
    pub frequency_hz: f64,
    #[serde(default)]
    pub switching_delay_s: f64,
    #[serde(rename = "resistance_mbar_s_per_mL", default)]
    pub resistance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LobeDef {
    pub p_snap_through_mbar: f64,
    pub p_snap_back_mbar: f64,
    #[serde(rename = "v_fold_lo_uL")]
    pub v_fold_lo: f64,
    #[serde(rename = "v_fold_hi_uL")]
    pub v_fold_hi: f64,
}

impl LobeDef {
    fn spec(&self) -> SnapSpec {
        SnapSpec::from_folds(
            self.p_snap_through_mbar * PA_PER_MBAR,
            self.p_snap_back_mbar * PA_PER_MBAR,
            self.v_fold_lo * M3_PER_UL,
            self.v_fold_hi * M3_PER_UL,
        )
    }
}

fn default_diameter() -> f64 {
    10.0
}

fn default_depth() -> f64 {
    3.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomeModel {
    pub weak: LobeDef,
    pub strong: LobeDef,
    #[serde(default)]
    pub tau_snap_ms: Option<f64>,
    #[serde(default = "default_diameter")]
    pub support_diameter_mm: f64,
    #[serde(default = "default_depth")]
    pub support_depth_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default)]
    pub t_end_s: Option<f64>,
    /// Duration in drive periods, for periodic sources.
    #[serde(default)]
    pub periods: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt_min_s: Option<f64>,
    pub dt_max_s: Option<f64>,
    pub rtol: Option<f64>,
    #[serde(rename = "atol_uL")]
    pub atol: Option<f64>,
    pub output_interval_s: Option<f64>,
    pub max_steps: Option<usize>,
    pub tau_snap_ms: Option<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Node whose pressure is integrated against net injected volume.
    #[serde(default)]
    pub pv_node: Option<String>,
    #[serde(default = "yes")]
    pub thresholds: bool,
    /// Elements whose tip paths are exported; the first one is measured.
    #[serde(default)]
    pub trajectory: Vec<String>,
    #[serde(default)]
    pub trajectory_window_s: Option<[f64; 2]>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { pv_node: None, thresholds: true, trajectory: Vec::new(), trajectory_window_s: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicsSection {
    pub pillar_length_mm: f64,
    pub lateral_gain_mm: f64,
    pub vertical_gain_mm: f64,
}

fn default_settle() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitSection {
    pub legs: Vec<String>,
    pub contact_height_mm: f64,
    /// Leading periods discarded before measuring the gait.
    #[serde(default = "default_settle")]
    pub settle_periods: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupsSection {
    pub rear: Vec<String>,
    pub front: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub freqs_hz: Vec<f64>,
}

/// Parse scenario text. The raw table is kept for parameter substitution
/// and the manifest echo.
pub fn parse_scenario(text: &str) -> Result<(Scenario, toml::Table), CliError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
    let scenario = scenario_from_table(&table)?;
    Ok((scenario, table))
}

pub fn scenario_from_table(table: &toml::Table) -> Result<Scenario, CliError> {
    toml::Value::Table(table.clone()).try_into().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))
}

fn positive(what: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Validation(format!("{what} must be positive, got {v}")))
    }
}

impl Scenario {
    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("scenario")
    }

    pub fn snap_element(&self, model: &str) -> Result<SnapElement, CliError> {
        let m = self.models.get(model).ok_or_else(|| CliError::Validation(format!("unknown model `{model}`")))?;
        let tau = match (self.solver.tau_snap_ms, m.tau_snap_ms) {
            (Some(t), _) | (None, Some(t)) => t * 1e-3,
            (None, None) => DEFAULT_TAU_SNAP,
        };
        let base = support_chamber_volume(m.support_diameter_mm * M_PER_MM, m.support_depth_mm * M_PER_MM);
        SnapElement::new(m.weak.spec(), m.strong.spec(), tau, base)
            .map_err(|e| CliError::Validation(format!("model `{model}`: {e}")))
    }

    pub fn network(&self) -> Result<Network, CliError> {
        let nodes = self
            .network
            .nodes
            .iter()
            .map(|n| NodeSpec { name: n.name.clone(), dead_volume: n.dead_volume_ml * M3_PER_ML, ambient: n.ambient })
            .collect();
        let mut edges = Vec::new();
        for e in &self.network.edges {
            let resistance = match (e.resistance, e.channel_diameter_mm, e.channel_length_mm) {
                (Some(r), None, None) => r * RESISTANCE_UNIT,
                (None, Some(d), Some(l)) => {
                    let g = ChannelGeometry { diameter: d * M_PER_MM, length: l * M_PER_MM, fluid_viscosity: AIR_VISCOSITY };
                    g.check().map_err(|err| CliError::Validation(format!("edge `{}`: {err}", e.name)))?;
                    channel_resistance(&g)
                }
                _ => {
                    return Err(CliError::Validation(format!(
                        "edge `{}` needs either resistance_mbar_s_per_mL or channel_diameter_mm with channel_length_mm",
                        e.name
                    )))
                }
            };
            edges.push(EdgeSpec { name: e.name.clone(), from: e.from.clone(), to: e.to.clone(), resistance });
        }
        let mut elements = Vec::new();
        for el in &self.network.elements {
            let kind = match (&el.model, el.capacitance) {
                (Some(m), None) => ElementKind::Snap(self.snap_element(m)?),
                (None, Some(c)) => ElementKind::Capacitance(c * CAPACITANCE_UNIT),
                _ => {
                    return Err(CliError::Validation(format!(
                        "element `{}` needs exactly one of model or capacitance_uL_per_mbar",
                        el.name
                    )))
                }
            };
            elements.push(ElementSpec { name: el.name.clone(), node: el.node.clone(), kind });
        }
        let mut sources = Vec::new();
        for s in &self.network.sources {
            let need = |v: Option<f64>, field: &str| {
                v.ok_or_else(|| CliError::Validation(format!("source `{}` needs {field}", s.name)))
            };
            let (source, resistance) = match s.kind {
                SourceKindDef::FlowRamp => {
                    let mut src = Source::flow_ramp(
                        need(s.rate, "rate_mL_s")? * M3_PER_ML,
                        need(s.target_volume, "target_volume_mL")? * M3_PER_ML,
                        s.switching_delay_s,
                    );
                    src.frequency = s.frequency_hz;
                    (src, s.resistance.map(|r| r * RESISTANCE_UNIT))
                }
                SourceKindDef::PressureRampWave => (
                    Source::pressure_wave(need(s.amplitude_mbar, "amplitude_mbar")? * PA_PER_MBAR, s.frequency_hz),
                    Some(need(s.resistance, "resistance_mbar_s_per_mL")? * RESISTANCE_UNIT),
                ),
                SourceKindDef::Vent => (Source::vent(), Some(need(s.resistance, "resistance_mbar_s_per_mL")? * RESISTANCE_UNIT)),
            };
            sources.push(SourceSpec { name: s.name.clone(), node: s.node.clone(), source, resistance });
        }
        Ok(Network { nodes, edges, elements, sources })
    }

    pub fn checked_network(&self) -> Result<CheckedNetwork, CliError> {
        validate(&self.network()?).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let d = SolverConfig::default();
        let s = &self.solver;
        let cfg = SolverConfig {
            dt_min: s.dt_min_s.unwrap_or(d.dt_min),
            dt_max: s.dt_max_s.unwrap_or(d.dt_max),
            rtol: s.rtol.unwrap_or(d.rtol),
            atol: s.atol.map_or(d.atol, |a| a * M3_PER_UL),
            max_steps: s.max_steps.unwrap_or(d.max_steps),
            tau_snap: s.tau_snap_ms.map(|t| t * 1e-3),
            output_interval: s.output_interval_s.unwrap_or(d.output_interval),
        };
        cfg.check().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(cfg)
    }

    /// End time, either given directly or as a number of drive periods.
    pub fn t_end(&self, net: &CheckedNetwork) -> Result<f64, CliError> {
        match (self.simulation.t_end_s, self.simulation.periods) {
            (Some(t), None) => positive("simulation.t_end_s", t),
            (None, Some(n)) => {
                let p = net.drive_period().ok_or_else(|| {
                    CliError::Validation("simulation.periods needs a source with positive frequency".into())
                })?;
                Ok(positive("simulation.periods", n)? * p)
            }
            _ => Err(CliError::Validation("simulation needs exactly one of t_end_s or periods".into())),
        }
    }

    pub fn tip_kinematics(&self) -> Option<TipKinematics> {
        self.kinematics.map(|k| TipKinematics {
            pillar_length: k.pillar_length_mm * M_PER_MM,
            lateral_gain: k.lateral_gain_mm * M_PER_MM,
            vertical_gain: k.vertical_gain_mm * M_PER_MM,
        })
    }

    pub fn contact_model(&self) -> Option<ContactModel> {
        self.gait
            .as_ref()
            .map(|g| ContactModel { contact_height: g.contact_height_mm * M_PER_MM, mode: ContactMode::Ratchet })
    }

    pub fn groups(&self) -> Option<Groups> {
        self.groups.as_ref().map(|g| Groups { rear: g.rear.clone(), front: g.front.clone() })
    }

    /// Name of the source a frequency sweep drives.
    pub fn sweep_source(&self) -> Result<String, CliError> {
        if let Some(name) = self.sweep.as_ref().and_then(|s| s.source.clone()) {
            let s = self
                .network
                .sources
                .iter()
                .find(|s| s.name == name)
                .ok_or_else(|| CliError::Validation(format!("sweep source `{name}` not found")))?;
            if s.kind != SourceKindDef::PressureRampWave {
                return Err(CliError::Validation(format!("sweep source `{name}` must be PRESSURE_RAMP_WAVE")));
            }
            return Ok(name);
        }
        let waves: Vec<&SourceDef> =
            self.network.sources.iter().filter(|s| s.kind == SourceKindDef::PressureRampWave).collect();
        match waves.as_slice() {
            [s] => Ok(s.name.clone()),
            [] => Err(CliError::Validation("sweep needs a PRESSURE_RAMP_WAVE source".into())),
            _ => Err(CliError::Validation("several PRESSURE_RAMP_WAVE sources; set sweep.source".into())),
        }
    }

    /// Check everything that can be checked without simulating.
    pub fn check(&self) -> Result<CheckedNetwork, CliError> {
        let net = self.checked_network()?;
        self.solver_config()?;
        self.t_end(&net)?;
        if let Some(k) = self.tip_kinematics() {
            k.check().map_err(|e| CliError::Validation(format!("kinematics: {e}")))?;
        }
        let known = |name: &String| net.element_index(name).is_some();
        for name in &self.analysis.trajectory {
            if !known(name) {
                return Err(CliError::Validation(format!("analysis.trajectory: unknown element `{name}`")));
            }
        }
        if let Some(node) = &self.analysis.pv_node {
            if net.node_index(node).is_none() {
                return Err(CliError::Validation(format!("analysis.pv_node: unknown node `{node}`")));
            }
        }
        if let Some(g) = &self.gait {
            if self.kinematics.is_none() {
                return Err(CliError::Validation("gait needs a kinematics section".into()));
            }
            if g.legs.is_empty() {
                return Err(CliError::Validation("gait.legs is empty".into()));
            }
            if let Some(bad) = g.legs.iter().find(|l| !known(l)) {
                return Err(CliError::Validation(format!("gait.legs: unknown element `{bad}`")));
            }
            if !(g.settle_periods >= 0.0) {
                return Err(CliError::Validation("gait.settle_periods must be >= 0".into()));
            }
        }
        if let Some(g) = &self.groups {
            if let Some(bad) = g.rear.iter().chain(&g.front).find(|l| !known(l)) {
                return Err(CliError::Validation(format!("groups: unknown element `{bad}`")));
            }
        }
        if let Some(s) = &self.sweep {
            if let Some(f) = s.freqs_hz.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
                return Err(CliError::Validation(format!("sweep frequency {f} must be positive")));
            }
        }
        Ok(net)
    }
}

fn segment<'a>(v: &'a mut toml::Value, seg: &str) -> Option<&'a mut toml::Value> {
    match v {
        toml::Value::Table(t) => t.get_mut(seg),
        toml::Value::Array(items) => items.iter_mut().find(|it| it.get("name").and_then(|n| n.as_str()) == Some(seg)),
        _ => None,
    }
}

/// Look up a dotted path. Inside arrays of tables a segment selects the
/// entry with that `name`, e.g. `network.edges.bridge.resistance_mbar_s_per_mL`.
pub fn get_number(table: &toml::Table, path: &str) -> Option<f64> {
    let mut v = toml::Value::Table(table.clone());
    let mut cur = &mut v;
    for seg in path.split('.') {
        cur = segment(cur, seg)?;
    }
    match cur {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

pub fn set_number(table: &mut toml::Table, path: &str, x: f64) -> Result<(), CliError> {
    let missing = || CliError::Validation(format!("parameter path `{path}` does not name a number in the scenario"));
    let (parent, last) = path.rsplit_once('.').ok_or_else(missing)?;
    let mut root = toml::Value::Table(std::mem::take(table));
    let result = (|| {
        let mut cur = &mut root;
        for seg in parent.split('.') {
            cur = segment(cur, seg).ok_or_else(missing)?;
        }
        let slot = cur.as_table_mut().and_then(|t| t.get_mut(last)).ok_or_else(missing)?;
        if !(slot.is_float() || slot.is_integer()) {
            return Err(missing());
        }
        *slot = toml::Value::Float(x);
        Ok(())
    })();
    if let toml::Value::Table(t) = root {
        *table = t;
    }
    result
}
