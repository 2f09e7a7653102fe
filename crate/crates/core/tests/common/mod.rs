#![allow(dead_code)]

use snapnet::elements::{support_chamber_volume, SnapElement, SnapSpec, Source};
use snapnet::netsim::{validate, CheckedNetwork, EdgeSpec, ElementKind, ElementSpec, Network, NodeSpec, SourceSpec};

pub const MBAR: f64 = 100.0;
pub const UL: f64 = 1e-9;
pub const ML: f64 = 1e-6;
/// 1 mbar·s/mL in Pa·s/m³.
pub const MBAR_S_PER_ML: f64 = 1e8;

pub fn node(name: &str, dead_volume: f64) -> NodeSpec {
    NodeSpec { name: name.into(), dead_volume, ambient: false }
}

pub fn ambient() -> NodeSpec {
    NodeSpec { name: "atm".into(), dead_volume: 0.0, ambient: true }
}

pub fn edge(name: &str, from: &str, to: &str, resistance: f64) -> EdgeSpec {
    EdgeSpec { name: name.into(), from: from.into(), to: to.into(), resistance }
}

pub fn cap(name: &str, node: &str, c: f64) -> ElementSpec {
    ElementSpec { name: name.into(), node: node.into(), kind: ElementKind::Capacitance(c) }
}

pub fn dome_with(weak_sb_mbar: f64) -> SnapElement {
    let weak = SnapSpec::from_folds(32.8 * MBAR, weak_sb_mbar * MBAR, 20.0 * UL, 60.0 * UL);
    let strong = SnapSpec::from_folds(41.0 * MBAR, 0.0, 20.0 * UL, 60.0 * UL);
    SnapElement::new(weak, strong, 2e-3, support_chamber_volume(10e-3, 3.5e-3)).unwrap()
}

pub fn dome_spec(name: &str, node: &str, weak_sb_mbar: f64) -> ElementSpec {
    ElementSpec { name: name.into(), node: node.into(), kind: ElementKind::Snap(dome_with(weak_sb_mbar)) }
}

/// Weak-lobe snap-back pressure after the threshold fit (mbar).
pub const FITTED_WEAK_SB: f64 = 7.945;

/// One dome on a 6 mL cavity, driven by the 0.4 mL pump cycle.
pub fn single_dome(rate: f64) -> CheckedNetwork {
    single_dome_with(rate, 3.28)
}

pub fn single_dome_with(rate: f64, weak_sb_mbar: f64) -> CheckedNetwork {
    validate(&Network {
        nodes: vec![node("cavity", 6.0 * ML), ambient()],
        edges: vec![],
        elements: vec![dome_spec("dome", "cavity", weak_sb_mbar)],
        sources: vec![SourceSpec {
            name: "pump".into(),
            node: "cavity".into(),
            source: Source::flow_ramp(rate, 0.4 * ML, 0.1),
            resistance: None,
        }],
    })
    .unwrap()
}

/// Four domes, rear group on the inlet node, front group behind the bridge.
pub fn quadruped(freq: f64, bridge: f64, amplitude: f64) -> CheckedNetwork {
    validate(&Network {
        nodes: vec![node("rear", 30.0 * ML), node("front", 2.0 * ML), ambient()],
        edges: vec![
            edge("bridge", "rear", "front", bridge),
            edge("outlet", "front", "atm", 3.9 * MBAR_S_PER_ML),
        ],
        elements: vec![
            dome_spec("RL", "rear", FITTED_WEAK_SB),
            dome_spec("RR", "rear", FITTED_WEAK_SB),
            dome_spec("FL", "front", FITTED_WEAK_SB),
            dome_spec("FR", "front", FITTED_WEAK_SB),
        ],
        sources: vec![SourceSpec {
            name: "supply".into(),
            node: "rear".into(),
            source: Source::pressure_wave(amplitude, freq),
            resistance: Some(4.7 * MBAR_S_PER_ML),
        }],
    })
    .unwrap()
}

pub const BRIDGE: f64 = 2.6 * MBAR_S_PER_ML;

pub fn rear_front() -> snapnet::gait::Groups {
    snapnet::gait::Groups { rear: vec!["RL".into(), "RR".into()], front: vec!["FL".into(), "FR".into()] }
}

pub fn calibrated_kinematics() -> snapnet::gait::TipKinematics {
    snapnet::gait::TipKinematics { pillar_length: 5e-3, lateral_gain: 4.571e-3, vertical_gain: 4.899e-3 }
}
