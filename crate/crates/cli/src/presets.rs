//! Scenario and target presets compiled into the binary.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Scenario,
    Targets,
}

impl Kind {
    pub fn label(self) -> &'static str {
        match self {
            Kind::Scenario => "scenario",
            Kind::Targets => "targets",
        }
    }
}

pub const SCENARIOS: [(&str, &str); 3] = [
    ("single_dome", include_str!("../presets/single_dome.toml")),
    ("quadruped_1hz", include_str!("../presets/quadruped_1hz.toml")),
    ("freq_sweep", include_str!("../presets/freq_sweep.toml")),
];

pub const TARGETS: [(&str, &str); 4] = [
    ("fig10_sim", include_str!("../presets/fig10_sim.toml")),
    ("fig10_experiment", include_str!("../presets/fig10_experiment.toml")),
    ("stride_1hz", include_str!("../presets/stride_1hz.toml")),
    ("trajectory", include_str!("../presets/trajectory.toml")),
];

fn table(kind: Kind) -> &'static [(&'static str, &'static str)] {
    match kind {
        Kind::Scenario => &SCENARIOS,
        Kind::Targets => &TARGETS,
    }
}

pub fn lookup(kind: Kind, name: &str) -> Option<&'static str> {
    table(kind).iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn names(kind: Kind) -> Vec<&'static str> {
    table(kind).iter().map(|(n, _)| *n).collect()
}
