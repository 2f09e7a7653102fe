use std::collections::HashMap;

use thiserror::Error;

use crate::elements::{ElementError, SnapElement, Source, SourceKind, P_ATM};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("disconnected graph: node `{0}` cannot reach the rest of the network")]
    DisconnectedGraph(String),
    #[error("dangling reference: {owner} refers to unknown node `{node}`")]
    DanglingReference { owner: String, node: String },
    #[error("non-positive resistance on {0}")]
    NonpositiveResistance(String),
    #[error("node `{0}` has no gas volume or capacitance")]
    NonpositiveCapacity(String),
    #[error("network must have exactly one ambient node, found {0}")]
    AmbientCount(usize),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("{owner}: {source}")]
    Element { owner: String, source: ElementError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    /// Gas volume not belonging to any element (tubing, supply), m³.
    pub dead_volume: f64,
    pub ambient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub name: String,
    pub from: String,
    pub to: String,
    pub resistance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    Snap(SnapElement),
    /// Linear compliance in m³/Pa.
    Capacitance(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementSpec {
    pub name: String,
    pub node: String,
    pub kind: ElementKind,
}

/// A source acting on `node`. Pressure sources and vents act through
/// `resistance`; flow sources inject directly.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub name: String,
    pub node: String,
    pub source: Source,
    pub resistance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
    pub elements: Vec<ElementSpec>,
    pub sources: Vec<SourceSpec>,
}

/// Index of a node in a checked network; `None` is the ambient node.
pub type NodeRef = Option<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedEdge {
    pub name: String,
    pub from: NodeRef,
    pub to: NodeRef,
    pub resistance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedElement {
    pub name: String,
    pub node: usize,
    pub kind: ElementKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedSource {
    pub name: String,
    pub node: usize,
    pub source: Source,
    pub resistance: f64,
}

/// Validated network with resolved indices. Node order is declaration
/// order with the ambient node removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedNetwork {
    pub ambient: String,
    pub node_names: Vec<String>,
    pub dead_volumes: Vec<f64>,
    pub edges: Vec<CheckedEdge>,
    pub elements: Vec<CheckedElement>,
    pub sources: Vec<CheckedSource>,
}

impl CheckedNetwork {
    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.node_names.iter().position(|n| n == name)
    }

    pub fn element_index(&self, name: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.name == name)
    }

    pub fn snap_elements(&self) -> impl Iterator<Item = (usize, &CheckedElement, &SnapElement)> {
        self.elements.iter().enumerate().filter_map(|(i, e)| match &e.kind {
            ElementKind::Snap(s) => Some((i, e, s)),
            ElementKind::Capacitance(_) => None,
        })
    }

    /// Smallest period among periodic sources.
    pub fn drive_period(&self) -> Option<f64> {
        self.sources
            .iter()
            .filter_map(|s| s.source.period())
            .min_by(f64::total_cmp)
    }
}

pub fn validate(network: &Network) -> Result<CheckedNetwork, NetworkError> {
    let mut seen: HashMap<&str, ()> = HashMap::new();
    for n in &network.nodes {
        if seen.insert(&n.name, ()).is_some() {
            return Err(NetworkError::DuplicateName(n.name.clone()));
        }
    }
    let ambients: Vec<&NodeSpec> = network.nodes.iter().filter(|n| n.ambient).collect();
    if ambients.len() != 1 {
        return Err(NetworkError::AmbientCount(ambients.len()));
    }
    let ambient = ambients[0].name.clone();
    let inner: Vec<&NodeSpec> = network.nodes.iter().filter(|n| !n.ambient).collect();
    let index: HashMap<&str, usize> = inner.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
    let resolve = |owner: &str, node: &str| -> Result<NodeRef, NetworkError> {
        if node == ambient {
            Ok(None)
        } else {
            index.get(node).map(|&i| Some(i)).ok_or_else(|| NetworkError::DanglingReference {
                owner: owner.to_string(),
                node: node.to_string(),
            })
        }
    };
    let resolve_inner = |owner: &str, node: &str| -> Result<usize, NetworkError> {
        resolve(owner, node)?.ok_or_else(|| NetworkError::DanglingReference {
            owner: owner.to_string(),
            node: format!("{node} (ambient cannot hold elements or sources)"),
        })
    };

    for n in &inner {
        if !(n.dead_volume >= 0.0 && n.dead_volume.is_finite()) {
            return Err(NetworkError::NonpositiveCapacity(n.name.clone()));
        }
    }

    let mut names: HashMap<&str, ()> = HashMap::new();
    let mut edges = Vec::with_capacity(network.edges.len());
    for e in &network.edges {
        let owner = format!("edge `{}`", e.name);
        if names.insert(&e.name, ()).is_some() {
            return Err(NetworkError::DuplicateName(e.name.clone()));
        }
        let from = resolve(&owner, &e.from)?;
        let to = resolve(&owner, &e.to)?;
        if !(e.resistance > 0.0 && e.resistance.is_finite()) {
            return Err(NetworkError::NonpositiveResistance(owner));
        }
        edges.push(CheckedEdge { name: e.name.clone(), from, to, resistance: e.resistance });
    }

    let mut elements = Vec::with_capacity(network.elements.len());
    for el in &network.elements {
        let owner = format!("element `{}`", el.name);
        if names.insert(&el.name, ()).is_some() {
            return Err(NetworkError::DuplicateName(el.name.clone()));
        }
        let node = resolve_inner(&owner, &el.node)?;
        if let ElementKind::Capacitance(c) = el.kind {
            if !(c > 0.0 && c.is_finite()) {
                return Err(NetworkError::NonpositiveCapacity(owner));
            }
        }
        elements.push(CheckedElement { name: el.name.clone(), node, kind: el.kind.clone() });
    }

    let mut sources = Vec::with_capacity(network.sources.len());
    for s in &network.sources {
        let owner = format!("source `{}`", s.name);
        if names.insert(&s.name, ()).is_some() {
            return Err(NetworkError::DuplicateName(s.name.clone()));
        }
        let node = resolve_inner(&owner, &s.node)?;
        s.source.check().map_err(|source| NetworkError::Element { owner: owner.clone(), source })?;
        let resistance = match s.source.kind {
            SourceKind::FlowRamp => 0.0,
            _ => match s.resistance {
                Some(r) if r > 0.0 && r.is_finite() => r,
                _ => return Err(NetworkError::NonpositiveResistance(owner)),
            },
        };
        sources.push(CheckedSource { name: s.name.clone(), node, source: s.source, resistance });
    }

    // Union-find over inner nodes plus the ambient node at index n. A sealed
    // network whose ambient node stays isolated is still accepted.
    let n = inner.len();
    let mut parent: Vec<usize> = (0..=n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut union = |a: usize, b: usize| {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    for e in &edges {
        union(e.from.unwrap_or(n), e.to.unwrap_or(n));
    }
    for s in &sources {
        if s.source.kind != SourceKind::FlowRamp {
            union(s.node, n);
        }
    }
    let root = find(&mut parent, 0);
    for (i, node) in inner.iter().enumerate() {
        if find(&mut parent, i) != root {
            return Err(NetworkError::DisconnectedGraph(node.name.clone()));
        }
    }

    let mut capacity = vec![0.0; n];
    for (i, node) in inner.iter().enumerate() {
        capacity[i] += node.dead_volume / P_ATM;
    }
    for el in &elements {
        capacity[el.node] += match &el.kind {
            ElementKind::Snap(s) => (s.base_chamber_volume + s.weak.spec.v_fold_lo + s.strong.spec.v_fold_lo) / P_ATM,
            ElementKind::Capacitance(c) => *c,
        };
    }
    for (i, node) in inner.iter().enumerate() {
        if capacity[i] <= 0.0 {
            return Err(NetworkError::NonpositiveCapacity(node.name.clone()));
        }
    }

    Ok(CheckedNetwork {
        ambient,
        node_names: inner.iter().map(|n| n.name.clone()).collect(),
        dead_volumes: inner.iter().map(|n| n.dead_volume).collect(),
        edges,
        elements,
        sources,
    })
}
