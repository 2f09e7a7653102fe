//! Network assembly, stiff integration with snap events, and trace export.

pub mod export;
pub mod network;
pub mod sdirk;
pub mod sim;

pub use export::{read_trace_csv, write_events_csv, write_trace_csv, CsvError, TraceFile, TraceTable};
pub use network::{
    validate, CheckedNetwork, EdgeSpec, ElementKind, ElementSpec, Network, NetworkError, NodeSpec, SourceSpec,
};
pub use sim::{detect_snap_events, simulate, EventKind, LobeInfo, SimError, SnapEvent, SolverConfig, Trace};
