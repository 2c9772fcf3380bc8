//! Collisional gate design: merge pulses, fidelities, optimization and gate
//! assembly.

pub mod gate;
pub mod model;
pub mod pulse;
pub mod simplex;
pub mod sweep;

pub use gate::{
    assemble_gate_times, frequency_to_phase, gate_report, gate_scattering, GateKind, GateReport, GateTiming,
    PulseRecord,
};
pub use model::{Detail, ErrorBox, MergeConfig, MergeEvaluation, MergeModel, MergePotential, Objective, ScatterModel};
pub use pulse::{read_pulse, ControlPulse, Interpolation, Knot, PulseFile};
pub use simplex::{maximize, SimplexResult, SimplexSettings};
pub use sweep::{
    continuation_sweep, optimize, pulse_from_parameters, pulse_parameters, read_sweep_csv, sweep_reports,
    write_sweep_csv, Optimized, SweepPoint, SweepRow,
};
