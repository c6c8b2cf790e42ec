//! Identity and decay checks on the scenarios, the ε- and ħ-sweeps, and the
//! record types they emit.

mod decay;
mod fit;
mod identities;
mod records;
mod sweeps;

pub use decay::{
    barrier_probes, boundary_layer_probe, combes_thomas_check, combes_thomas_distance_probe, default_probes,
    interior_control, projection_decay_check, BarrierProbes, CombesThomasReport, DecayProbe, ProbeDecay, ProbeNorms,
    PROBE_NORMS,
};
pub use fit::{fit_decay, DecayFit, MIN_FIT_POINTS};
pub use identities::{
    check_resolvent_geometry, geometric_resolvent_check, scenario_resolvent_masks, ResolventGeometry,
    ResolventIdentityReport, ResolventMasks,
};
pub use sweeps::{
    all_pass, epsilon_sweep, hbar_sweep, measure_inputs, sci, y1_check, ARule, AHalving, EpsilonPoint, EpsilonSweep,
    EpsilonSweepOptions, HbarRung, HbarSweep, HbarSweepOptions, MeasuredInputs, PointFailure, SampleMeasure, Verdict,
    Tolerances, Y1Row, SPECTRAL_DELTA,
};
pub use records::{csv_string, epsilon_records, hbar_records, read_csv, sort_records, write_csv, SweepRecord};
