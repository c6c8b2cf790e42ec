//! Shape-resonance model problems: the J/I/O partition, Ω with certified
//! margins, tracking of the interior eigenvalue, and the built-in catalogue.

mod catalogue;
mod regions;
mod scenario;
mod track;

pub use catalogue::{annulus_2d, builtin_scenarios, double_barrier, scenario_by_name, spectral_control};
pub use regions::{choose_omega, classify_regions, margin_certificate, MarginCertificate, OmegaChoice, Regions};
pub use scenario::{OmegaRule, ScenarioSetup, ScenarioSummary, ShapeResonanceScenario};
pub use track::{track_eigenvalue, EnergyTrack, MIN_OVERLAP};
