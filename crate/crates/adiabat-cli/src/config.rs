use std::path::{Path, PathBuf};

use adiabat::propagators::EvolveOptions;
use adiabat::resonance_scenarios::{scenario_by_name, ShapeResonanceScenario};
use adiabat::verification_harness::{ARule, EpsilonSweepOptions, HbarSweepOptions, Tolerances};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// A run: a built-in scenario with optional overrides, the sweep ladders and
/// every tolerance. Unset optional keys take the scenario's own values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar_ladder: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_samples: Option<Vec<f64>>,
    #[serde(default = "default_eps_ladder")]
    pub eps_ladder: Vec<f64>,
    #[serde(default = "default_a_rule")]
    pub a_rule: ARule,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub defect: bool,
    #[serde(default = "yes")]
    pub refine: bool,
    #[serde(default = "yes")]
    pub a_halving: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub evolve: EvolveOptions,
    #[serde(default)]
    pub identities: IdentityConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentityConfig {
    /// Index into the s-samples; unset means the middle sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_index: Option<usize>,
    /// Cells between Ω∖Λ and the start of the rise of Θ.
    pub theta_offset_cells: usize,
    /// s values for the commutator decomposition.
    pub commutator_samples: Vec<f64>,
    /// X₁ by Helffer–Sjöstrand quadrature (true) or divided differences.
    pub hs: bool,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig { s_index: None, theta_offset_cells: 2, commutator_samples: vec![0.5], hs: true }
    }
}

fn default_eps_ladder() -> Vec<f64> {
    vec![0.1, 0.05, 0.025, 0.0125]
}

fn default_a_rule() -> ARule {
    ARule::HalfGap
}

fn default_fd_step() -> f64 {
    1e-3
}

fn yes() -> bool {
    true
}

pub const SCHEMA: &str = r#"# adiabat run configuration (TOML). Only `scenario` is required.

scenario = "double_barrier"     # double_barrier | spectral_control | annulus_2d

# Overrides of the scenario's own values; omit to keep them.
# n = 399                       # grid points per axis
# hbar = 0.08                   # used by epsilon sweeps and the identity suite
# hbar_ladder = [0.1, 0.08, 0.06, 0.05]
# b = 0.5                       # margin above E defining the forbidden region J
# c = 0.5                       # margin between Omega and the regions I, O
# s_samples = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]

eps_ladder = [0.1, 0.05, 0.025, 0.0125]
a_rule = "half_gap"             # "half_gap" (a = Delta/2) or { fixed = 0.2 }
fd_step = 0.001                 # finite-difference step for P' and P''
defect = false                  # also run the near-adiabatic flow (epsilon sweep)
refine = true                   # re-measure delta on the 2n+1 grid (hbar sweep)
a_halving = true                # repeat delta, delta' at a/2 (hbar sweep)
# out = "runs/example"          # output directory; --out takes precedence
# workers = 3                   # default: available cores - 1, at least 1

[evolve]
phase_budget = 0.5              # ||H - E|| ds / eps per step
max_ds = 0.01
max_steps = 2000000
backend = "chebyshev"           # chebyshev | dense_eigen
fd_step = 0.01                  # step for P' inside the near-adiabatic generator
norm_samples = 33

[identities]
# s_index = 5                   # default: middle s-sample
theta_offset_cells = 2          # < 2 breaks the support hypotheses on purpose
commutator_samples = [0.5]
hs = true

[tolerances]
resolvent_identity = 1e-10
x1_identity = 1e-6
y1_floor = 1e-10
projector_algebra = 1e-10
rhs_factor = 10.0
halving_ratio = [0.3, 0.7]
eps_star_factor = 4.0
defect_factor = 10.0
defect_floor = 1e-8
r2_min = 0.95
slope_agreement = 0.3
ratio_spread = 10.0
"#;

impl RunConfig {
    pub fn minimal(scenario: &str) -> Self {
        toml::from_str(&format!("scenario = {scenario:?}")).expect("minimal config parses")
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{e}")))
    }

    /// TOML file, or the `config` entry of a run manifest (`.json`).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let cfg = v
                .get("config")
                .ok_or_else(|| CliError::Config(format!("{}: manifest has no `config` entry", path.display())))?;
            return serde_json::from_value(cfg.clone()).map_err(|e| CliError::Config(format!("{}: {e}", path.display())));
        }
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 over a git-style blob header and the canonical TOML text.
    pub fn hash(&self) -> String {
        let body = self.to_toml();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(body.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn scenario(&self) -> Result<ShapeResonanceScenario, CliError> {
        let mut sc = scenario_by_name(&self.scenario).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(n) = self.n {
            sc = sc.with_resolution(n).map_err(|e| CliError::Config(format!("n = {n}: {e}")))?;
        }
        if let Some(h) = self.hbar {
            sc.hbar = h;
        }
        if let Some(l) = &self.hbar_ladder {
            sc.hbar_ladder = l.clone();
        }
        if let Some(b) = self.b {
            sc.b = b;
        }
        if let Some(c) = self.c {
            sc.c = c;
        }
        if let Some(s) = &self.s_samples {
            sc.s_samples = s.clone();
        }
        self.validate(&sc)?;
        Ok(sc)
    }

    fn validate(&self, sc: &ShapeResonanceScenario) -> Result<(), CliError> {
        let bad = |field: &str, why: &str| Err(CliError::Config(format!("field `{field}`: {why}")));
        let positive = |v: &[f64]| !v.is_empty() && v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !positive(&self.eps_ladder) {
            return bad("eps_ladder", "needs at least one positive value");
        }
        if !(sc.hbar > 0.0) {
            return bad("hbar", "must be positive");
        }
        if !positive(&sc.hbar_ladder) {
            return bad("hbar_ladder", "needs at least one positive value");
        }
        if !(sc.b > 0.0) || !(sc.c > 0.0) {
            return bad("b/c", "margins must be positive");
        }
        let s = &sc.s_samples;
        if s.len() < 2 || s[0] != 0.0 || *s.last().unwrap() != 1.0 || s.windows(2).any(|w| w[1] <= w[0]) {
            return bad("s_samples", "must increase strictly from 0 to 1");
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.1) {
            return bad("fd_step", "must lie in (0, 0.1)");
        }
        if self.workers == Some(0) {
            return bad("workers", "must be at least 1");
        }
        if let Some(k) = self.identities.s_index {
            if k >= s.len() {
                return bad("identities.s_index", "beyond the s-samples");
            }
        }
        Ok(())
    }

    pub fn s_index(&self, sc: &ShapeResonanceScenario) -> usize {
        self.identities.s_index.unwrap_or(sc.s_samples.len() / 2)
    }

    pub fn epsilon_options(&self) -> EpsilonSweepOptions {
        EpsilonSweepOptions {
            eps_ladder: self.eps_ladder.clone(),
            a_rule: self.a_rule,
            fd_step: self.fd_step,
            evolve: self.evolve.clone(),
            defect: self.defect,
            tolerances: self.tolerances.clone(),
        }
    }

    pub fn hbar_options(&self, sc: &ShapeResonanceScenario) -> HbarSweepOptions {
        HbarSweepOptions {
            hbar_ladder: sc.hbar_ladder.clone(),
            a_rule: self.a_rule,
            fd_step: self.fd_step,
            refine: self.refine,
            a_halving: self.a_halving,
            tolerances: self.tolerances.clone(),
        }
    }
}
