use serde::{Deserialize, Serialize};

use super::decompose::Variant;
use crate::error::{Error, Result};
use crate::spectral_calculus::{build_bump, triple_norm};

/// Measured inputs of the distance bound; `None` marks a quantity the run did
/// not produce.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BoundInputs {
    pub delta: Option<f64>,
    pub delta_prime: Option<f64>,
    pub pdot_max: Option<f64>,
    pub pddot_max: Option<f64>,
    pub a: Option<f64>,
    pub eps: Option<f64>,
}

/// Each additive term of the right-hand sides, kept apart for diagnosis.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundTerms {
    /// 2δ'
    pub delta_prime: f64,
    /// 2 max‖Ṗ‖ |||g|||₃ δ
    pub pdot_delta: f64,
    /// K_a ε
    pub k_eps: f64,
    /// δ/ε
    pub delta_over_eps: f64,
    /// δ/a²
    pub delta_over_a2: f64,
    /// K̃_a ε
    pub k_tilde_eps: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundComponents {
    pub delta: f64,
    pub delta_prime: f64,
    pub g3: f64,
    pub g4: f64,
    pub g5: f64,
    pub pdot_max: f64,
    pub pddot_max: f64,
    pub a: f64,
    pub eps: f64,
    pub variant: Variant,
    pub k_a: f64,
    pub k_tilde_a: f64,
    pub terms: BoundTerms,
    pub rhs_main: f64,
    pub rhs_main_1: f64,
}

fn need(x: Option<f64>, name: &str) -> Result<f64> {
    match x {
        Some(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Some(v) => Err(Error::Invalid(format!("bound input {name} = {v} is not a finite non-negative number"))),
        None => Err(Error::Invalid(format!("missing bound input {name}"))),
    }
}

/// K_a, K̃_a and both right-hand sides with every constant C set to 1.
pub fn assemble_bounds(inputs: &BoundInputs, variant: Variant) -> Result<BoundComponents> {
    let delta = need(inputs.delta, "delta")?;
    let delta_prime = need(inputs.delta_prime, "delta_prime")?;
    let pdot_max = need(inputs.pdot_max, "pdot_max")?;
    let pddot_max = need(inputs.pddot_max, "pddot_max")?;
    let a = need(inputs.a, "a")?;
    let eps = need(inputs.eps, "eps")?;
    if eps == 0.0 {
        return Err(Error::Invalid("eps must be positive".into()));
    }
    let g = build_bump(a)?;
    let g3 = triple_norm(&g, 3)?.value;
    let g4 = triple_norm(&g, 4)?.value;
    let g5 = triple_norm(&g, 5)?.value;
    let k_a = 2.0 * g3 * pdot_max * pdot_max + 2.0 * g3 * pdot_max + (g3 * pddot_max + g4 * pdot_max);
    let k_tilde_a = g5 + g4 * pdot_max + (1.0 + pdot_max) / (a * a);
    let terms = BoundTerms {
        delta_prime: 2.0 * delta_prime,
        pdot_delta: 2.0 * pdot_max * g3 * delta,
        k_eps: k_a * eps,
        delta_over_eps: delta / eps,
        delta_over_a2: delta / (a * a),
        k_tilde_eps: k_tilde_a * eps,
    };
    let rhs_main = terms.delta_prime + terms.pdot_delta + terms.k_eps + terms.delta_over_eps;
    let rhs_main_1 =
        terms.delta_prime + terms.pdot_delta + terms.delta_over_a2 + terms.k_tilde_eps + terms.delta_over_eps;
    Ok(BoundComponents {
        delta,
        delta_prime,
        g3,
        g4,
        g5,
        pdot_max,
        pddot_max,
        a,
        eps,
        variant,
        k_a,
        k_tilde_a,
        terms,
        rhs_main,
        rhs_main_1,
    })
}

impl BoundComponents {
    /// Right-hand side of the nearly-spectral bound with ‖Ṗ(s)‖ at one s.
    pub fn rhs_main_at(&self, pdot_s: f64) -> f64 {
        2.0 * self.delta_prime + 2.0 * pdot_s * self.g3 * self.delta + self.k_a * self.eps + self.delta / self.eps
    }

    pub fn rhs_main_1_at(&self, pdot_s: f64) -> f64 {
        2.0 * self.delta_prime
            + 2.0 * pdot_s * self.g3 * self.delta
            + self.delta / (self.a * self.a)
            + self.k_tilde_a * self.eps
            + self.delta / self.eps
    }

    /// The right-hand side matching `variant`.
    pub fn rhs(&self) -> f64 {
        match self.variant {
            Variant::One => self.rhs_main,
            Variant::Two => self.rhs_main_1,
        }
    }

    /// Minimiser of K_a ε + δ/ε.
    pub fn eps_star(&self) -> f64 {
        (self.delta / self.k_a).sqrt()
    }

    /// Same components at another ε.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        assemble_bounds(
            &BoundInputs {
                delta: Some(self.delta),
                delta_prime: Some(self.delta_prime),
                pdot_max: Some(self.pdot_max),
                pddot_max: Some(self.pddot_max),
                a: Some(self.a),
                eps: Some(eps),
            },
            self.variant,
        )
    }
}
