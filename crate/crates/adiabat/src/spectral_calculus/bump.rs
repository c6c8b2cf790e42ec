use serde::{Deserialize, Serialize};

use super::quad;
use crate::error::{Error, Result};

fn binom(n: u64, k: u64) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * (n + 1 - j) as f64 / j as f64)
}

/// Smoothstep S_n: the degree 2n+1 polynomial rising from 0 to 1 on [0, 1]
/// with derivatives 1..n vanishing at both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Smoothstep {
    pub n: usize,
    /// Ascending monomial coefficients.
    pub coeffs: Vec<f64>,
}

impl Smoothstep {
    pub fn new(n: usize) -> Self {
        let mut coeffs = vec![0.0; 2 * n + 2];
        for k in 0..=n {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[n + 1 + k] += sign * binom((n + k) as u64, k as u64) * binom((2 * n + 1) as u64, (n - k) as u64);
        }
        Smoothstep { n, coeffs }
    }

    pub fn degree(&self) -> usize {
        2 * self.n + 1
    }

    /// k-th derivative of the polynomial itself (no clamping).
    pub fn poly_deriv(&self, t: f64, k: usize) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(k)
            .map(|(j, &c)| {
                let f: f64 = (0..k).map(|m| (j - m) as f64).product();
                c * f * t.powi((j - k) as i32)
            })
            .sum()
    }

    /// Clamped step: 0 for t <= 0, 1 for t >= 1.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            self.poly_deriv(t, 0)
        }
    }

    /// k-th derivative of the clamped step.
    pub fn deriv(&self, t: f64, k: usize) -> f64 {
        if k == 0 {
            return self.eval(t);
        }
        if t <= 0.0 || t >= 1.0 {
            0.0
        } else {
            self.poly_deriv(t, k)
        }
    }
}

/// Even C⁴ plateau function: 1 on |x| <= a/2, 0 on |x| >= a, degree-9
/// smoothstep transition in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub a: f64,
    pub step: Smoothstep,
}

pub fn build_bump(a: f64) -> Result<BumpFunction> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Invalid(format!("bump width a = {a} not in (0, 1)")));
    }
    Ok(BumpFunction { a, step: Smoothstep::new(4) })
}

impl BumpFunction {
    pub fn eval(&self, x: f64) -> f64 {
        self.deriv(x, 0)
    }

    /// g^(k)(x) for k = 0..=5; exact piecewise polynomial. At the glue points
    /// the value from the plateau side is returned.
    pub fn deriv(&self, x: f64, k: usize) -> f64 {
        let half = self.a / 2.0;
        let ax = x.abs();
        if ax <= half {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if ax >= self.a {
            return 0.0;
        }
        let t = (ax - half) / half;
        if k == 0 {
            return 1.0 - self.step.poly_deriv(t, 0);
        }
        let sign = if x < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
        -self.step.poly_deriv(t, k) * (1.0 / half).powi(k as i32) * sign
    }

    pub fn support(&self) -> (f64, f64) {
        (-self.a, self.a)
    }
}

/// |||g|||_m with m = n + 2 ∈ {3, 4, 5}, constant C = 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleNorm {
    pub a: f64,
    pub index: usize,
    pub value: f64,
    pub quadrature_panels: usize,
    pub convention: String,
}

pub fn triple_norm(g: &BumpFunction, index: usize) -> Result<TripleNorm> {
    triple_norm_with_tol(g, index, 1e-13)
}

/// Σ_{k=0}^{m} ∫ (1+x²)^{(k-m+1)/2} |g^(k)(x)| dx by adaptive quadrature with
/// breakpoints at ±a/2 and ±a.
pub fn triple_norm_with_tol(g: &BumpFunction, index: usize, tol: f64) -> Result<TripleNorm> {
    if !(3..=5).contains(&index) {
        return Err(Error::Invalid(format!("triple norm index {index} not in {{3, 4, 5}}")));
    }
    let (half, a) = (g.a / 2.0, g.a);
    let mut value = 0.0;
    let mut panels = 0;
    for k in 0..=index {
        let l = k as f64 - index as f64 + 1.0;
        let f = move |x: f64| (1.0 + x * x).powf(l / 2.0) * g.deriv(x, k).abs();
        let pieces: &[(f64, f64)] = if k == 0 { &[(0.0, half), (half, a)] } else { &[(half, a)] };
        for &(lo, hi) in pieces {
            let (v, p) = quad::adaptive(&f, lo, hi, tol);
            value += 2.0 * v;
            panels += 2 * p;
        }
    }
    Ok(TripleNorm { a: g.a, index, value, quadrature_panels: panels, convention: "C=1".into() })
}
