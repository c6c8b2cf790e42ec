use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::projection_factory::OperatorFamily;
use crate::spectral_calculus::eigensolve;
use crate::C64;

/// Consecutive eigenvectors must overlap at least this much.
pub const MIN_OVERLAP: f64 = 0.9;

#[derive(Clone, Debug, Serialize)]
pub struct EnergyTrack {
    pub s: Vec<f64>,
    pub energy: Vec<f64>,
    pub gap: Vec<f64>,
    /// |⟨v(s_{k-1}), v(s_k)⟩|; 1 at the first sample.
    pub overlap: Vec<f64>,
    /// Position of the tracked eigenvalue in the ascending spectrum.
    pub level: usize,
    pub gap_min: f64,
}

impl EnergyTrack {
    pub fn min_gap(&self) -> f64 {
        self.gap.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_overlap(&self) -> f64 {
        self.overlap.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Piecewise-linear E(s), clamped at the ends.
    pub fn interpolate(&self, s: f64) -> f64 {
        let k = self.s.partition_point(|&x| x <= s);
        if k == 0 {
            return self.energy[0];
        }
        if k == self.s.len() {
            return *self.energy.last().expect("nonempty track");
        }
        let (s0, s1) = (self.s[k - 1], self.s[k]);
        let t = (s - s0) / (s1 - s0);
        self.energy[k - 1] * (1.0 - t) + self.energy[k] * t
    }
}

fn gap_at(values: &[f64], k: usize) -> f64 {
    let below = if k > 0 { values[k] - values[k - 1] } else { f64::INFINITY };
    let above = values.get(k + 1).map_or(f64::INFINITY, |v| v - values[k]);
    below.min(above)
}

/// Follows the single eigenvalue found in `window` at the first s by maximal
/// eigenvector overlap. Any change of its position in the spectrum, an
/// overlap below [`MIN_OVERLAP`] or a gap below `gap_min` aborts the track.
pub fn track_eigenvalue(
    h_omega: &OperatorFamily,
    s_grid: &[f64],
    window: (f64, f64),
    gap_min: f64,
) -> Result<EnergyTrack> {
    if s_grid.is_empty() || s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("s-grid must be nonempty and strictly increasing".into()));
    }
    if !(window.1 > window.0) {
        return Err(Error::Invalid(format!("empty energy window [{}, {}]", window.0, window.1)));
    }
    let mut track = EnergyTrack {
        s: Vec::new(),
        energy: Vec::new(),
        gap: Vec::new(),
        overlap: Vec::new(),
        level: 0,
        gap_min,
    };
    let mut prev: Option<(Vec<usize>, Vec<C64>)> = None;
    for &s in s_grid {
        let h = h_omega(s)?;
        let eig = eigensolve(&h)?;
        let (k, overlap) = match &prev {
            None => {
                let inside: Vec<usize> =
                    (0..eig.dim()).filter(|&i| eig.values[i] >= window.0 && eig.values[i] <= window.1).collect();
                if inside.len() != 1 {
                    return Err(Error::Precondition(format!(
                        "{} eigenvalues in the seed window [{}, {}] at s = {s}",
                        inside.len(),
                        window.0,
                        window.1
                    )));
                }
                track.level = inside[0];
                (inside[0], 1.0)
            }
            Some((sites, v)) => {
                if *sites != h.sites {
                    return Err(Error::Shape(format!("domain of H_Omega changed at s = {s}")));
                }
                let ov: Vec<f64> =
                    (0..eig.dim()).map(|i| linalg::vdot(v, &linalg::column(&eig.vectors, i)).norm()).collect();
                let best = (0..ov.len()).max_by(|&a, &b| ov[a].total_cmp(&ov[b])).expect("nonempty spectrum");
                if ov[best] < MIN_OVERLAP || best != track.level {
                    return Err(Error::Crossing { s, overlap: ov[track.level] });
                }
                (best, ov[best])
            }
        };
        let gap = gap_at(&eig.values, k);
        if gap < gap_min {
            return Err(Error::Gap(format!("gap {gap:e} below {gap_min} at s = {s}")));
        }
        track.s.push(s);
        track.energy.push(eig.values[k]);
        track.gap.push(gap);
        track.overlap.push(overlap);
        prev = Some((h.sites.clone(), linalg::column(&eig.vectors, k)));
    }
    Ok(track)
}
