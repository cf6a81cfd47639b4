//! Linear witnesses `W = r·1 − |Φ⟩⟨Φ|` for k-CGE, with closed-form radii,
//! white-noise visibilities and a sampled lower bound on `r`.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{KcgeError, Result};
use crate::json::format_f64;
use crate::linalg::haar_unitary;
use crate::tensor::{apply_local_operator, strides, CMatrix, DensityMatrix, PartySubset, PureState, C64};

const COEFF_ATOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedFormGhz,
    ClosedFormW4K1,
    ClosedFormW4K2,
    SampledLowerBound,
}

#[derive(Debug, Clone)]
pub struct WitnessSpec {
    pub target: PureState,
    pub level: usize,
    pub radius: f64,
    pub provenance: Provenance,
}

impl WitnessSpec {
    pub fn new(target: PureState, level: usize, radius: f64, provenance: Provenance) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(KcgeError::InvalidParameter(format!("witness radius {radius} must lie in (0, 1]")));
        }
        Ok(WitnessSpec { target, level, radius, provenance })
    }

    /// GHZ target with `r = max a_i²` (level 1).
    pub fn ghz(n: usize, d: usize, a: &[f64]) -> Result<Self> {
        let target = crate::zoo::ghz(n, d, a)?;
        Self::new(target, 1, radius_ghz(a)?, Provenance::ClosedFormGhz)
    }

    /// Four-qubit W-type target at level 1 or 2.
    pub fn w4(level: usize, a: &[f64]) -> Result<Self> {
        let r = radius_w4(level, a)?;
        let provenance = if level == 1 { Provenance::ClosedFormW4K1 } else { Provenance::ClosedFormW4K2 };
        Self::new(crate::zoo::w_type(4, a)?, level, r, provenance)
    }
}

/// `Tr[(r·1 − |Φ⟩⟨Φ|) ρ] = r − ⟨Φ|ρ|Φ⟩`; negative certifies k-CGE.
pub fn witness_value(spec: &WitnessSpec, rho: &DensityMatrix) -> Result<f64> {
    Ok(spec.radius - rho.expectation(&spec.target)?)
}

fn check_coefficients(a: &[f64]) -> Result<()> {
    let sum: f64 = a.iter().map(|x| x * x).sum();
    if a.is_empty() || (sum - 1.0).abs() > COEFF_ATOL {
        return Err(KcgeError::NotNormalized(sum.sqrt()));
    }
    Ok(())
}

pub fn radius_ghz(a: &[f64]) -> Result<f64> {
    check_coefficients(a)?;
    let sum: f64 = a.iter().map(|x| x * x).sum();
    Ok(a.iter().map(|x| x * x / sum).fold(0.0, f64::max))
}

/// Level 2: `max{1 − a_5², 1 − a_i² − a_j²}`; level 1: `max{a_5², a_i² + a_j²}`,
/// pairs over `1 <= i < j <= 4`.
pub fn radius_w4(level: usize, a: &[f64]) -> Result<f64> {
    if a.len() != 5 {
        return Err(KcgeError::InvalidParameter(format!("W4 radius needs 5 coefficients, got {}", a.len())));
    }
    check_coefficients(a)?;
    let sum: f64 = a.iter().map(|x| x * x).sum();
    let sq: Vec<f64> = a.iter().map(|x| x * x / sum).collect();
    let pair_max = (0..4)
        .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
        .map(|(i, j)| sq[i] + sq[j]);
    match level {
        1 => Ok(pair_max.fold(sq[4], f64::max)),
        2 => {
            let pair_min = pair_max.fold(f64::INFINITY, f64::min);
            Ok((1.0 - sq[4]).max(1.0 - pair_min))
        }
        _ => Err(KcgeError::LevelOutOfRange { k: level, n: 4 }),
    }
}

/// `a_1..a_4 = cos θ / 2`, `a_5 = sin θ`.
pub fn w4_theta_coefficients(theta: f64) -> [f64; 5] {
    let c = theta.cos() / 2.0;
    [c, c, c, c, theta.sin()]
}

/// `v |Φ⟩⟨Φ| + (1 − v) 1/dim`.
pub fn werner_state(target: &PureState, v: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&v) {
        return Err(KcgeError::InvalidParameter(format!("visibility {v} outside [0, 1]")));
    }
    let rho = target.to_density();
    let dim = target.dim();
    let noise = DensityMatrix::maximally_mixed(target.dims().to_vec());
    let m = rho.matrix() * C64::new(v, 0.0) + noise.matrix() * C64::new(1.0 - v, 0.0);
    DensityMatrix::new(target.dims().to_vec(), m, 1e-9 * dim as f64)
}

fn check_radius_dim(r: f64, dim: usize) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(KcgeError::InvalidParameter(format!("radius {r} must lie in (0, 1)")));
    }
    if dim < 2 {
        return Err(KcgeError::InvalidParameter(format!("dimension {dim} < 2")));
    }
    Ok(())
}

/// Visibility threshold `(dim·r + 1)/(dim + 1)`; `(16r + 1)/17` for four qubits.
///
/// This is never below [`werner_crossing_visibility`], so any visibility above
/// it is certified by the witness.
pub fn werner_visibility_threshold(r: f64, dim: usize) -> Result<f64> {
    check_radius_dim(r, dim)?;
    let d = dim as f64;
    Ok((d * r + 1.0) / (d + 1.0))
}

/// Visibility at which the witness value of the Werner state is exactly zero,
/// `(dim·r − 1)/(dim − 1)`.
pub fn werner_crossing_visibility(r: f64, dim: usize) -> Result<f64> {
    check_radius_dim(r, dim)?;
    let d = dim as f64;
    Ok((d * r - 1.0) / (d - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig4Row {
    pub theta: f64,
    pub r2: f64,
    pub r1: f64,
    pub v2: f64,
    pub v1: f64,
}

/// `points` evenly spaced angles strictly inside `(0, π/2)`.
pub fn fig4_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|i| FRAC_PI_2 * i as f64 / (points + 1) as f64).collect()
}

/// W4 radii at both levels and their four-qubit visibility thresholds.
pub fn fig4_curves(theta_grid: &[f64]) -> Result<Vec<Fig4Row>> {
    theta_grid
        .iter()
        .map(|&theta| {
            if !(theta > 0.0 && theta < FRAC_PI_2) {
                return Err(KcgeError::InvalidParameter(format!("theta {theta} outside (0, π/2)")));
            }
            let a = w4_theta_coefficients(theta);
            let r2 = radius_w4(2, &a)?;
            let r1 = radius_w4(1, &a)?;
            let vis = |r: f64| if r < 1.0 { werner_visibility_threshold(r, 16) } else { Ok(1.0) };
            Ok(Fig4Row { theta, r2, r1, v2: vis(r2)?, v1: vis(r1)? })
        })
        .collect()
}

pub fn fig4_csv(rows: &[Fig4Row]) -> String {
    let mut out = String::from("theta,r2,r1,v2,v1\n");
    for r in rows {
        let cells = [r.theta, r.r2, r.r1, r.v2, r.v1].map(format_f64);
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Best overlap with `(V ⊗ 1)(|0⟩_j ⊗ |ξ⟩)` for a unitary `V` on `cut ∋ j`,
/// maximized over `ξ`: the weight of `V†Φ` on `|0⟩_j`.
fn pinned_overlap(target: &PureState, cut: &PartySubset, v_dag: Option<&CMatrix>, j: usize) -> Result<f64> {
    let rotated;
    let state = match v_dag {
        Some(u) => {
            rotated = apply_local_operator(target, u, cut)?;
            &rotated
        }
        None => target,
    };
    let st = strides(state.dims());
    let d = state.dims()[j];
    Ok(state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(x, _)| (x / st[j]).is_multiple_of(d))
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

/// Largest squared overlap of `target` with `samples` random pure k-connection
/// biseparable states; a lower bound on the witness radius.
///
/// Each sample draws a cut of size at most `k`, a party `j` in it and a Haar
/// unitary `V` on the cut (sample 0 uses `V = 1`). Sample `i` uses its own
/// ChaCha8 stream `i` under `seed`, so the result does not depend on threading.
pub fn sample_radius_lower_bound(target: &PureState, k: usize, samples: usize, seed: u64) -> Result<f64> {
    let n = target.n();
    if k == 0 || k > n / 2 {
        return Err(KcgeError::LevelOutOfRange { k, n });
    }
    if samples == 0 {
        return Err(KcgeError::InvalidParameter("need at least one sample".into()));
    }
    let best = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let size = rng.random_range(1..=k);
            let members = rand::seq::index::sample(&mut rng, n, size).into_vec();
            let cut = PartySubset::cut(members, n)?;
            let j = cut.members()[rng.random_range(0..size)];
            if i == 0 {
                return pinned_overlap(target, &cut, None, j);
            }
            let dim: usize = cut.members().iter().map(|&p| target.dims()[p]).product();
            let v = haar_unitary(dim, &mut rng);
            pinned_overlap(target, &cut, Some(&v), j)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok(best.min(1.0))
}
