//! Dense multipartite pure states and density matrices.
//!
//! Amplitudes are stored in row-major party order: party 0 is the most
//! significant digit of the flat index. Every bipartite reshape moves the
//! members of the cut to the front in ascending order, followed by the
//! complement in ascending order, so that all modules agree on index layout.
//!
//! Schmidt coefficients are the *squared* singular values of the reshaped
//! amplitude matrix, i.e. `|Φ⟩ = Σ √λ_i |φ_i⟩|ψ_i⟩` with `Σ λ_i = 1`.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KcgeError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Allowed drift of `‖ψ‖²` for states handed to [`PureState::new`].
pub const NORMALIZATION_ATOL: f64 = 1e-9;
/// Allowed drift of `‖ψ‖` for states read from JSON.
pub const JSON_NORM_ATOL: f64 = 1e-6;
/// Squared-norm drift below which amplitudes are not rescaled.
pub const ROUNDING_NORM_ATOL: f64 = 1e-12;
/// Tolerance used for operator unitarity and Kraus completeness checks.
pub const OPERATOR_ATOL: f64 = 1e-9;

/// Numerical thresholds shared by rank decisions and reconstruction checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Singular values with `σ / σ_max <= rank_cutoff` count as zero.
    pub rank_cutoff: f64,
    /// Absolute elementwise tolerance for reconstructed amplitudes.
    pub reconstruction_atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rank_cutoff: 1e-9, reconstruction_atol: 1e-9 }
    }
}

impl Tolerance {
    pub fn new(rank_cutoff: f64, reconstruction_atol: f64) -> Result<Self> {
        for (name, v) in [("rank_cutoff", rank_cutoff), ("reconstruction_atol", reconstruction_atol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(KcgeError::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(Tolerance { rank_cutoff, reconstruction_atol })
    }

    /// Same tolerance for both rank and reconstruction, as the CLI `--tol` flag sets it.
    pub fn uniform(tol: f64) -> Result<Self> {
        Self::new(tol, tol)
    }
}

/// An ordered set of party indices drawn from `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartySubset {
    members: Vec<usize>,
    n: usize,
}

impl PartySubset {
    /// Any nonempty subset, stored in ascending order. Duplicates are rejected.
    pub fn new(members: impl Into<Vec<usize>>, n: usize) -> Result<Self> {
        let mut members = members.into();
        if members.is_empty() {
            return Err(KcgeError::InvalidSubset("subset is empty".into()));
        }
        members.sort_unstable();
        if let Some(&bad) = members.iter().find(|&&p| p >= n) {
            return Err(KcgeError::InvalidSubset(format!("party {bad} out of range for n = {n}")));
        }
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(KcgeError::InvalidSubset(format!("duplicate party in {members:?}")));
        }
        Ok(PartySubset { members, n })
    }

    /// A subset usable as one side of a bipartition: nonempty with a nonempty complement.
    pub fn cut(members: impl Into<Vec<usize>>, n: usize) -> Result<Self> {
        let s = Self::new(members, n)?;
        if s.members.len() == n {
            return Err(KcgeError::InvalidSubset("cut must leave a nonempty complement".into()));
        }
        Ok(s)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, party: usize) -> bool {
        self.members.binary_search(&party).is_ok()
    }

    pub fn is_cut(&self) -> bool {
        self.members.len() < self.n
    }

    /// Parties not in the subset, ascending.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.n).filter(|p| !self.contains(*p)).collect()
    }

    /// Position of `party` within the ascending member list.
    pub fn position(&self, party: usize) -> Option<usize> {
        self.members.binary_search(&party).ok()
    }
}

pub(crate) fn checked_dim(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

pub(crate) fn dim_of(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Row-major strides: `index = Σ digit_p * stride_p`.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut out = vec![1; dims.len()];
    for p in (0..dims.len().saturating_sub(1)).rev() {
        out[p] = out[p + 1] * dims[p + 1];
    }
    out
}

/// Reorders tensor factors. The factor at new position `t` is old factor `order[t]`.
pub fn permute_factors(amps: &[C64], dims: &[usize], order: &[usize]) -> Vec<C64> {
    debug_assert_eq!(order.len(), dims.len());
    let old_strides = strides(dims);
    let new_dims: Vec<usize> = order.iter().map(|&p| dims[p]).collect();
    let step: Vec<usize> = order.iter().map(|&p| old_strides[p]).collect();
    let mut digits = vec![0usize; dims.len()];
    let mut old = 0usize;
    let mut out = Vec::with_capacity(amps.len());
    for _ in 0..amps.len() {
        out.push(amps[old]);
        // odometer over the new digits, least significant last
        for t in (0..new_dims.len()).rev() {
            digits[t] += 1;
            old += step[t];
            if digits[t] < new_dims[t] {
                break;
            }
            old -= step[t] * new_dims[t];
            digits[t] = 0;
        }
    }
    out
}

fn inverse_order(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (t, &p) in order.iter().enumerate() {
        inv[p] = t;
    }
    inv
}

/// Normalized pure state on `⊗_p C^{dims[p]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl PureState {
    fn validate_shape(dims: &[usize], len: usize) -> Result<()> {
        if dims.is_empty() {
            return Err(KcgeError::InvalidParameter("a state needs at least one party".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(KcgeError::InvalidParameter(format!("local dimension {d} < 2")));
        }
        match checked_dim(dims) {
            Some(total) if total == len => Ok(()),
            Some(total) => Err(KcgeError::DimensionMismatch(format!(
                "dims {dims:?} require {total} amplitudes, got {len}"
            ))),
            None => Err(KcgeError::BudgetExceeded(format!("dimension of {dims:?} overflows"))),
        }
    }

    /// Builds a state whose squared norm is within [`NORMALIZATION_ATOL`] of one.
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        Self::validate_shape(&dims, amps.len())?;
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORMALIZATION_ATOL {
            return Err(KcgeError::NotNormalized(norm_sqr.sqrt()));
        }
        Ok(Self::renormalized(dims, amps, norm_sqr))
    }

    /// Normalizes any nonzero amplitude vector.
    pub fn from_unnormalized(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        Self::validate_shape(&dims, amps.len())?;
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm_sqr <= f64::MIN_POSITIVE || !norm_sqr.is_finite() {
            return Err(KcgeError::NotNormalized(norm_sqr.sqrt()));
        }
        Ok(Self::renormalized(dims, amps, norm_sqr))
    }

    // rounding-level drift is left alone so serialized states re-read bit-exactly
    fn renormalized(dims: Vec<usize>, mut amps: Vec<C64>, norm_sqr: f64) -> Self {
        if (norm_sqr - 1.0).abs() > ROUNDING_NORM_ATOL {
            let s = 1.0 / norm_sqr.sqrt();
            amps.iter_mut().for_each(|a| *a *= s);
        }
        PureState { dims, amps }
    }

    /// Computational basis state with flat index `index`.
    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let total = checked_dim(&dims)
            .ok_or_else(|| KcgeError::BudgetExceeded(format!("dimension of {dims:?} overflows")))?;
        if index >= total {
            return Err(KcgeError::InvalidParameter(format!("basis index {index} >= {total}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); total];
        amps[index] = C64::new(1.0, 0.0);
        Self::new(dims, amps)
    }

    /// `|0…0⟩`.
    pub fn zero(dims: Vec<usize>) -> Result<Self> {
        Self::basis(dims, 0)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<C64>) {
        (self.dims, self.amps)
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dims != other.dims {
            return Err(KcgeError::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Largest elementwise amplitude difference; `INFINITY` when the shapes differ.
    pub fn max_abs_diff(&self, other: &PureState) -> f64 {
        if self.dims != other.dims {
            return f64::INFINITY;
        }
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Reorders the parties; new party `t` is old party `order[t]`.
    pub fn permuted(&self, order: &[usize]) -> Result<PureState> {
        let mut seen = order.to_vec();
        seen.sort_unstable();
        if seen != (0..self.n()).collect::<Vec<_>>() {
            return Err(KcgeError::InvalidParameter(format!("{order:?} is not a permutation of the parties")));
        }
        let amps = permute_factors(&self.amps, &self.dims, order);
        Ok(PureState { dims: order.iter().map(|&p| self.dims[p]).collect(), amps })
    }

    /// Amplitudes reshaped as a `dim(H_I) × dim(H_Ī)` matrix.
    pub fn bipartite_matrix(&self, subset: &PartySubset) -> Result<CMatrix> {
        self.check_subset(subset)?;
        let order = cut_order(subset);
        let rows = dim_of(&subset.members().iter().map(|&p| self.dims[p]).collect::<Vec<_>>());
        let cols = self.dim() / rows;
        let amps = permute_factors(&self.amps, &self.dims, &order);
        Ok(CMatrix::from_row_slice(rows, cols, &amps))
    }

    pub(crate) fn check_subset(&self, subset: &PartySubset) -> Result<()> {
        if subset.n() != self.n() {
            return Err(KcgeError::InvalidSubset(format!(
                "subset declared for n = {}, state has {} parties",
                subset.n(),
                self.n()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_cut(&self, subset: &PartySubset) -> Result<()> {
        self.check_subset(subset)?;
        if !subset.is_cut() {
            return Err(KcgeError::InvalidSubset("cut must leave a nonempty complement".into()));
        }
        Ok(())
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = CMatrix::from_column_slice(self.dim(), 1, &self.amps);
        DensityMatrix { dims: self.dims.clone(), matrix: &v * v.adjoint() }
    }
}

/// Party order that puts `subset` first, complement after.
pub(crate) fn cut_order(subset: &PartySubset) -> Vec<usize> {
    let mut order = subset.members().to_vec();
    order.extend(subset.complement());
    order
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and PSD within `atol`.
    pub fn new(dims: Vec<usize>, matrix: CMatrix, atol: f64) -> Result<Self> {
        let total = checked_dim(&dims)
            .ok_or_else(|| KcgeError::BudgetExceeded(format!("dimension of {dims:?} overflows")))?;
        if matrix.nrows() != total || matrix.ncols() != total {
            return Err(KcgeError::DimensionMismatch(format!(
                "dims {dims:?} need a {total}x{total} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let rho = DensityMatrix { dims, matrix };
        rho.validate(atol)?;
        Ok(rho)
    }

    pub(crate) fn from_parts_unchecked(dims: Vec<usize>, matrix: CMatrix) -> Self {
        DensityMatrix { dims, matrix }
    }

    pub fn from_pure(state: &PureState) -> Self {
        state.to_density()
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let total = dim_of(&dims);
        let matrix = CMatrix::identity(total, total) * C64::new(1.0 / total as f64, 0.0);
        DensityMatrix { dims, matrix }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    /// Eigenvalues in nonincreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn validate(&self, atol: f64) -> Result<()> {
        let herm = self.hermiticity_deviation();
        if herm > atol {
            return Err(KcgeError::InvalidParameter(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > atol {
            return Err(KcgeError::InvalidParameter(format!("density matrix trace {tr} != 1")));
        }
        let min_ev = self.eigenvalues().last().copied().unwrap_or(0.0);
        if min_ev < -atol {
            return Err(KcgeError::InvalidParameter(format!("density matrix has eigenvalue {min_ev:e}")));
        }
        Ok(())
    }

    /// Number of eigenvalues above `cutoff * λ_max`.
    pub fn rank(&self, cutoff: f64) -> usize {
        let ev = self.eigenvalues();
        let top = ev.first().copied().unwrap_or(0.0);
        ev.iter().filter(|&&l| l > cutoff * top).count()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `⟨Φ|ρ|Φ⟩`.
    pub fn expectation(&self, state: &PureState) -> Result<f64> {
        if state.dims() != self.dims.as_slice() {
            return Err(KcgeError::DimensionMismatch(format!("{:?} vs {:?}", state.dims(), self.dims)));
        }
        let v = CMatrix::from_column_slice(state.dim(), 1, state.amplitudes());
        Ok((v.adjoint() * &self.matrix * &v)[(0, 0)].re)
    }

    /// Traces out every party not in `keep`.
    pub fn partial_trace(&self, keep: &PartySubset) -> Result<DensityMatrix> {
        if keep.n() != self.dims.len() {
            return Err(KcgeError::InvalidSubset(format!(
                "subset declared for n = {}, operator has {} parties",
                keep.n(),
                self.dims.len()
            )));
        }
        if !keep.is_cut() {
            return Ok(self.clone());
        }
        let (kdims, kmap, cmap) = split_index_maps(&self.dims, keep);
        let kd = dim_of(&kdims);
        let mut out = CMatrix::zeros(kd, kd);
        let total = self.dim();
        for x in 0..total {
            for y in 0..total {
                if cmap[x] == cmap[y] {
                    out[(kmap[x], kmap[y])] += self.matrix[(x, y)];
                }
            }
        }
        Ok(DensityMatrix { dims: kdims, matrix: out })
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        if self.dims != other.dims {
            return f64::INFINITY;
        }
        max_abs(&(&self.matrix - &other.matrix))
    }
}

/// For every flat index: (kept sub-index, complement sub-index).
fn split_index_maps(dims: &[usize], keep: &PartySubset) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let kdims: Vec<usize> = keep.members().iter().map(|&p| dims[p]).collect();
    let comp = keep.complement();
    let cdims: Vec<usize> = comp.iter().map(|&p| dims[p]).collect();
    let ks = strides(&kdims);
    let cs = strides(&cdims);
    let full = strides(dims);
    let total = dim_of(dims);
    let mut kmap = vec![0; total];
    let mut cmap = vec![0; total];
    for x in 0..total {
        let digit = |p: usize| (x / full[p]) % dims[p];
        kmap[x] = keep.members().iter().enumerate().map(|(t, &p)| digit(p) * ks[t]).sum();
        cmap[x] = comp.iter().enumerate().map(|(t, &p)| digit(p) * cs[t]).sum();
    }
    (kdims, kmap, cmap)
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |U†U − 1|` elementwise.
pub fn unitarity_deviation(op: &CMatrix) -> f64 {
    if op.nrows() != op.ncols() {
        return f64::INFINITY;
    }
    let id = CMatrix::identity(op.nrows(), op.ncols());
    max_abs(&(op.adjoint() * op - id))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `ρ_keep = Tr_{complement} |Φ⟩⟨Φ|`, with kept parties in ascending order.
pub fn partial_trace(state: &PureState, keep: &PartySubset) -> Result<DensityMatrix> {
    state.check_cut(keep)?;
    let m = state.bipartite_matrix(keep)?;
    let kdims = keep.members().iter().map(|&p| state.dims()[p]).collect();
    Ok(DensityMatrix { dims: kdims, matrix: &m * m.adjoint() })
}

/// Schmidt decomposition across `cut | complement`.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub cut: PartySubset,
    pub dims_cut: Vec<usize>,
    pub dims_complement: Vec<usize>,
    /// Squared singular values above the cutoff, nonincreasing.
    pub coefficients: Vec<f64>,
    /// `|φ_i⟩` on the cut parties (ascending order).
    pub basis_cut: Vec<Vec<C64>>,
    /// `|ψ_i⟩` on the complement (ascending order).
    pub basis_complement: Vec<Vec<C64>>,
    pub rank: usize,
}

impl SchmidtDecomposition {
    /// `Σ √λ_i |φ_i⟩|ψ_i⟩` mapped back to natural party order.
    pub fn reconstruct(&self) -> Result<PureState> {
        let rows = dim_of(&self.dims_cut);
        let cols = dim_of(&self.dims_complement);
        let mut flat = vec![C64::new(0.0, 0.0); rows * cols];
        for ((lam, phi), psi) in self.coefficients.iter().zip(&self.basis_cut).zip(&self.basis_complement) {
            let s = lam.sqrt();
            for a in 0..rows {
                for b in 0..cols {
                    flat[a * cols + b] += phi[a] * psi[b] * s;
                }
            }
        }
        let order = cut_order(&self.cut);
        let mut pdims = self.dims_cut.clone();
        pdims.extend(&self.dims_complement);
        let amps = permute_factors(&flat, &pdims, &inverse_order(&order));
        let mut dims = vec![0; self.cut.n()];
        for (t, &p) in order.iter().enumerate() {
            dims[p] = pdims[t];
        }
        PureState::from_unnormalized(dims, amps)
    }
}

fn numerical_rank(sv: impl Iterator<Item = f64> + Clone, cutoff: f64) -> usize {
    let top = sv.clone().fold(0.0, f64::max);
    if top <= 0.0 {
        return 0;
    }
    sv.filter(|&s| s / top > cutoff).count()
}

/// SVD of the reshaped state.
///
/// Each `|φ_i⟩` is rotated so its largest-magnitude entry is real positive and
/// `|ψ_i⟩` takes the conjugate phase; this fixes the SVD's arbitrary phase
/// without changing the state.
pub fn schmidt(state: &PureState, cut: &PartySubset, tol: &Tolerance) -> Result<SchmidtDecomposition> {
    state.check_cut(cut)?;
    let m = state.bipartite_matrix(cut)?;
    let svd = SVD::new(m, true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => unreachable!("SVD requested with both factors"),
    };
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let rank = numerical_rank(sv.iter().copied(), tol.rank_cutoff);
    let mut coefficients = Vec::with_capacity(rank);
    let mut basis_cut = Vec::with_capacity(rank);
    let mut basis_complement = Vec::with_capacity(rank);
    for i in 0..rank {
        let mut phi: Vec<C64> = u.column(i).iter().copied().collect();
        let mut psi: Vec<C64> = v_t.row(i).iter().copied().collect();
        let top = phi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some(pivot) = phi.iter().find(|z| z.norm() >= top * (1.0 - 1e-12)).copied() {
            let phase = pivot / pivot.norm();
            phi.iter_mut().for_each(|z| *z *= phase.conj());
            psi.iter_mut().for_each(|z| *z *= phase);
        }
        coefficients.push(sv[i] * sv[i]);
        basis_cut.push(phi);
        basis_complement.push(psi);
    }
    Ok(SchmidtDecomposition {
        cut: cut.clone(),
        dims_cut: cut.members().iter().map(|&p| state.dims()[p]).collect(),
        dims_complement: cut.complement().iter().map(|&p| state.dims()[p]).collect(),
        coefficients,
        basis_cut,
        basis_complement,
        rank,
    })
}

/// Number of Schmidt coefficients across `cut` above the relative cutoff.
pub fn schmidt_rank(state: &PureState, cut: &PartySubset, tol: &Tolerance) -> Result<usize> {
    state.check_cut(cut)?;
    let m = state.bipartite_matrix(cut)?;
    let m = if m.nrows() > m.ncols() { m.adjoint() } else { m };
    let svd = SVD::new(m, false, false);
    Ok(numerical_rank(svd.singular_values.iter().copied(), tol.rank_cutoff))
}

/// Full-space operator equal to `op` on the parties `order` (in that factor
/// order) and identity elsewhere.
pub fn embed_operator(dims: &[usize], op: &CMatrix, order: &[usize]) -> Result<CMatrix> {
    let n = dims.len();
    if order.is_empty() || order.iter().any(|&p| p >= n) {
        return Err(KcgeError::InvalidSubset(format!("bad operator support {order:?} for n = {n}")));
    }
    let mut seen = order.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != order.len() {
        return Err(KcgeError::InvalidSubset(format!("duplicate party in {order:?}")));
    }
    let odims: Vec<usize> = order.iter().map(|&p| dims[p]).collect();
    let od = dim_of(&odims);
    if op.nrows() != od || op.ncols() != od {
        return Err(KcgeError::DimensionMismatch(format!(
            "operator is {}x{}, support {order:?} has dimension {od}",
            op.nrows(),
            op.ncols()
        )));
    }
    let total = dim_of(dims);
    let full = strides(dims);
    let os = strides(&odims);
    // op-local index and the residual (index with the support digits zeroed)
    let mut local = vec![0usize; total];
    let mut rest = vec![0usize; total];
    for x in 0..total {
        let mut r = x;
        let mut a = 0;
        for (t, &p) in order.iter().enumerate() {
            let d = (x / full[p]) % dims[p];
            a += d * os[t];
            r -= d * full[p];
        }
        local[x] = a;
        rest[x] = r;
    }
    // flat index of (op-local a', residual r)
    let offset: Vec<usize> = (0..od)
        .map(|a| order.iter().enumerate().map(|(t, &p)| ((a / os[t]) % odims[t]) * full[p]).sum())
        .collect();
    let mut out = CMatrix::zeros(total, total);
    for x in 0..total {
        for (a2, off) in offset.iter().enumerate() {
            let v = op[(local[x], a2)];
            if v != C64::new(0.0, 0.0) {
                out[(x, rest[x] + off)] = v;
            }
        }
    }
    Ok(out)
}

fn apply_on(state: &PureState, op: &CMatrix, on: &PartySubset) -> Result<Vec<C64>> {
    state.check_subset(on)?;
    let odim = dim_of(&on.members().iter().map(|&p| state.dims()[p]).collect::<Vec<_>>());
    if op.nrows() != odim || op.ncols() != odim {
        return Err(KcgeError::DimensionMismatch(format!(
            "operator is {}x{}, parties {:?} span dimension {odim}",
            op.nrows(),
            op.ncols(),
            on.members()
        )));
    }
    let order = cut_order(on);
    let cols = state.dim() / odim;
    let m = CMatrix::from_row_slice(odim, cols, &permute_factors(state.amplitudes(), state.dims(), &order));
    let out = op * m;
    let pdims: Vec<usize> = order.iter().map(|&p| state.dims()[p]).collect();
    let flat: Vec<C64> = out.transpose().iter().copied().collect();
    Ok(permute_factors(&flat, &pdims, &inverse_order(&order)))
}

/// Applies a unitary `op` on the parties of `on` (ascending factor order).
pub fn apply_local_operator(state: &PureState, op: &CMatrix, on: &PartySubset) -> Result<PureState> {
    let dev = unitarity_deviation(op);
    if dev > OPERATOR_ATOL {
        return Err(KcgeError::NotUnitary(dev));
    }
    let amps = apply_on(state, op, on)?;
    PureState::from_unnormalized(state.dims().to_vec(), amps)
}

/// Applies an arbitrary operator (e.g. one Kraus operator) and returns the
/// unnormalized branch amplitudes.
pub fn apply_general_operator(state: &PureState, op: &CMatrix, on: &PartySubset) -> Result<Vec<C64>> {
    apply_on(state, op, on)
}
