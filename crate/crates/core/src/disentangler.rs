//! Disentangling unitaries, the two-depth preparation circuit and
//! biseparable / k-connection channels.

use serde::Serialize;

use crate::error::{KcgeError, Result};
use crate::linalg::{columns_to_matrix, complete_orthonormal_basis, unitary_with_first_column};
use crate::tensor::{
    apply_local_operator, cut_order, embed_operator, kron, max_abs, partial_trace, schmidt, strides, CMatrix,
    DensityMatrix, PartySubset, PureState, Tolerance, C64, OPERATOR_ATOL,
};

#[derive(Debug, Clone)]
pub struct DisentanglingUnitary {
    /// Unitary on `H_act_on`, parties in ascending order.
    pub unitary: CMatrix,
    pub act_on: PartySubset,
    pub free_party: usize,
    pub rank: usize,
    pub threshold: usize,
}

impl DisentanglingUnitary {
    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        apply_local_operator(state, &self.unitary, &self.act_on)
    }
}

/// `1 − ⟨0|ρ_p|0⟩` for a single party `p`.
pub fn free_party_residual(state: &PureState, party: usize) -> Result<f64> {
    let keep = PartySubset::cut(vec![party], state.n())?;
    let rho = partial_trace(state, &keep)?;
    Ok((1.0 - rho.matrix()[(0, 0)].re).max(0.0))
}

/// Builds `U` on `act_on` mapping the Schmidt vectors of `act_on` onto
/// `|0⟩_free ⊗ ê_i`, so that `free_party` ends in `|0⟩`.
pub fn build_disentangling_unitary(
    state: &PureState,
    act_on: &PartySubset,
    free_party: usize,
    tol: &Tolerance,
) -> Result<DisentanglingUnitary> {
    let pos = act_on
        .position(free_party)
        .ok_or_else(|| KcgeError::InvalidSubset(format!("free party {free_party} not in {:?}", act_on.members())))?;
    let sd = schmidt(state, act_on, tol)?;
    let dim: usize = sd.dims_cut.iter().product();
    let d_free = sd.dims_cut[pos];
    let threshold = dim / d_free;
    if sd.rank > threshold {
        return Err(KcgeError::NotDisentanglable { rank: sd.rank, threshold });
    }
    // ê_i enumerates the other act_on parties; the free digit is pinned to 0
    let rest: Vec<usize> = sd.dims_cut.iter().enumerate().filter(|&(t, _)| t != pos).map(|(_, &d)| d).collect();
    let full = strides(&sd.dims_cut);
    let targets: Vec<Vec<C64>> = (0..sd.rank)
        .map(|i| {
            let mut idx = 0;
            let mut r = i;
            for (t, &d) in rest.iter().enumerate().rev() {
                let slot = if t >= pos { t + 1 } else { t };
                idx += (r % d) * full[slot];
                r /= d;
            }
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[idx] = C64::new(1.0, 0.0);
            v
        })
        .collect();
    let source = columns_to_matrix(&complete_orthonormal_basis(&sd.basis_cut, dim), dim);
    let target = columns_to_matrix(&complete_orthonormal_basis(&targets, dim), dim);
    Ok(DisentanglingUnitary {
        unitary: target * source.adjoint(),
        act_on: act_on.clone(),
        free_party,
        rank: sd.rank,
        threshold,
    })
}

/// Roles of the two-depth circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TwoDepthRoles {
    pub a1: usize,
    pub a2: usize,
}

impl Default for TwoDepthRoles {
    fn default() -> Self {
        TwoDepthRoles { a1: 0, a2: 1 }
    }
}

/// `|Φ⟩ = layer2 · layer1 · |0…0⟩`.
#[derive(Debug, Clone)]
pub struct TwoDepthDecomposition {
    pub roles: TwoDepthRoles,
    /// Parties other than `a1` and `a2`.
    pub j: Vec<usize>,
    /// Acts on `{a1} ∪ J` (identity on `a2`).
    pub layer1: CMatrix,
    pub layer1_support: PartySubset,
    /// Acts on everything but `a1`.
    pub layer2: CMatrix,
    pub layer2_support: PartySubset,
    /// Two parties only: `layer1` is the whole preparation and `layer2` is identity.
    pub degenerate: bool,
    pub reconstruction_error: f64,
}

impl TwoDepthDecomposition {
    pub fn compose(&self, dims: &[usize]) -> Result<PureState> {
        let zero = PureState::zero(dims.to_vec())?;
        let mid = apply_local_operator(&zero, &self.layer1, &self.layer1_support)?;
        apply_local_operator(&mid, &self.layer2, &self.layer2_support)
    }
}

/// Uses `a1 = 0`, `a2 = 1` unless `d_0` exceeds the dimension of the remaining
/// parties `J` (possible only with unequal local dimensions); then `a1` is the
/// lowest-index party of smallest dimension and `a2` the lowest-index party of
/// largest dimension among the rest.
pub fn two_depth_decompose(state: &PureState, tol: &Tolerance) -> Result<TwoDepthDecomposition> {
    two_depth_decompose_with(state, default_roles(state.dims()), tol)
}

fn default_roles(dims: &[usize]) -> TwoDepthRoles {
    let n = dims.len();
    let fits = |r: TwoDepthRoles| {
        let j: usize = (0..n).filter(|&p| p != r.a1 && p != r.a2).map(|p| dims[p]).product();
        dims[r.a1] <= j
    };
    let plain = TwoDepthRoles::default();
    if n < 3 || fits(plain) {
        return plain;
    }
    let a1 = (0..n).min_by_key(|&p| (dims[p], p)).expect("n >= 3");
    let a2 = (0..n).filter(|&p| p != a1).min_by_key(|&p| (std::cmp::Reverse(dims[p]), p)).expect("n >= 3");
    TwoDepthRoles { a1, a2 }
}

pub fn two_depth_decompose_with(state: &PureState, roles: TwoDepthRoles, tol: &Tolerance) -> Result<TwoDepthDecomposition> {
    let n = state.n();
    let TwoDepthRoles { a1, a2 } = roles;
    if n < 2 || a1 >= n || a2 >= n || a1 == a2 {
        return Err(KcgeError::InvalidParameter(format!("roles a1 = {a1}, a2 = {a2} invalid for n = {n}")));
    }
    let j: Vec<usize> = (0..n).filter(|&p| p != a1 && p != a2).collect();
    let not_a1 = PartySubset::cut((0..n).filter(|&p| p != a1).collect::<Vec<_>>(), n)?;
    let mut out = if n == 2 {
        let all = PartySubset::new(vec![0, 1], 2)?;
        let d2 = state.dims()[a2];
        TwoDepthDecomposition {
            roles,
            j,
            layer1: unitary_with_first_column(state.amplitudes()),
            layer1_support: all,
            layer2: CMatrix::identity(d2, d2),
            layer2_support: not_a1,
            degenerate: true,
            reconstruction_error: 0.0,
        }
    } else {
        let u = build_disentangling_unitary(state, &not_a1, a2, tol)?;
        let chi = u.apply(state)?;
        // drop the a2 factor, which is |0⟩ up to rounding
        let st = strides(state.dims());
        let keep: Vec<usize> = (0..n).filter(|&p| p != a2).collect();
        let reduced: Vec<C64> = chi
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(x, _)| (x / st[a2]).is_multiple_of(state.dims()[a2]))
            .map(|(_, a)| *a)
            .collect();
        let norm = reduced.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let reduced: Vec<C64> = reduced.iter().map(|a| a / norm).collect();
        TwoDepthDecomposition {
            roles,
            j,
            layer1: unitary_with_first_column(&reduced),
            layer1_support: PartySubset::cut(keep, n)?,
            layer2: u.unitary.adjoint(),
            layer2_support: not_a1,
            degenerate: false,
            reconstruction_error: 0.0,
        }
    };
    out.reconstruction_error = out.compose(state.dims())?.max_abs_diff(state);
    if out.reconstruction_error > tol.reconstruction_atol {
        return Err(KcgeError::InvalidParameter(format!(
            "two-depth reconstruction error {:e} exceeds tolerance",
            out.reconstruction_error
        )));
    }
    Ok(out)
}

/// Largest joint dimension on which channels are applied densely.
pub const CHANNEL_MAX_DIM: usize = 1 << 10;

fn check_channel_dims(cut: &PartySubset, dims: &[usize]) -> Result<(usize, Vec<usize>)> {
    if cut.n() != dims.len() || !cut.is_cut() {
        return Err(KcgeError::InvalidSubset(format!(
            "channel cut {:?} must be a proper subset of {} parties",
            cut.members(),
            dims.len()
        )));
    }
    let dim_cut = cut.members().iter().map(|&p| dims[p]).product();
    let comp_dims = cut.complement().iter().map(|&p| dims[p]).collect();
    Ok((dim_cut, comp_dims))
}

fn check_shape(m: &CMatrix, dim: usize, what: &str) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(KcgeError::DimensionMismatch(format!(
            "{what} is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn completeness_deviation(terms: &[CMatrix]) -> f64 {
    let Some(first) = terms.first() else {
        return f64::INFINITY;
    };
    let d = first.ncols();
    let mut sum = CMatrix::zeros(d, d);
    for t in terms {
        sum += t.adjoint() * t;
    }
    max_abs(&(sum - CMatrix::identity(d, d)))
}

fn apply_kraus(rho: &DensityMatrix, dims: &[usize], order: &[usize], ops: &[CMatrix]) -> Result<DensityMatrix> {
    if rho.dims() != dims {
        return Err(KcgeError::DimensionMismatch(format!("channel dims {dims:?} vs state dims {:?}", rho.dims())));
    }
    let d = rho.dim();
    if d > CHANNEL_MAX_DIM {
        return Err(KcgeError::BudgetExceeded(format!(
            "channel application limited to dimension {CHANNEL_MAX_DIM}, state has {d}"
        )));
    }
    let mut out = CMatrix::zeros(d, d);
    for op in ops {
        let full = embed_operator(dims, op, order)?;
        out += &full * rho.matrix() * full.adjoint();
    }
    Ok(DensityMatrix::from_parts_unchecked(dims.to_vec(), out))
}

/// Channel with Kraus operators `K_i ⊗ S_i` across `cut | complement`.
#[derive(Debug, Clone)]
pub struct BiseparableChannel {
    cut: PartySubset,
    dims: Vec<usize>,
    kraus_pairs: Vec<(CMatrix, CMatrix)>,
}

impl BiseparableChannel {
    /// Validates shapes and `Σ K_i†K_i ⊗ S_i†S_i = 1`.
    pub fn new(cut: PartySubset, dims: Vec<usize>, kraus_pairs: Vec<(CMatrix, CMatrix)>) -> Result<Self> {
        let (dim_cut, comp_dims) = check_channel_dims(&cut, &dims)?;
        let dim_comp: usize = comp_dims.iter().product();
        for (k, s) in &kraus_pairs {
            check_shape(k, dim_cut, "cut-side Kraus factor")?;
            check_shape(s, dim_comp, "complement-side Kraus factor")?;
        }
        let ch = BiseparableChannel { cut, dims, kraus_pairs };
        let dev = completeness_deviation(&ch.joint_operators());
        if dev > OPERATOR_ATOL {
            return Err(KcgeError::IncompleteChannel(dev));
        }
        Ok(ch)
    }

    pub fn identity(cut: PartySubset, dims: Vec<usize>) -> Result<Self> {
        let (dim_cut, comp_dims) = check_channel_dims(&cut, &dims)?;
        let dim_comp: usize = comp_dims.iter().product();
        Self::new(cut, dims, vec![(CMatrix::identity(dim_cut, dim_cut), CMatrix::identity(dim_comp, dim_comp))])
    }

    /// `U ⊗ V` as a single Kraus pair.
    pub fn unitary(cut: PartySubset, dims: Vec<usize>, u: CMatrix, v: CMatrix) -> Result<Self> {
        Self::new(cut, dims, vec![(u, v)])
    }

    pub fn cut(&self) -> &PartySubset {
        &self.cut
    }

    pub fn kraus_pairs(&self) -> &[(CMatrix, CMatrix)] {
        &self.kraus_pairs
    }

    /// `K_i ⊗ S_i` with the cut parties first.
    pub fn joint_operators(&self) -> Vec<CMatrix> {
        self.kraus_pairs.iter().map(|(k, s)| kron(k, s)).collect()
    }
}

/// Channel whose complement-side Kraus factors are products over single parties.
#[derive(Debug, Clone)]
pub struct KConnectionChannel {
    cut: PartySubset,
    dims: Vec<usize>,
    terms: Vec<KConnectionTerm>,
}

#[derive(Debug, Clone)]
pub struct KConnectionTerm {
    /// Acts jointly on the cut parties.
    pub joint: CMatrix,
    /// One factor per complement party, ascending.
    pub locals: Vec<CMatrix>,
}

impl KConnectionChannel {
    pub fn new(cut: PartySubset, dims: Vec<usize>, terms: Vec<KConnectionTerm>) -> Result<Self> {
        let (dim_cut, comp_dims) = check_channel_dims(&cut, &dims)?;
        for t in &terms {
            check_shape(&t.joint, dim_cut, "joint Kraus factor")?;
            if t.locals.len() != comp_dims.len() {
                return Err(KcgeError::DimensionMismatch(format!(
                    "{} local factors for {} complement parties",
                    t.locals.len(),
                    comp_dims.len()
                )));
            }
            for (s, &d) in t.locals.iter().zip(&comp_dims) {
                check_shape(s, d, "local Kraus factor")?;
            }
        }
        let ch = KConnectionChannel { cut, dims, terms };
        let dev = completeness_deviation(&ch.joint_operators());
        if dev > OPERATOR_ATOL {
            return Err(KcgeError::IncompleteChannel(dev));
        }
        Ok(ch)
    }

    pub fn identity(cut: PartySubset, dims: Vec<usize>) -> Result<Self> {
        let (dim_cut, comp_dims) = check_channel_dims(&cut, &dims)?;
        let locals = comp_dims.iter().map(|&d| CMatrix::identity(d, d)).collect();
        Self::new(cut, dims, vec![KConnectionTerm { joint: CMatrix::identity(dim_cut, dim_cut), locals }])
    }

    pub fn cut(&self) -> &PartySubset {
        &self.cut
    }

    /// Connection size `ℓ = |cut|`.
    pub fn connection(&self) -> usize {
        self.cut.len()
    }

    pub fn terms(&self) -> &[KConnectionTerm] {
        &self.terms
    }

    pub fn joint_operators(&self) -> Vec<CMatrix> {
        self.terms
            .iter()
            .map(|t| t.locals.iter().fold(t.joint.clone(), |acc, s| kron(&acc, s)))
            .collect()
    }
}

/// `Σ (K_i ⊗ S_i) ρ (K_i ⊗ S_i)†`.
pub fn apply_biseparable_channel(rho: &DensityMatrix, ch: &BiseparableChannel) -> Result<DensityMatrix> {
    apply_kraus(rho, &ch.dims, &cut_order(&ch.cut), &ch.joint_operators())
}

pub fn apply_k_connection_channel(rho: &DensityMatrix, ch: &KConnectionChannel) -> Result<DensityMatrix> {
    apply_kraus(rho, &ch.dims, &cut_order(&ch.cut), &ch.joint_operators())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_state;
    use crate::tensor::unitarity_deviation;
    use crate::zoo::ghz;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn ghz3() -> PureState {
        ghz(3, 2, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap()
    }

    #[test]
    fn ghz_relabel() {
        let g = ghz3();
        let cut = PartySubset::cut(vec![1, 2], 3).unwrap();
        let u = build_disentangling_unitary(&g, &cut, 1, &Tolerance::default()).unwrap();
        assert!(unitarity_deviation(&u.unitary) < 1e-12);
        assert_eq!((u.rank, u.threshold), (2, 2));
        let out = u.apply(&g).unwrap();
        assert!(free_party_residual(&out, 1).unwrap() < 1e-12);
        // (|00⟩ + |11⟩)_{A1 A3} ⊗ |0⟩_{A2}
        let mut expect = vec![c(0.0); 8];
        expect[0] = c(FRAC_1_SQRT_2);
        expect[5] = c(FRAC_1_SQRT_2);
        assert!(out.max_abs_diff(&PureState::new(vec![2; 3], expect).unwrap()) < 1e-12);
    }

    #[test]
    fn product_gets_identity() {
        let z = PureState::zero(vec![2; 3]).unwrap();
        let cut = PartySubset::cut(vec![0, 2], 3).unwrap();
        let u = build_disentangling_unitary(&z, &cut, 2, &Tolerance::default()).unwrap();
        assert!(max_abs(&(u.unitary - CMatrix::identity(4, 4))) < 1e-15);
    }

    #[test]
    fn rank_precondition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_state(&[2; 4], &mut rng).unwrap();
        let cut = PartySubset::cut(vec![0, 1], 4).unwrap();
        match build_disentangling_unitary(&s, &cut, 0, &Tolerance::default()) {
            Err(KcgeError::NotDisentanglable { rank: 4, threshold: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let big = PartySubset::cut(vec![0, 1, 2], 4).unwrap();
        let u = build_disentangling_unitary(&s, &big, 0, &Tolerance::default()).unwrap();
        assert!(free_party_residual(&u.apply(&s).unwrap(), 0).unwrap() < 1e-9);
        assert!(build_disentangling_unitary(&s, &big, 3, &Tolerance::default()).is_err());
    }

    #[test]
    fn two_depth_product_is_identity() {
        let z = PureState::zero(vec![2; 4]).unwrap();
        let t = two_depth_decompose(&z, &Tolerance::default()).unwrap();
        assert!(max_abs(&(&t.layer1 - CMatrix::identity(8, 8))) < 1e-15);
        assert!(max_abs(&(&t.layer2 - CMatrix::identity(8, 8))) < 1e-15);
        assert_eq!(t.j, vec![2, 3]);
    }

    #[test]
    fn two_depth_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dims in [vec![2, 2, 2], vec![3, 3, 3, 3], vec![2, 3, 2]] {
            let s = random_state(&dims, &mut rng).unwrap();
            let t = two_depth_decompose(&s, &Tolerance::default()).unwrap();
            assert!(t.reconstruction_error < 1e-9);
            assert!(unitarity_deviation(&t.layer1) < 1e-9 && unitarity_deviation(&t.layer2) < 1e-9);
            assert!(!t.degenerate);
        }
        let roles = TwoDepthRoles { a1: 2, a2: 0 };
        let s = random_state(&[2; 4], &mut rng).unwrap();
        assert!(two_depth_decompose_with(&s, roles, &Tolerance::default()).unwrap().reconstruction_error < 1e-9);
    }

    #[test]
    fn two_depth_role_fallback() {
        assert_eq!(default_roles(&[2, 2, 2]), TwoDepthRoles { a1: 0, a2: 1 });
        assert_eq!(default_roles(&[3, 2, 2]), TwoDepthRoles { a1: 1, a2: 0 });
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_state(&[3, 2, 2], &mut rng).unwrap();
        assert!(two_depth_decompose_with(&s, TwoDepthRoles::default(), &Tolerance::default()).is_err());
        assert!(two_depth_decompose(&s, &Tolerance::default()).unwrap().reconstruction_error < 1e-9);
    }

    #[test]
    fn two_depth_two_parties() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_state(&[3, 2], &mut rng).unwrap();
        let t = two_depth_decompose(&s, &Tolerance::default()).unwrap();
        assert!(t.degenerate);
        assert!(t.reconstruction_error < 1e-12);
    }

    #[test]
    fn channels() {
        let rho = ghz3().to_density();
        let cut = PartySubset::cut(vec![0], 3).unwrap();
        let id = BiseparableChannel::identity(cut.clone(), vec![2; 3]).unwrap();
        assert!(apply_biseparable_channel(&rho, &id).unwrap().max_abs_diff(&rho) < 1e-15);
        // dephasing on the cut side
        let p0 = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(0.0)]));
        let p1 = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0), c(1.0)]));
        let id4 = CMatrix::identity(4, 4);
        let deph = BiseparableChannel::new(cut.clone(), vec![2; 3], vec![(p0, id4.clone()), (p1, id4.clone())]).unwrap();
        let out = apply_biseparable_channel(&rho, &deph).unwrap();
        assert!((out.trace() - c(1.0)).norm() < 1e-12);
        assert!(out.matrix()[(0, 7)].norm() < 1e-15);
        let half = CMatrix::identity(2, 2) * c(0.5);
        assert!(matches!(
            BiseparableChannel::new(cut.clone(), vec![2; 3], vec![(half, id4)]),
            Err(KcgeError::IncompleteChannel(_))
        ));
        let kid = KConnectionChannel::identity(cut, vec![2; 3]).unwrap();
        assert_eq!(kid.connection(), 1);
        assert!(apply_k_connection_channel(&rho, &kid).unwrap().max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn channel_shape_errors() {
        let cut = PartySubset::cut(vec![0], 2).unwrap();
        let term = KConnectionTerm { joint: CMatrix::identity(2, 2), locals: vec![] };
        assert!(KConnectionChannel::new(cut.clone(), vec![2, 2], vec![term]).is_err());
        let all = PartySubset::new(vec![0, 1], 2).unwrap();
        assert!(BiseparableChannel::identity(all, vec![2, 2]).is_err());
        let ch = BiseparableChannel::identity(cut, vec![2, 2]).unwrap();
        assert!(apply_biseparable_channel(&DensityMatrix::maximally_mixed(vec![3, 2]), &ch).is_err());
    }
}
