//! Constructors for the named state families, each with the connection level
//! claimed for it in the literature as queryable metadata.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{KcgeError, Result};
use crate::json::StateJson;
use crate::network::NetworkGraph;
use crate::tensor::{checked_dim, permute_factors, strides, CMatrix, PureState, C64};

/// Largest state the grouped-product constructors will materialize.
pub const MAX_CONSTRUCT_DIM: usize = 1 << 16;
const COEFF_ATOL: f64 = 1e-9;

fn check_coefficients(a: &[f64]) -> Result<()> {
    let sum: f64 = a.iter().map(|x| x * x).sum();
    if (sum - 1.0).abs() > COEFF_ATOL {
        return Err(KcgeError::NotNormalized(sum.sqrt()));
    }
    Ok(())
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `Σ_i a_i |i…i⟩` on `n` qudits of dimension `d`.
pub fn ghz(n: usize, d: usize, a: &[f64]) -> Result<PureState> {
    if n < 2 || d < 2 {
        return Err(KcgeError::InvalidParameter(format!("GHZ needs n >= 2 and d >= 2, got n = {n}, d = {d}")));
    }
    if a.len() != d {
        return Err(KcgeError::InvalidParameter(format!("GHZ needs {d} coefficients, got {}", a.len())));
    }
    check_coefficients(a)?;
    let dims = vec![d; n];
    let total = checked_dim(&dims).filter(|&t| t <= MAX_CONSTRUCT_DIM).ok_or_else(|| {
        KcgeError::BudgetExceeded(format!("GHZ({n}, {d}) exceeds dimension {MAX_CONSTRUCT_DIM}"))
    })?;
    // |i…i⟩ sits at i * (1 + d + … + d^{n-1})
    let diag_step = (total - 1) / (d - 1);
    let mut amps = vec![real(0.0); total];
    for (i, &ai) in a.iter().enumerate() {
        amps[i * diag_step] = real(ai);
    }
    PureState::new(dims, amps)
}

/// `Σ_{i=1}^{n} a_i |1_i⟩ + a_{n+1} |1…1⟩` on `n` qubits, where `|1_i⟩` has its
/// single excitation at position `i`.
pub fn w_type(n: usize, a: &[f64]) -> Result<PureState> {
    if n < 2 {
        return Err(KcgeError::InvalidParameter(format!("W-type state needs n >= 2, got {n}")));
    }
    if a.len() != n + 1 {
        return Err(KcgeError::InvalidParameter(format!("W-type state needs {} coefficients, got {}", n + 1, a.len())));
    }
    check_coefficients(a)?;
    if n > 16 {
        return Err(KcgeError::BudgetExceeded(format!("{n} qubits exceed dimension {MAX_CONSTRUCT_DIM}")));
    }
    let total = 1usize << n;
    let mut amps = vec![real(0.0); total];
    for (i, &ai) in a[..n].iter().enumerate() {
        amps[1 << (n - 1 - i)] += real(ai);
    }
    amps[total - 1] += real(a[n]);
    PureState::new(vec![2; n], amps)
}

/// Number of `(i_1, …, i_n)` with `0 <= i_k <= d-1` summing to `s`.
pub fn dicke_count(n: usize, d: usize, s: usize) -> u128 {
    // ways[t] = compositions of t into the slots seen so far
    let mut ways = vec![0u128; s + 1];
    ways[0] = 1;
    for _ in 0..n {
        let mut next = vec![0u128; s + 1];
        for (t, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for v in 0..d.min(s - t + 1) {
                next[t + v] += w;
            }
        }
        ways = next;
    }
    ways[s]
}

/// Equal superposition of all basis states with digit sum `s`.
pub fn dicke(n: usize, d: usize, s: usize) -> Result<PureState> {
    if n < 2 || d < 2 {
        return Err(KcgeError::InvalidParameter(format!("Dicke needs n >= 2 and d >= 2, got n = {n}, d = {d}")));
    }
    if s > (d - 1) * n {
        return Err(KcgeError::InvalidParameter(format!("excitation number {s} exceeds {}", (d - 1) * n)));
    }
    let dims = vec![d; n];
    let total = checked_dim(&dims).filter(|&t| t <= MAX_CONSTRUCT_DIM).ok_or_else(|| {
        KcgeError::BudgetExceeded(format!("Dicke({n}, {d}) exceeds dimension {MAX_CONSTRUCT_DIM}"))
    })?;
    let count = dicke_count(n, d, s);
    let amp = real(1.0 / (count as f64).sqrt());
    let mut amps = vec![real(0.0); total];
    let mut hits = 0u128;
    for (idx, slot) in amps.iter_mut().enumerate() {
        let mut x = idx;
        let mut sum = 0;
        for _ in 0..n {
            sum += x % d;
            x /= d;
        }
        if sum == s {
            *slot = amp;
            hits += 1;
        }
    }
    debug_assert_eq!(hits, count);
    PureState::new(dims, amps)
}

/// The closed-form level `floor(log_d(s + 1)) + 1` claimed for Dicke states.
///
/// This is the published claim, not a classifier result; it disagrees with
/// the rank criterion whenever `s + 1` is an exact power of `d` and in other
/// cases where a subset's Schmidt rank is capped below `s + 1`.
pub fn dicke_cge_formula(d: usize, s: usize) -> Result<usize> {
    if d < 2 {
        return Err(KcgeError::InvalidParameter(format!("d must be >= 2, got {d}")));
    }
    let target = s as u128 + 1;
    let mut m = 0;
    let mut power: u128 = d as u128;
    while power <= target {
        m += 1;
        power *= d as u128;
    }
    Ok(m + 1)
}

/// True when `s + 1 = d^m` for some `m >= 1`.
pub fn is_exact_power(d: usize, s: usize) -> bool {
    let mut p = d as u128;
    let target = s as u128 + 1;
    while p < target {
        p *= d as u128;
    }
    p == target
}

/// `|i⟩ ↦ |d-1-i⟩`; maps `D(n, d, s)` onto `D(n, d, (d-1)n - s)`.
pub fn local_basis_reversal(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |r, c| if r + c == d - 1 { real(1.0) } else { real(0.0) })
}

/// Diagonal phase `e^{iθ}` on the all-ones sector of some of a party's qubits.
///
/// Two qubits give the controlled-phase of a cluster layout; more give the
/// joint controlled-phase used for graph states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPhase {
    pub party: usize,
    /// Positions in the party's qubit register (0 is most significant).
    pub qubits: Vec<usize>,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhzHyperedge {
    pub parties: Vec<usize>,
    /// Factor is `cos θ |0…0⟩ + sin θ |1…1⟩`.
    pub theta: f64,
}

/// One tensor factor before grouping: a state on one qudit at each listed party.
struct Factor {
    parties: Vec<usize>,
    qudit_dims: Vec<usize>,
    amps: Vec<C64>,
}

/// Tensor product of factors (in the given order) with each party's qudits
/// merged into one local factor, in factor order.
fn grouped_product(n: usize, factors: &[Factor]) -> Result<PureState> {
    let mut fine_dims = Vec::new();
    let mut owner = Vec::new();
    let mut total = 1usize;
    for f in factors {
        for (&p, &d) in f.parties.iter().zip(&f.qudit_dims) {
            if p >= n {
                return Err(KcgeError::InvalidParameter(format!("party {p} out of range for n = {n}")));
            }
            fine_dims.push(d);
            owner.push(p);
            total = total
                .checked_mul(d)
                .filter(|&t| t <= MAX_CONSTRUCT_DIM)
                .ok_or_else(|| KcgeError::BudgetExceeded(format!("joint state exceeds dimension {MAX_CONSTRUCT_DIM}")))?;
        }
    }
    let mut amps = vec![real(1.0)];
    for f in factors {
        let mut next = Vec::with_capacity(amps.len() * f.amps.len());
        for a in &amps {
            next.extend(f.amps.iter().map(|b| a * b));
        }
        amps = next;
    }
    let mut order = Vec::with_capacity(owner.len());
    let mut dims = Vec::with_capacity(n);
    for p in 0..n {
        let mine: Vec<usize> = (0..owner.len()).filter(|&q| owner[q] == p).collect();
        if mine.is_empty() {
            return Err(KcgeError::InvalidParameter(format!("party {p} holds no qudits")));
        }
        dims.push(mine.iter().map(|&q| fine_dims[q]).product());
        order.extend(mine);
    }
    PureState::from_unnormalized(dims, permute_factors(&amps, &fine_dims, &order))
}

fn check_angle(theta: f64, what: &str) -> Result<()> {
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(KcgeError::InvalidParameter(format!("{what} angle {theta} must lie in (0, π/2)")));
    }
    Ok(())
}

fn ghz_factor(parties: Vec<usize>, theta: f64) -> Factor {
    let k = parties.len();
    let mut amps = vec![real(0.0); 1 << k];
    amps[0] = real(theta.cos());
    amps[(1 << k) - 1] = real(theta.sin());
    Factor { qudit_dims: vec![2; k], parties, amps }
}

fn apply_phases(state: PureState, phases: &[LocalPhase], max_qubits: Option<usize>) -> Result<PureState> {
    if phases.is_empty() {
        return Ok(state);
    }
    let (dims, mut amps) = state.into_parts();
    let st = strides(&dims);
    for ph in phases {
        if ph.party >= dims.len() {
            return Err(KcgeError::InvalidParameter(format!("phase on missing party {}", ph.party)));
        }
        let k = dims[ph.party].trailing_zeros() as usize;
        let mut qs = ph.qubits.clone();
        qs.sort_unstable();
        qs.dedup();
        if qs.is_empty() || qs.len() != ph.qubits.len() || qs.iter().any(|&q| q >= k) {
            return Err(KcgeError::InvalidParameter(format!(
                "phase qubits {:?} invalid for party {} with {k} qubits",
                ph.qubits, ph.party
            )));
        }
        if let Some(m) = max_qubits {
            if qs.len() != m {
                return Err(KcgeError::InvalidParameter(format!("controlled phase acts on exactly {m} qubits")));
            }
        }
        let mask: usize = qs.iter().map(|&q| 1 << (k - 1 - q)).sum();
        let phase = C64::from_polar(1.0, ph.angle);
        for (idx, a) in amps.iter_mut().enumerate() {
            let digit = (idx / st[ph.party]) % dims[ph.party];
            if digit & mask == mask {
                *a *= phase;
            }
        }
    }
    PureState::new(dims, amps)
}

fn party_count(edges: impl Iterator<Item = usize>) -> Result<usize> {
    edges
        .max()
        .map(|m| m + 1)
        .ok_or_else(|| KcgeError::InvalidParameter("layout has no edges".into()))
}

/// Generalized EPR pairs `cos θ |00⟩ + sin θ |11⟩` on each edge, then per-party
/// two-qubit controlled phases. Parties are `0..=max index`; each holds one
/// qubit per incident edge.
pub fn cluster_from_epr(edges: &[(usize, usize, f64)], phases: &[LocalPhase]) -> Result<PureState> {
    let n = party_count(edges.iter().flat_map(|e| [e.0, e.1]))?;
    let mut factors = Vec::with_capacity(edges.len());
    for &(a, b, theta) in edges {
        if a == b {
            return Err(KcgeError::InvalidParameter(format!("self-loop at party {a}")));
        }
        check_angle(theta, "EPR")?;
        factors.push(((a.min(b), a.max(b)), ghz_factor(vec![a.min(b), a.max(b)], theta)));
    }
    factors.sort_by_key(|f| f.0);
    let factors: Vec<Factor> = factors.into_iter().map(|f| f.1).collect();
    apply_phases(grouped_product(n, &factors)?, phases, Some(2))
}

/// Generalized EPR pairs and GHZ hyperedges, then joint controlled phases.
pub fn graph_from_epr_ghz(
    epr_edges: &[(usize, usize, f64)],
    ghz_hyperedges: &[GhzHyperedge],
    joint_phases: &[LocalPhase],
) -> Result<PureState> {
    let n = party_count(
        epr_edges
            .iter()
            .flat_map(|e| [e.0, e.1])
            .chain(ghz_hyperedges.iter().flat_map(|h| h.parties.iter().copied())),
    )?;
    let mut keyed: Vec<(Vec<usize>, f64)> = Vec::new();
    for &(a, b, theta) in epr_edges {
        if a == b {
            return Err(KcgeError::InvalidParameter(format!("self-loop at party {a}")));
        }
        check_angle(theta, "EPR")?;
        keyed.push((vec![a.min(b), a.max(b)], theta));
    }
    for h in ghz_hyperedges {
        let mut ps = h.parties.clone();
        ps.sort_unstable();
        ps.dedup();
        if ps.len() < 2 || ps.len() != h.parties.len() {
            return Err(KcgeError::InvalidParameter(format!("hyperedge {:?} needs >= 2 distinct parties", h.parties)));
        }
        check_angle(h.theta, "GHZ")?;
        keyed.push((ps, h.theta));
    }
    keyed.sort_by(|x, y| x.0.cmp(&y.0));
    let factors: Vec<Factor> = keyed.into_iter().map(|(ps, th)| ghz_factor(ps, th)).collect();
    apply_phases(grouped_product(n, &factors)?, joint_phases, None)
}

/// Joint state of a network; `edge_states[u]` sits on edge unit `u` of
/// [`NetworkGraph::edge_units`], first factor at the lower endpoint.
pub fn network_joint_state(graph: &NetworkGraph, edge_states: &[PureState]) -> Result<PureState> {
    let units = graph.edge_units();
    if units.len() != edge_states.len() {
        return Err(KcgeError::DimensionMismatch(format!(
            "network has {} edge units, got {} edge states",
            units.len(),
            edge_states.len()
        )));
    }
    graph
        .joint_dimension()
        .filter(|&d| d <= MAX_CONSTRUCT_DIM)
        .ok_or_else(|| KcgeError::BudgetExceeded(format!("network joint state exceeds dimension {MAX_CONSTRUCT_DIM}")))?;
    let mut factors = Vec::with_capacity(units.len());
    for (&(a, b, d), st) in units.iter().zip(edge_states) {
        if st.dims() != [d, d] {
            return Err(KcgeError::DimensionMismatch(format!(
                "edge ({a}, {b}) declares local dimension {d}, state has dims {:?}",
                st.dims()
            )));
        }
        factors.push(Factor { parties: vec![a, b], qudit_dims: vec![d, d], amps: st.amplitudes().to_vec() });
    }
    grouped_product(graph.n(), &factors)
}

/// `Σ_i |ii⟩ / √d` on every edge unit.
pub fn maximally_entangled(d: usize) -> Result<PureState> {
    ghz(2, d, &vec![1.0 / (d as f64).sqrt(); d])
}

pub fn network_joint_state_epr(graph: &NetworkGraph) -> Result<PureState> {
    let states = graph
        .edge_units()
        .iter()
        .map(|&(_, _, d)| maximally_entangled(d))
        .collect::<Result<Vec<_>>>()?;
    network_joint_state(graph, &states)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FamilyKind {
    Ghz,
    WType,
    Dicke,
    ClusterFromEpr,
    GraphFromEprAndGhz,
    NetworkJoint,
    Product,
}

/// Parameter record of a named family, as read from `{"family": ..., ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateFamily {
    Ghz {
        n: usize,
        d: usize,
        a: Vec<f64>,
    },
    WType {
        n: usize,
        a: Vec<f64>,
    },
    Dicke {
        n: usize,
        d: usize,
        s: usize,
    },
    Cluster {
        edges: Vec<(usize, usize, f64)>,
        #[serde(default)]
        phases: Vec<LocalPhase>,
    },
    Graph {
        #[serde(default)]
        epr_edges: Vec<(usize, usize, f64)>,
        #[serde(default)]
        ghz_hyperedges: Vec<GhzHyperedge>,
        #[serde(default)]
        phases: Vec<LocalPhase>,
    },
    /// Every edge unit carries `edge_state`, or a maximally entangled pair when absent.
    Network {
        graph: NetworkGraph,
        #[serde(default)]
        edge_state: Option<StateJson>,
    },
    Product {
        dims: Vec<usize>,
    },
}

impl StateFamily {
    pub fn kind(&self) -> FamilyKind {
        match self {
            StateFamily::Ghz { .. } => FamilyKind::Ghz,
            StateFamily::WType { .. } => FamilyKind::WType,
            StateFamily::Dicke { .. } => FamilyKind::Dicke,
            StateFamily::Cluster { .. } => FamilyKind::ClusterFromEpr,
            StateFamily::Graph { .. } => FamilyKind::GraphFromEprAndGhz,
            StateFamily::Network { .. } => FamilyKind::NetworkJoint,
            StateFamily::Product { .. } => FamilyKind::Product,
        }
    }

    pub fn build(&self) -> Result<PureState> {
        match self {
            StateFamily::Ghz { n, d, a } => ghz(*n, *d, a),
            StateFamily::WType { n, a } => w_type(*n, a),
            StateFamily::Dicke { n, d, s } => dicke(*n, *d, *s),
            StateFamily::Cluster { edges, phases } => cluster_from_epr(edges, phases),
            StateFamily::Graph { epr_edges, ghz_hyperedges, phases } => {
                graph_from_epr_ghz(epr_edges, ghz_hyperedges, phases)
            }
            StateFamily::Network { graph, edge_state } => match edge_state {
                None => network_joint_state_epr(graph),
                Some(js) => {
                    let st = js.clone().into_state()?;
                    network_joint_state(graph, &vec![st; graph.edge_units().len()])
                }
            },
            StateFamily::Product { dims } => PureState::zero(dims.clone()),
        }
    }

    /// Level asserted in the literature for this family, when one is stated.
    pub fn claimed_cge(&self) -> Option<usize> {
        match self {
            StateFamily::Ghz { a, .. } => Some(if a.iter().filter(|x| **x != 0.0).count() >= 2 { 1 } else { 0 }),
            StateFamily::WType { n, a } => {
                let nonzero = a.iter().filter(|x| **x != 0.0).count();
                if nonzero == 1 {
                    Some(0)
                } else if nonzero == a.len() && *n >= 4 {
                    Some(2)
                } else {
                    None
                }
            }
            StateFamily::Dicke { n, d, s } => {
                if *s == 0 || *s == (d - 1) * n {
                    Some(0)
                } else {
                    dicke_cge_formula(*d, *s).ok()
                }
            }
            StateFamily::Cluster { .. } | StateFamily::Graph { .. } => Some(1),
            StateFamily::Network { graph, .. } => {
                let n = graph.n();
                let complete = (0..n).all(|i| (i + 1..n).all(|j| graph.shared(i, j) > 0));
                complete.then_some(n / 2)
            }
            StateFamily::Product { .. } => Some(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{schmidt_rank, PartySubset, Tolerance};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn rank(s: &PureState, cut: &[usize]) -> usize {
        schmidt_rank(s, &PartySubset::cut(cut.to_vec(), s.n()).unwrap(), &Tolerance::default()).unwrap()
    }

    #[test]
    fn ghz_layout_and_errors() {
        let g = ghz(4, 3, &[1.0 / 3f64.sqrt(); 3]).unwrap();
        assert!((g.amplitudes()[40].re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((g.amplitudes()[80].re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        for p in 0..4 {
            assert_eq!(rank(&g, &[p]), 3);
        }
        assert!(matches!(ghz(3, 2, &[0.5, 0.5]), Err(KcgeError::NotNormalized(_))));
        assert!(ghz(3, 2, &[1.0]).is_err());
        let prod = ghz(2, 2, &[1.0, 0.0]).unwrap();
        assert!(prod.max_abs_diff(&PureState::zero(vec![2, 2]).unwrap()) == 0.0);
    }

    #[test]
    fn w_type_positions() {
        let w = w_type(3, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(w.max_abs_diff(&PureState::basis(vec![2; 3], 4).unwrap()) == 0.0);
        let plain = w_type(4, &[0.5, 0.5, 0.5, 0.5, 0.0]).unwrap();
        for idx in [8, 4, 2, 1] {
            assert!((plain.amplitudes()[idx].re - 0.5).abs() < 1e-15);
        }
        assert!(w_type(4, &[0.5; 4]).is_err());
    }

    #[test]
    fn dicke_counts() {
        assert_eq!(dicke_count(4, 2, 2), 6);
        assert_eq!(dicke_count(3, 3, 3), 7);
        assert_eq!(dicke_count(5, 3, 0), 1);
        assert_eq!(dicke_count(5, 3, 10), 1);
        let d = dicke(3, 2, 1).unwrap();
        for idx in [4, 2, 1] {
            assert!((d.amplitudes()[idx].re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
        assert_eq!(dicke(4, 2, 2).unwrap().amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 6);
        assert!(dicke(3, 2, 4).is_err());
    }

    #[test]
    fn dicke_formula_values() {
        assert_eq!(dicke_cge_formula(2, 1).unwrap(), 2);
        assert_eq!(dicke_cge_formula(2, 3).unwrap(), 3);
        assert_eq!(dicke_cge_formula(3, 1).unwrap(), 1);
        assert_eq!(dicke_cge_formula(2, 0).unwrap(), 1);
        assert_eq!(dicke_cge_formula(3, 8).unwrap(), 3);
        assert!(is_exact_power(2, 3) && is_exact_power(3, 8) && !is_exact_power(2, 4));
    }

    #[test]
    fn cluster_single_edge_is_epr() {
        let s = cluster_from_epr(&[(0, 1, FRAC_PI_4)], &[]).unwrap();
        let mut expect = vec![real(0.0); 4];
        expect[0] = real(FRAC_1_SQRT_2);
        expect[3] = real(FRAC_1_SQRT_2);
        assert!(s.max_abs_diff(&PureState::new(vec![2, 2], expect).unwrap()) < 1e-15);
    }

    #[test]
    fn cluster_triangle_ranks() {
        let s = cluster_from_epr(&[(0, 1, FRAC_PI_4), (1, 2, FRAC_PI_4), (0, 2, FRAC_PI_4)], &[]).unwrap();
        assert_eq!(s.dims(), &[4, 4, 4]);
        for p in 0..3 {
            assert_eq!(rank(&s, &[p]), 4);
        }
    }

    #[test]
    fn cluster_rejects_degenerate_edges() {
        assert!(cluster_from_epr(&[(0, 1, 0.0)], &[]).is_err());
        assert!(cluster_from_epr(&[(0, 1, FRAC_PI_2)], &[]).is_err());
        assert!(cluster_from_epr(&[(0, 0, 0.3)], &[]).is_err());
        assert!(cluster_from_epr(&[(0, 2, 0.3)], &[]).is_err());
    }

    #[test]
    fn phases_keep_ranks() {
        let edges = [(0, 1, 0.3), (1, 2, 1.1)];
        let plain = cluster_from_epr(&edges, &[]).unwrap();
        let phased =
            cluster_from_epr(&edges, &[LocalPhase { party: 1, qubits: vec![0, 1], angle: 0.7 }]).unwrap();
        assert!(plain.max_abs_diff(&phased) > 1e-3);
        for p in 0..3 {
            assert_eq!(rank(&plain, &[p]), rank(&phased, &[p]));
        }
        let bad = LocalPhase { party: 0, qubits: vec![0, 1], angle: 0.7 };
        assert!(cluster_from_epr(&edges, &[bad]).is_err());
    }

    #[test]
    fn single_hyperedge_is_ghz() {
        let h = GhzHyperedge { parties: vec![0, 1, 2], theta: FRAC_PI_4 };
        let s = graph_from_epr_ghz(&[], &[h], &[]).unwrap();
        let g = ghz(3, 2, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        assert!(s.max_abs_diff(&g) < 1e-15);
    }

    #[test]
    fn epr_plus_ghz_shared_party() {
        let h = GhzHyperedge { parties: vec![1, 2, 3], theta: 0.4 };
        let s = graph_from_epr_ghz(&[(0, 1, 0.9)], &[h], &[]).unwrap();
        assert_eq!(s.dims(), &[2, 4, 2, 2]);
        assert_eq!(rank(&s, &[1]), 4);
    }

    #[test]
    fn network_dimension_checks() {
        let g = NetworkGraph::chain(3).unwrap();
        let epr = maximally_entangled(2).unwrap();
        assert!(network_joint_state(&g, std::slice::from_ref(&epr)).is_err());
        let qutrit = maximally_entangled(3).unwrap();
        assert!(matches!(network_joint_state(&g, &[epr, qutrit]), Err(KcgeError::DimensionMismatch(_))));
        assert!(matches!(
            network_joint_state_epr(&NetworkGraph::complete(6).unwrap()),
            Err(KcgeError::BudgetExceeded(_))
        ));
    }

    #[test]
    fn family_json() {
        let f: StateFamily = serde_json::from_str(r#"{"family":"ghz","n":3,"d":2,"a":[0.6,0.8]}"#).unwrap();
        assert_eq!(f.kind(), FamilyKind::Ghz);
        assert_eq!(f.claimed_cge(), Some(1));
        assert_eq!(f.build().unwrap().dims(), &[2, 2, 2]);
        let net: StateFamily =
            serde_json::from_str(r#"{"family":"network","graph":{"n":4,"edges":[[0,1],[0,2],[0,3],[1,2],[1,3],[2,3]]}}"#)
                .unwrap();
        assert_eq!(net.claimed_cge(), Some(2));
        assert_eq!(net.build().unwrap().dims(), &[8, 8, 8, 8]);
        assert!(serde_json::from_str::<StateFamily>(r#"{"family":"ghz","n":3}"#).is_err());
    }
}
