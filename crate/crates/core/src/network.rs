//! Graph bounds on the connection level of networks built from bipartite
//! entangled pairs.
//!
//! A [`NetworkGraph`] is a multigraph: each unit of edge multiplicity is one
//! shared bipartite state. The analyzer offers three views:
//!
//! * the degree condition `s_in + 2t >= s_out` ([`lemma1_fires`]), which
//!   certifies that the subset can jointly disentangle one of its parties;
//! * a connectivity bound from edge-disjoint chains ([`lemma2_bound`]);
//! * a greedy subset-growth search ([`algorithm1`]) producing an upper bound
//!   on the CGE level together with a replayable trace.
//!
//! The joint state of a network groups every party's edge qudits into one
//! local factor. Edge units are ordered by `(min endpoint, max endpoint, dim)`
//! and each party's qudits follow that order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{classify, ClassifyOptions};
use crate::disentangler::{KConnectionChannel, KConnectionTerm};
use crate::error::{KcgeError, Result};
use crate::tensor::{strides, CMatrix, PartySubset, PureState, C64};
use crate::zoo;

/// Default local dimension of an edge state.
pub const DEFAULT_EDGE_DIM: usize = 2;
/// Joint-state dimension allowed for [`cross_check`] unless overridden.
pub const CROSS_CHECK_MAX_DIM: usize = 1 << 14;
/// Upper bound on `dim(H_A)^2 * (#Kraus)` for [`lemma1_channel`].
pub const LEMMA1_CHANNEL_MAX_ENTRIES: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NetworkEdge {
    pub a: usize,
    pub b: usize,
    pub multiplicity: usize,
    pub dim: usize,
}

impl NetworkEdge {
    pub fn new(a: usize, b: usize, multiplicity: usize) -> Self {
        NetworkEdge { a, b, multiplicity, dim: DEFAULT_EDGE_DIM }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    fn touches(&self, p: usize) -> bool {
        self.a == p || self.b == p
    }

    fn other(&self, p: usize) -> usize {
        if self.a == p {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<Vec<usize>>,
}

/// Undirected multigraph of parties sharing bipartite entangled states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct NetworkGraph {
    n: usize,
    edges: Vec<NetworkEdge>,
}

impl TryFrom<RawGraph> for NetworkGraph {
    type Error = KcgeError;

    fn try_from(raw: RawGraph) -> Result<Self> {
        let edges = raw
            .edges
            .iter()
            .map(|e| match e.as_slice() {
                [a, b] => Ok(NetworkEdge::new(*a, *b, 1)),
                [a, b, m] => Ok(NetworkEdge::new(*a, *b, *m)),
                [a, b, m, d] => Ok(NetworkEdge::new(*a, *b, *m).with_dim(*d)),
                other => Err(KcgeError::InvalidParameter(format!(
                    "edge {other:?} must be [i, j], [i, j, multiplicity] or [i, j, multiplicity, dim]"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        NetworkGraph::new(raw.n, edges)
    }
}

impl From<NetworkGraph> for RawGraph {
    fn from(g: NetworkGraph) -> Self {
        let edges = g
            .edges
            .iter()
            .map(|e| {
                if e.dim == DEFAULT_EDGE_DIM {
                    vec![e.a, e.b, e.multiplicity]
                } else {
                    vec![e.a, e.b, e.multiplicity, e.dim]
                }
            })
            .collect();
        RawGraph { n: g.n, edges }
    }
}

impl NetworkGraph {
    /// Validates and canonicalizes: endpoints ordered, parallel edges of equal
    /// dimension merged, edges sorted.
    pub fn new(n: usize, edges: Vec<NetworkEdge>) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
        for e in edges {
            if e.a >= n || e.b >= n {
                return Err(KcgeError::InvalidParameter(format!("edge ({}, {}) out of range for n = {n}", e.a, e.b)));
            }
            if e.a == e.b {
                return Err(KcgeError::InvalidParameter(format!("self-loop at party {}", e.a)));
            }
            if e.multiplicity == 0 {
                return Err(KcgeError::InvalidParameter(format!("edge ({}, {}) has multiplicity 0", e.a, e.b)));
            }
            if e.dim < 2 {
                return Err(KcgeError::InvalidParameter(format!("edge ({}, {}) has local dimension {}", e.a, e.b, e.dim)));
            }
            *merged.entry((e.a.min(e.b), e.a.max(e.b), e.dim)).or_default() += e.multiplicity;
        }
        let edges = merged
            .into_iter()
            .map(|((a, b, dim), multiplicity)| NetworkEdge { a, b, multiplicity, dim })
            .collect();
        Ok(NetworkGraph { n, edges })
    }

    /// Unit-multiplicity qubit edges.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::new(n, pairs.iter().map(|&(a, b)| NetworkEdge::new(a, b, 1)).collect())
    }

    pub fn chain(n: usize) -> Result<Self> {
        Self::from_pairs(n, &(1..n).map(|i| (i - 1, i)).collect::<Vec<_>>())
    }

    /// Party 0 is the hub.
    pub fn star(n: usize) -> Result<Self> {
        Self::from_pairs(n, &(1..n).map(|i| (0, i)).collect::<Vec<_>>())
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(KcgeError::InvalidParameter("a cycle needs at least 3 parties".into()));
        }
        Self::from_pairs(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>())
    }

    pub fn complete(n: usize) -> Result<Self> {
        let pairs: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::from_pairs(n, &pairs)
    }

    /// `rows × cols` planar lattice, parties numbered row-major.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let p = r * cols + c;
                if c + 1 < cols {
                    pairs.push((p, p + 1));
                }
                if r + 1 < rows {
                    pairs.push((p, p + cols));
                }
            }
        }
        Self::from_pairs(rows * cols, &pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[NetworkEdge] {
        &self.edges
    }

    /// Connectedness degree: number of edge units at `p`.
    pub fn degree(&self, p: usize) -> usize {
        self.edges.iter().filter(|e| e.touches(p)).map(|e| e.multiplicity).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|p| self.degree(p)).collect()
    }

    /// Edge units shared by `i` and `j`.
    pub fn shared(&self, i: usize, j: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| (e.a == i && e.b == j) || (e.a == j && e.b == i))
            .map(|e| e.multiplicity)
            .sum()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![vec![0; self.n]; self.n];
        for e in &self.edges {
            adj[e.a][e.b] += e.multiplicity;
            adj[e.b][e.a] += e.multiplicity;
        }
        adj
    }

    /// Every edge unit as `(a, b, dim)`, in joint-state order.
    pub fn edge_units(&self) -> Vec<(usize, usize, usize)> {
        self.edges
            .iter()
            .flat_map(|e| std::iter::repeat_n((e.a, e.b, e.dim), e.multiplicity))
            .collect()
    }

    /// `(unit index, dim)` of every qudit held by `p`, in local factor order.
    pub fn party_qudits(&self, p: usize) -> Vec<(usize, usize)> {
        self.edge_units()
            .iter()
            .enumerate()
            .filter(|(_, u)| u.0 == p || u.1 == p)
            .map(|(i, u)| (i, u.2))
            .collect()
    }

    /// Local dimension of each party in the joint state; `None` on overflow.
    pub fn joint_dims(&self) -> Option<Vec<usize>> {
        (0..self.n)
            .map(|p| {
                self.party_qudits(p)
                    .iter()
                    .try_fold(1usize, |acc, &(_, d)| acc.checked_mul(d))
            })
            .collect()
    }

    /// Total joint-state dimension; `None` on overflow.
    pub fn joint_dimension(&self) -> Option<usize> {
        self.joint_dims()?.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
    }
}

/// Subset-relative edge counts of one party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeProfile {
    pub subset: Vec<usize>,
    pub party: usize,
    /// Units from `party` into `subset \ {party}`.
    pub s_in: usize,
    /// Units from `party` to parties outside `subset`.
    pub s_out: usize,
    /// Units with both endpoints in `subset \ {party}`.
    pub t: usize,
}

pub fn degree_profile(g: &NetworkGraph, subset: &PartySubset, party: usize) -> Result<DegreeProfile> {
    if subset.n() != g.n() {
        return Err(KcgeError::InvalidSubset(format!("subset declared for n = {}, graph has {}", subset.n(), g.n())));
    }
    if !subset.contains(party) {
        return Err(KcgeError::InvalidSubset(format!("party {party} not in {:?}", subset.members())));
    }
    let (mut s_in, mut s_out, mut t) = (0, 0, 0);
    for e in g.edges() {
        let (ina, inb) = (subset.contains(e.a), subset.contains(e.b));
        if e.touches(party) {
            if subset.contains(e.other(party)) {
                s_in += e.multiplicity;
            } else {
                s_out += e.multiplicity;
            }
        } else if ina && inb {
            t += e.multiplicity;
        }
    }
    Ok(DegreeProfile { subset: subset.members().to_vec(), party, s_in, s_out, t })
}

/// `s_in + 2t >= s_out`: the subset can swap all outside entanglement of the
/// party onto its other members.
pub fn lemma1_fires(profile: &DegreeProfile) -> bool {
    profile.s_in + 2 * profile.t >= profile.s_out
}

/// Unit-capacity max-flow between `s` and `t` on an undirected multigraph.
fn max_flow(adj: &[Vec<usize>], s: usize, t: usize) -> usize {
    let n = adj.len();
    let mut residual: Vec<Vec<isize>> = adj.iter().map(|row| row.iter().map(|&c| c as isize).collect()).collect();
    let mut flow = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for v in 0..n {
                if prev[v] == usize::MAX && residual[u][v] > 0 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            return flow;
        }
        let mut v = t;
        while v != s {
            let u = prev[v];
            residual[u][v] -= 1;
            residual[v][u] += 1;
            v = u;
        }
        flow += 1;
    }
}

/// Minimum over party pairs of the number of edge-disjoint chains joining them.
pub fn chain_connectivity(g: &NetworkGraph) -> usize {
    if g.n() < 2 {
        return 0;
    }
    let adj = g.adjacency();
    (0..g.n())
        .flat_map(|i| (i + 1..g.n()).map(move |j| (i, j)))
        .map(|(i, j)| max_flow(&adj, i, j))
        .min()
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lemma2Bound {
    pub connectivity: usize,
    /// `ceil((c + 1) / 2)`.
    pub biseparable_size: usize,
    /// `biseparable_size - 1`, floored at 0.
    pub cge_upper_bound: usize,
    /// False when `c < 2`, where the bound is vacuous or contradicts 1-CGE chains.
    pub applies: bool,
}

pub fn lemma2_bound(g: &NetworkGraph) -> Lemma2Bound {
    let c = chain_connectivity(g);
    let biseparable_size = (c + 2) / 2;
    Lemma2Bound { connectivity: c, biseparable_size, cge_upper_bound: biseparable_size.saturating_sub(1), applies: c >= 2 }
}

/// One greedy growth step of [`algorithm1`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GrowthStep {
    pub size: usize,
    /// Party added at this step (`None` for the seed itself).
    pub added: Option<usize>,
    pub members: Vec<usize>,
    pub s_in: usize,
    pub s_out: usize,
    pub t: usize,
    pub fires: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedTrace {
    pub seed: usize,
    pub degree: usize,
    pub size_limit: usize,
    pub steps: Vec<GrowthStep>,
    /// Smallest subset size at which the degree condition held.
    pub fired_at: Option<usize>,
    /// `min(degree, fired_at - 1)`, or `degree` when nothing fired.
    pub v: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetworkBoundReport {
    pub n: usize,
    pub degrees: Vec<usize>,
    /// Parties of minimal degree, used as growth seeds.
    pub seeds: Vec<usize>,
    /// Smallest subset size `b` at which the degree condition certified
    /// `b`-connection biseparability.
    pub lemma1_subset_size: Option<usize>,
    pub lemma2_connectivity: usize,
    pub lemma2_biseparable_size: usize,
    pub lemma2_cge_bound: usize,
    pub lemma2_applies: bool,
    /// `floor(n / 2)`.
    pub level_cap: usize,
    /// `min(min_s v_s, floor(n / 2))`. The Lemma 2 value is reported but not folded in.
    pub cge_upper_bound: usize,
    pub trace: Vec<SeedTrace>,
}

fn grow_from(g: &NetworkGraph, adj: &[Vec<usize>], seed: usize) -> Result<SeedTrace> {
    let n = g.n();
    let degree = g.degree(seed);
    let size_limit = (degree.div_ceil(2) + 1).min(n);
    let mut inside = vec![false; n];
    inside[seed] = true;
    let mut members = vec![seed];
    let mut steps = Vec::new();
    let mut fired_at = None;
    let mut added = None;
    loop {
        let subset = PartySubset::new(members.clone(), n)?;
        let prof = degree_profile(g, &subset, seed)?;
        let fires = lemma1_fires(&prof);
        steps.push(GrowthStep {
            size: members.len(),
            added,
            members: subset.members().to_vec(),
            s_in: prof.s_in,
            s_out: prof.s_out,
            t: prof.t,
            fires,
        });
        if fires {
            fired_at = Some(members.len());
            break;
        }
        if members.len() >= size_limit {
            break;
        }
        // outside party sharing the most units with the subset; ties to lowest index
        let next = (0..n)
            .filter(|&u| !inside[u])
            .map(|u| (u, members.iter().map(|&m| adj[u][m]).sum::<usize>()))
            .fold(None, |best: Option<(usize, usize)>, (u, w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((u, w)),
            });
        let Some((u, _)) = next else { break };
        inside[u] = true;
        members.push(u);
        added = Some(u);
    }
    let v = match fired_at {
        Some(b) => degree.min(b - 1),
        None => degree,
    };
    Ok(SeedTrace { seed, degree, size_limit, steps, fired_at, v })
}

/// Greedy Lemma-1 search from every minimum-degree party.
///
/// From each seed the subset grows one party at a time, always taking the
/// outside party with the most shared units (lowest index on ties), up to
/// size `floor((ℓ + 1) / 2) + 1`. Each seed runs `O(n)` steps of `O(n^2)`
/// work, so the whole search is `O(n^4)`.
pub fn algorithm1(g: &NetworkGraph) -> Result<NetworkBoundReport> {
    let n = g.n();
    if n < 2 {
        return Err(KcgeError::InvalidParameter("a network needs at least 2 parties".into()));
    }
    let degrees = g.degrees();
    let min_degree = *degrees.iter().min().expect("n >= 2");
    let seeds: Vec<usize> = (0..n).filter(|&p| degrees[p] == min_degree).collect();
    let adj = g.adjacency();
    let trace = seeds.par_iter().map(|&s| grow_from(g, &adj, s)).collect::<Result<Vec<_>>>()?;
    let lemma1_subset_size = trace.iter().filter_map(|t| t.fired_at).min();
    let level_cap = n / 2;
    let v_min = trace.iter().map(|t| t.v).min().expect("at least one seed");
    let l2 = lemma2_bound(g);
    Ok(NetworkBoundReport {
        n,
        degrees,
        seeds,
        lemma1_subset_size,
        lemma2_connectivity: l2.connectivity,
        lemma2_biseparable_size: l2.biseparable_size,
        lemma2_cge_bound: l2.cge_upper_bound,
        lemma2_applies: l2.applies,
        level_cap,
        cge_upper_bound: v_min.min(level_cap),
        trace,
    })
}

/// Classifier level of the joint state next to the graph bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub joint_dimension: usize,
    pub classifier_level: usize,
    pub cge_upper_bound: usize,
    pub lemma1_subset_size: Option<usize>,
    pub lemma2_cge_bound: usize,
    /// `classifier_level <= cge_upper_bound`.
    pub consistent: bool,
}

/// Builds the joint state (EPR pairs when `edge_states` is `None`) and
/// compares the classifier with [`algorithm1`].
pub fn cross_check(
    g: &NetworkGraph,
    edge_states: Option<&[PureState]>,
    options: &ClassifyOptions,
    max_dim: usize,
) -> Result<CrossCheck> {
    let report = algorithm1(g)?;
    let joint_dimension = g
        .joint_dimension()
        .filter(|&d| d <= max_dim)
        .ok_or_else(|| KcgeError::BudgetExceeded(format!("joint state of the network exceeds dimension {max_dim}")))?;
    let state = match edge_states {
        Some(states) => zoo::network_joint_state(g, states)?,
        None => zoo::network_joint_state_epr(g)?,
    };
    let classification = classify(&state, options)?;
    Ok(CrossCheck {
        joint_dimension,
        classifier_level: classification.max_cge_level,
        cge_upper_bound: report.cge_upper_bound,
        lemma1_subset_size: report.lemma1_subset_size,
        lemma2_cge_bound: report.lemma2_cge_bound,
        consistent: classification.max_cge_level <= report.cge_upper_bound,
    })
}

/// The swap-based channel that frees `party` using joint operations on `subset`.
///
/// Every edge unit internal to the subset is reset to `|00⟩`; each of the
/// party's outside qudits is then swapped into a freshly reset qudit held by
/// another subset member. The party ends in `|0⟩`. Parties outside the subset
/// act trivially, so the result is a k-connection channel with `k = |subset|`.
pub fn lemma1_channel(g: &NetworkGraph, subset: &PartySubset, party: usize) -> Result<KConnectionChannel> {
    let profile = degree_profile(g, subset, party)?;
    if !subset.is_cut() {
        return Err(KcgeError::InvalidSubset("subset must leave some party outside".into()));
    }
    let dims = g
        .joint_dims()
        .ok_or_else(|| KcgeError::BudgetExceeded("joint dimension overflows".into()))?;
    if dims.iter().any(|&d| d < 2) {
        return Err(KcgeError::InvalidParameter("every party must hold at least one edge".into()));
    }
    let units = g.edge_units();
    // qudits of H_A in factor order: (owner, unit, dim)
    let fine: Vec<(usize, usize, usize)> = subset
        .members()
        .iter()
        .flat_map(|&p| g.party_qudits(p).into_iter().map(move |(u, d)| (p, u, d)))
        .collect();
    let pos = |owner: usize, unit: usize| fine.iter().position(|&(p, u, _)| p == owner && u == unit);
    let mut reset = Vec::new();
    let mut slots = Vec::new();
    let mut outer = Vec::new();
    for (ui, &(a, b, _)) in units.iter().enumerate() {
        let (ina, inb) = (subset.contains(a), subset.contains(b));
        if ina && inb {
            let (pa, pb) = (pos(a, ui).expect("member qudit"), pos(b, ui).expect("member qudit"));
            reset.extend([pa, pb]);
            if a == party {
                slots.push(pb);
            } else if b == party {
                slots.push(pa);
            } else {
                slots.extend([pa, pb]);
            }
        } else if a == party || b == party {
            outer.push(pos(party, ui).expect("party qudit"));
        }
    }
    // pair each outer qudit with an unused slot of equal dimension
    let mut used = vec![false; slots.len()];
    let mut swaps = Vec::with_capacity(outer.len());
    for &o in &outer {
        let Some(k) = (0..slots.len()).find(|&k| !used[k] && fine[slots[k]].2 == fine[o].2) else {
            return Err(KcgeError::InvalidParameter(format!(
                "degree condition fails for party {party}: s_in = {}, t = {}, s_out = {}",
                profile.s_in, profile.t, profile.s_out
            )));
        };
        used[k] = true;
        swaps.push((o, slots[k]));
    }
    let fdims: Vec<usize> = fine.iter().map(|f| f.2).collect();
    let dim_a: usize = fdims.iter().product();
    let n_kraus: usize = reset.iter().map(|&q| fdims[q]).product();
    if dim_a.saturating_mul(dim_a).saturating_mul(n_kraus) > LEMMA1_CHANNEL_MAX_ENTRIES {
        return Err(KcgeError::BudgetExceeded(format!(
            "channel would need {n_kraus} Kraus operators of side {dim_a}"
        )));
    }
    let fs = strides(&fdims);
    let rdims: Vec<usize> = reset.iter().map(|&q| fdims[q]).collect();
    let rs = strides(&rdims);
    let mut joint = vec![CMatrix::zeros(dim_a, dim_a); n_kraus];
    for y in 0..dim_a {
        let mut digits: Vec<usize> = (0..fdims.len()).map(|q| (y / fs[q]) % fdims[q]).collect();
        let x: usize = reset.iter().enumerate().map(|(r, &q)| digits[q] * rs[r]).sum();
        for &q in &reset {
            digits[q] = 0;
        }
        for &(o, s) in &swaps {
            digits.swap(o, s);
        }
        let z: usize = digits.iter().zip(&fs).map(|(d, s)| d * s).sum();
        joint[x][(z, y)] = C64::new(1.0, 0.0);
    }
    let comp = subset.complement();
    let terms = joint
        .into_iter()
        .map(|k| KConnectionTerm {
            joint: k,
            locals: comp.iter().map(|&p| CMatrix::identity(dims[p], dims[p])).collect(),
        })
        .collect();
    KConnectionChannel::new(subset.clone(), dims, terms)
}
