//! Connection-level classification of pure states by subset Schmidt ranks.
//!
//! A pure state is k-CGE iff every size-k subset `I` has Schmidt rank
//! strictly above `threshold(I) = dim(H_I) / min_{j∈I} d_j` (which is
//! `d^{k-1}` for uniform local dimension `d`). Levels above `floor(n/2)` are
//! never attained.

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{KcgeError, Result};
use crate::tensor::{schmidt_rank, PartySubset, PureState, Tolerance};

/// Size limits beyond which classification is refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budget {
    pub max_dim: usize,
    pub max_subsets: u128,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_dim: 1 << 16, max_subsets: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassifyOptions {
    pub tol: Tolerance,
    /// Stop after this level even if it passes.
    pub max_k: Option<usize>,
    pub budget: Budget,
}

/// `threshold(I)` for the parties of `subset`.
pub fn subset_threshold(dims: &[usize], subset: &[usize]) -> usize {
    let dim: usize = subset.iter().map(|&p| dims[p]).product();
    let min = subset.iter().map(|&p| dims[p]).min().unwrap_or(1);
    dim / min
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn check_budget(state: &PureState, budget: &Budget) -> Result<()> {
    let n = state.n();
    if n < 2 {
        return Err(KcgeError::InvalidParameter("classification needs at least 2 parties".into()));
    }
    if state.dim() > budget.max_dim {
        return Err(KcgeError::BudgetExceeded(format!(
            "state dimension {} exceeds classifier budget {}",
            state.dim(),
            budget.max_dim
        )));
    }
    let subsets = binomial(n, n / 2);
    if subsets > budget.max_subsets {
        return Err(KcgeError::BudgetExceeded(format!(
            "C({n}, {}) = {subsets} subsets exceed budget {}",
            n / 2,
            budget.max_subsets
        )));
    }
    Ok(())
}

/// The subset that certifies failure of a level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailingSubset {
    pub subset: Vec<usize>,
    pub rank: usize,
    pub threshold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelCheck {
    pub k: usize,
    pub is_cge: bool,
    /// Lexicographically first size-k subset with `rank <= threshold`.
    pub failing_subset: Option<FailingSubset>,
}

fn check_level(state: &PureState, k: usize, tol: &Tolerance) -> Result<LevelCheck> {
    let n = state.n();
    if k == 0 || k > n / 2 {
        return Err(KcgeError::LevelOutOfRange { k, n });
    }
    let subsets: Vec<Vec<usize>> = (0..n).combinations(k).collect();
    let ranks: Vec<Result<Option<FailingSubset>>> = subsets
        .par_iter()
        .map(|members| {
            let cut = PartySubset::cut(members.clone(), n)?;
            let rank = schmidt_rank(state, &cut, tol)?;
            let threshold = subset_threshold(state.dims(), members);
            Ok((rank <= threshold).then(|| FailingSubset { subset: members.clone(), rank, threshold }))
        })
        .collect();
    // first failure in lexicographic order, independent of completion order
    let mut failing = None;
    for r in ranks {
        if let Some(f) = r? {
            failing = Some(f);
            break;
        }
    }
    Ok(LevelCheck { k, is_cge: failing.is_none(), failing_subset: failing })
}

/// Checks level `k` (`1 <= k <= floor(n/2)`) under the default budget.
pub fn is_k_cge(state: &PureState, k: usize, tol: &Tolerance) -> Result<LevelCheck> {
    check_budget(state, &Budget::default())?;
    check_level(state, k, tol)
}

/// Negation of [`is_k_cge`] for pure states; always true for `floor(n/2) < k <= n`.
pub fn is_k_connection_biseparable(state: &PureState, k: usize, tol: &Tolerance) -> Result<bool> {
    let n = state.n();
    if k == 0 || k > n {
        return Err(KcgeError::LevelOutOfRange { k, n });
    }
    if k > n / 2 {
        return Ok(true);
    }
    Ok(!is_k_cge(state, k, tol)?.is_cge)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Cge,
    NotCge,
    /// A lower level already failed.
    ImpliedNotCge,
    /// Above the requested `max_k`.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelReport {
    pub k: usize,
    pub verdict: Verdict,
    pub failing_subset: Option<FailingSubset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ThresholdRange {
    pub k: usize,
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub n: usize,
    pub dims: Vec<usize>,
    /// Largest passing level; 0 when even level 1 fails.
    pub max_cge_level: usize,
    pub level_cap: usize,
    /// True when `max_k` stopped the scan before a level failed.
    pub truncated: bool,
    pub per_level: Vec<LevelReport>,
    pub thresholds_used: Vec<ThresholdRange>,
    pub tolerance: Tolerance,
}

pub fn classify(state: &PureState, options: &ClassifyOptions) -> Result<ClassificationReport> {
    check_budget(state, &options.budget)?;
    let n = state.n();
    let cap = n / 2;
    let limit = options.max_k.map_or(cap, |m| m.min(cap));
    let mut per_level = Vec::with_capacity(cap);
    let mut thresholds_used = Vec::with_capacity(cap);
    let mut max_cge_level = 0;
    let mut failed = false;
    for k in 1..=cap {
        let (min, max) = (0..n)
            .combinations(k)
            .map(|s| subset_threshold(state.dims(), &s))
            .fold((usize::MAX, 0), |(lo, hi), t| (lo.min(t), hi.max(t)));
        thresholds_used.push(ThresholdRange { k, min, max });
        let report = if failed {
            LevelReport { k, verdict: Verdict::ImpliedNotCge, failing_subset: None }
        } else if k > limit {
            LevelReport { k, verdict: Verdict::Skipped, failing_subset: None }
        } else {
            let check = check_level(state, k, &options.tol)?;
            if check.is_cge {
                max_cge_level = k;
                LevelReport { k, verdict: Verdict::Cge, failing_subset: None }
            } else {
                failed = true;
                LevelReport { k, verdict: Verdict::NotCge, failing_subset: check.failing_subset }
            }
        };
        per_level.push(report);
    }
    Ok(ClassificationReport {
        n,
        dims: state.dims().to_vec(),
        max_cge_level,
        level_cap: cap,
        truncated: !failed && limit < cap,
        per_level,
        thresholds_used,
        tolerance: options.tol,
    })
}
