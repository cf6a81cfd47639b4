//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so every criterion reports even when an
//! earlier one fails. Exits nonzero if any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kcge::classifier::{classify, is_k_cge, ClassifyOptions};
use kcge::disentangler::{build_disentangling_unitary, free_party_residual, two_depth_decompose};
use kcge::linalg::random_state;
use kcge::network::{algorithm1, cross_check, NetworkGraph, CROSS_CHECK_MAX_DIM};
use kcge::tensor::unitarity_deviation;
use kcge::witness::{fig4_curves, radius_ghz, radius_w4, w4_theta_coefficients, werner_visibility_threshold};
use kcge::zoo::{dicke, dicke_cge_formula, ghz, is_exact_power, network_joint_state_epr, w_type};
use kcge::{CMatrix, KcgeError, PartySubset, PureState, Tolerance, C64};

const UNITARITY_TOL: f64 = 1e-9;
const FIDELITY_TOL: f64 = 1e-9;
const RECONSTRUCTION_TOL: f64 = 1e-9;
const WITNESS_TOL: f64 = 1e-12;

type Outcome = std::result::Result<String, String>;

struct Criterion {
    id: &'static str,
    title: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn level(s: &PureState) -> std::result::Result<usize, String> {
    classify(s, &ClassifyOptions::default()).map(|r| r.max_cge_level).map_err(|e| e.to_string())
}

fn product(parts: &[PureState]) -> PureState {
    let mut dims = Vec::new();
    let mut amps = vec![C64::new(1.0, 0.0)];
    for p in parts {
        dims.extend_from_slice(p.dims());
        amps = amps.iter().flat_map(|x| p.amplitudes().iter().map(move |y| x * y)).collect();
    }
    PureState::from_unnormalized(dims, amps).unwrap()
}

/// Random state that is, half the time, a product of two random blocks with shuffled parties.
fn structured_state(dims: &[usize], rng: &mut ChaCha8Rng) -> PureState {
    if dims.len() < 3 || rng.random_bool(0.5) {
        return random_state(dims, rng).unwrap();
    }
    let split = rng.random_range(1..dims.len());
    let s = product(&[random_state(&dims[..split], rng).unwrap(), random_state(&dims[split..], rng).unwrap()]);
    let mut order: Vec<usize> = (0..dims.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    s.permuted(&order).unwrap()
}

/// Reduced density matrix of `keep` by direct index summation.
fn reduced(state: &PureState, keep: &[usize]) -> CMatrix {
    let dims = state.dims();
    let n = dims.len();
    let rest: Vec<usize> = (0..n).filter(|p| !keep.contains(p)).collect();
    let kd: usize = keep.iter().map(|&p| dims[p]).product();
    let rd: usize = rest.iter().map(|&p| dims[p]).product();
    let flat = |kx: usize, rx: usize| {
        let mut digits = vec![0; n];
        let mut x = kx;
        for &p in keep.iter().rev() {
            digits[p] = x % dims[p];
            x /= dims[p];
        }
        let mut x = rx;
        for &p in rest.iter().rev() {
            digits[p] = x % dims[p];
            x /= dims[p];
        }
        digits.iter().zip(dims).fold(0, |acc, (d, dim)| acc * dim + d)
    };
    let amps = state.amplitudes();
    CMatrix::from_fn(kd, kd, |a, b| (0..rd).map(|r| amps[flat(a, r)] * amps[flat(b, r)].conj()).sum())
}

fn gram_rank(state: &PureState, keep: &[usize]) -> usize {
    let ev = SymmetricEigen::new(reduced(state, keep)).eigenvalues;
    let top = ev.iter().copied().fold(0.0, f64::max);
    ev.iter().filter(|&&l| l > 1e-12 * top).count()
}

/// Qubit level by enumerating every subset and comparing Gram ranks with `2^{k-1}`.
fn oracle_level(state: &PureState) -> usize {
    let n = state.n();
    let mut level = 0;
    for k in 1..=n / 2 {
        let all_high = (0..1usize << n)
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect::<Vec<_>>())
            .all(|s| gram_rank(state, &s) > 1 << (k - 1));
        if !all_high {
            break;
        }
        level = k;
    }
    level
}

fn ac1() -> Outcome {
    let h = FRAC_1_SQRT_2;
    let third = (1.0f64 / 3.0).sqrt();
    let mut cases = Vec::new();
    for n in 3..=6 {
        cases.push((n, 2, ghz(n, 2, &[h, h]).unwrap()));
    }
    for n in 3..=4 {
        cases.push((n, 3, ghz(n, 3, &[third, third, third]).unwrap()));
    }
    for (n, d, s) in &cases {
        let l = level(s)?;
        ensure(l == 1, || format!("ghz(n={n}, d={d}) classified {l}, expected 1"))?;
    }
    Ok(format!("{} GHZ states all at level 1", cases.len()))
}

fn ac2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC02);
    for draw in 0..10 {
        let a: Vec<f64> = (0..5)
            .map(|_| {
                let x: f64 = rng.random_range(0.1..1.0);
                if rng.random_bool(0.5) {
                    -x
                } else {
                    x
                }
            })
            .collect();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a: Vec<f64> = a.iter().map(|x| x / norm).collect();
        let l = level(&w_type(4, &a).unwrap())?;
        ensure(l == 2, || format!("draw {draw} with coefficients {a:?} classified {l}, expected 2"))?;
    }
    Ok("10 random W4 states all at level 2".into())
}

fn ac3() -> Outcome {
    let mut grid = Vec::new();
    for n in 2..=8 {
        for s in 1..n {
            grid.push((n, 2, s));
        }
    }
    for n in 2..=5 {
        for s in 1..2 * n {
            grid.push((n, 3, s));
        }
    }
    let mut flagged = Vec::new();
    let mut unexplained = Vec::new();
    for &(n, d, s) in &grid {
        let got = level(&dicke(n, d, s).unwrap())?;
        let formula = dicke_cge_formula(d, s).map_err(|e| e.to_string())?;
        if got != formula {
            let entry = format!("(n={n},d={d},s={s}: classifier {got}, formula {formula})");
            if is_exact_power(d, s) {
                flagged.push(entry);
            } else {
                unexplained.push(entry);
            }
        }
    }
    println!("    AC-3 grid size {}", grid.len());
    println!("    AC-3 exact-power discrepancies detected ({}): {}", flagged.len(), flagged.join(" "));
    println!("    AC-3 discrepancies outside the exact-power set ({}): {}", unexplained.len(), unexplained.join(" "));
    if unexplained.is_empty() {
        Ok(format!("{} cases; {} exact-power discrepancies reported", grid.len(), flagged.len()))
    } else {
        Err(format!(
            "{} of {} cases disagree with floor(log_d(s+1))+1 outside the exact-power set",
            unexplained.len(),
            grid.len()
        ))
    }
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC04);
    let tol = Tolerance::default();
    let mut levels = [0usize; 4];
    for i in 0..1000 {
        let n = rng.random_range(2..=6);
        let s = structured_state(&vec![2; n], &mut rng);
        let r = classify(&s, &ClassifyOptions::default()).map_err(|e| e.to_string())?;
        ensure(r.max_cge_level <= n / 2, || format!("state {i}: level {} above cap {}", r.max_cge_level, n / 2))?;
        let mut failed_before = false;
        for k in 1..=n / 2 {
            let holds = is_k_cge(&s, k, &tol).map_err(|e| e.to_string())?.is_cge;
            ensure(!(failed_before && holds), || format!("state {i}: {k}-CGE holds after a lower level failed"))?;
            ensure(holds == (k <= r.max_cge_level), || format!("state {i}: level {k} disagrees with report"))?;
            failed_before |= !holds;
        }
        levels[r.max_cge_level] += 1;
    }
    Ok(format!("1000 states, level histogram {levels:?}"))
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC05);
    let tol = Tolerance::default();
    let (mut valid, mut refused) = (0, 0);
    while valid < 200 {
        let n = rng.random_range(2..=5);
        let dims: Vec<usize> = (0..n).map(|_| rng.random_range(2..=3)).collect();
        let s = structured_state(&dims, &mut rng);
        let dims = s.dims().to_vec();
        let size = rng.random_range(1..n);
        let mut parties: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            parties.swap(i, rng.random_range(0..=i));
        }
        let mut members = parties[..size].to_vec();
        members.sort_unstable();
        let free = members[rng.random_range(0..size)];
        let cut_dim: usize = members.iter().map(|&p| dims[p]).product();
        let exists = gram_rank(&s, &members) * dims[free] <= cut_dim;
        let cut = PartySubset::cut(members.clone(), n).unwrap();
        match build_disentangling_unitary(&s, &cut, free, &tol) {
            Ok(u) => {
                ensure(exists, || format!("built a unitary for {members:?} although the oracle rank is too high"))?;
                let dev = unitarity_deviation(&u.unitary);
                ensure(dev < UNITARITY_TOL, || format!("unitarity deviation {dev:e} on cut {members:?}"))?;
                let out = u.apply(&s).map_err(|e| e.to_string())?;
                let residual = free_party_residual(&out, free).map_err(|e| e.to_string())?;
                ensure(residual <= FIDELITY_TOL, || format!("party {free} freed only to fidelity {}", 1.0 - residual))?;
                valid += 1;
            }
            Err(KcgeError::NotDisentanglable { .. }) => {
                ensure(!exists, || format!("refused cut {members:?} although the oracle admits it"))?;
                refused += 1;
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = rng.random_range(2..=5);
        let dims: Vec<usize> = (0..n).map(|_| rng.random_range(2..=3)).collect();
        let s = random_state(&dims, &mut rng).unwrap();
        let t = two_depth_decompose(&s, &tol).map_err(|e| format!("state {i} dims {dims:?}: {e}"))?;
        let err = t.compose(&dims).map_err(|e| e.to_string())?.max_abs_diff(&s);
        ensure(err < RECONSTRUCTION_TOL, || format!("state {i} dims {dims:?}: reconstruction error {err:e}"))?;
        worst = worst.max(err);
    }
    Ok(format!("200 disentangled ({refused} invalid cuts correctly refused); 100 two-depth, worst error {worst:.1e}"))
}

fn ac6() -> Outcome {
    let h = FRAC_1_SQRT_2;
    let r = radius_ghz(&[h, h]).map_err(|e| e.to_string())?;
    ensure(r == 0.5, || format!("radius_ghz = {r:?}, expected exactly 0.5"))?;
    let r2 = radius_w4(2, &w4_theta_coefficients(FRAC_PI_4)).map_err(|e| e.to_string())?;
    ensure((r2 - 0.75).abs() < WITNESS_TOL, || format!("level-2 radius at pi/4 = {r2}"))?;
    let v = werner_visibility_threshold(r2, 16).map_err(|e| e.to_string())?;
    ensure((v - 13.0 / 17.0).abs() < WITNESS_TOL, || format!("Werner threshold {v}, expected 13/17"))?;
    // caption formulas with cos^2 evaluated by hand: 3/4, 1/2, 1/4
    let expected = [
        (FRAC_PI_6, 3.0 / 4.0, 3.0 / 8.0),
        (FRAC_PI_4, 3.0 / 4.0, 1.0 / 2.0),
        (FRAC_PI_3, 7.0 / 8.0, 3.0 / 4.0),
    ];
    let rows = fig4_curves(&expected.map(|e| e.0)).map_err(|e| e.to_string())?;
    for (row, (theta, r2, r1)) in rows.iter().zip(expected) {
        let vis = |r: f64| (16.0 * r + 1.0) / 17.0;
        let diffs = [row.r2 - r2, row.r1 - r1, row.v2 - vis(r2), row.v1 - vis(r1)];
        ensure(diffs.iter().all(|d| d.abs() < WITNESS_TOL), || format!("fig4 at theta={theta}: {row:?}"))?;
    }
    Ok("GHZ radius 0.5, W4 radius 0.75, threshold 13/17, three fig4 rows".into())
}

fn ac7() -> Outcome {
    for (name, g) in [
        ("chain4", NetworkGraph::chain(4)),
        ("star5", NetworkGraph::star(5)),
        ("cycle4", NetworkGraph::cycle(4)),
    ] {
        let g = g.map_err(|e| e.to_string())?;
        let bound = algorithm1(&g).map_err(|e| e.to_string())?.cge_upper_bound;
        ensure(bound == 1, || format!("{name}: bound {bound}, expected 1"))?;
    }
    let k4 = NetworkGraph::complete(4).map_err(|e| e.to_string())?;
    let cc = cross_check(&k4, None, &ClassifyOptions::default(), CROSS_CHECK_MAX_DIM).map_err(|e| e.to_string())?;
    ensure(cc.classifier_level == 2 && cc.consistent, || format!("K4 cross-check {cc:?}"))?;

    let k6 = NetworkGraph::complete(6).map_err(|e| e.to_string())?;
    let bound = algorithm1(&k6).map_err(|e| e.to_string())?.cge_upper_bound;
    ensure(matches!(network_joint_state_epr(&k6), Err(KcgeError::BudgetExceeded(_))), || {
        "K6 joint state was not refused".into()
    })?;
    let dir = std::env::temp_dir().join(format!("kcge-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let graph = dir.join("k6.json");
    let pairs: Vec<String> = (0..6).flat_map(|a| (a + 1..6).map(move |b| format!("[{a},{b}]"))).collect();
    std::fs::write(&graph, format!("{{\"n\":6,\"edges\":[{}]}}", pairs.join(","))).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_kcge"))
        .args(["network", "--graph", graph.to_str().unwrap(), "--cross-check"])
        .output()
        .map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    ensure(out.status.code() == Some(3), || format!("K6 cross-check exited with {:?}, expected 3", out.status.code()))?;
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| format!("K6 report: {e}"))?;
    ensure(printed["cge_upper_bound"] == bound, || format!("K6 printed report {printed}"))?;
    Ok(format!("chain4/star5/cycle4 bound 1; K4 classifier level 2; K6 refused (exit 3) with bound {bound}"))
}

fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = FRAC_1_SQRT_2;
    let epr = ghz(2, 2, &[h, h]).unwrap();
    let mut corpus = vec![
        ghz(3, 2, &[h, h]).unwrap(),
        ghz(4, 2, &[0.6, 0.8]).unwrap(),
        w_type(3, &[0.5, 0.5, 0.5, 0.5]).unwrap(),
        w_type(4, &[0.4, 0.4, 0.4, 0.4, 0.6]).unwrap(),
        w_type(4, &[0.5, 0.5, 0.5, 0.5, 0.0]).unwrap(),
        dicke(4, 2, 2).unwrap(),
        dicke(3, 2, 1).unwrap(),
        PureState::zero(vec![2; 4]).unwrap(),
        product(&[epr.clone(), epr.clone()]),
        product(&[epr.clone(), epr]).permuted(&[0, 2, 1, 3]).unwrap(),
    ];
    while corpus.len() < 50 {
        let n = rng.random_range(3..=4);
        corpus.push(structured_state(&vec![2; n], &mut rng));
    }
    let mut levels = [0usize; 3];
    for (i, s) in corpus.iter().enumerate() {
        let (got, want) = (level(s)?, oracle_level(s));
        ensure(got == want, || format!("corpus entry {i} (n={}): classifier {got}, oracle {want}", s.n()))?;
        levels[got] += 1;
    }
    Ok(format!("50 states agree with the Gram oracle, level histogram {levels:?}"))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: "AC-1", title: "GHZ family is 1-CGE", limit: Duration::from_secs(5), run: ac1 },
        Criterion { id: "AC-2", title: "W4 with nonzero coefficients is 2-CGE", limit: Duration::from_secs(5), run: ac2 },
        Criterion { id: "AC-3", title: "Dicke levels follow the counting formula", limit: Duration::from_secs(60), run: ac3 },
        Criterion { id: "AC-4", title: "level cap and hierarchy on random states", limit: Duration::from_secs(120), run: ac4 },
        Criterion { id: "AC-5", title: "disentangler and two-depth round trips", limit: Duration::from_secs(60), run: ac5 },
        Criterion { id: "AC-6", title: "witness radii, Werner threshold, fig4", limit: Duration::from_secs(1), run: ac6 },
        Criterion { id: "AC-7", title: "network corpus bounds and budget refusal", limit: Duration::from_secs(120), run: ac7 },
        Criterion { id: "AC-8", title: "classifier agrees with the Gram oracle", limit: Duration::from_secs(30), run: ac8 },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > c.limit => Err(format!("{detail}; over the time limit")),
            other => other,
        };
        let timing = format!("{:.2}s / {}s", took.as_secs_f64(), c.limit.as_secs());
        match outcome {
            Ok(detail) => println!("[PASS] {} {} ({timing}): {detail}", c.id, c.title),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {} {} ({timing}): {why}", c.id, c.title);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
