//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). `CDI_ACCEPTANCE_ONLY=3,4`
//! restricts the run to some criteria; `CDI_ACCEPTANCE_STRICT=1` turns any
//! FAIL into a nonzero exit status. Without it the suite reports and exits 0,
//! so a criterion that is not met stays visible without hiding the rest of
//! the test run.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use cdi_cli::experiments::{derive_seed, flock_sweep, identifies, kmeans_seeded_opt, PoolSpec, SubjectPool};
use cdi_cli::config::Metric;
use cdi_cli::fit_power_law;
use cdi_core::cdi::{cdi, CdiResult, INFLUENCE_TOLERANCE};
use cdi_core::consensus::{convergence_rate, reachable_from_support, simulate, PerturbationVector, RateEvaluator};
use cdi_core::graph::{generate_er_outdegree, generate_knnr, generate_knnr_variable, Graph, OutDegree};
use cdi_core::matching::synthetic::SubjectParams;
use cdi_core::optimizer::{cdi_perturbation_opt, direct_baseline_opt, OptimizationResult};
use cdi_core::spectra::{left_eigs_with, MatrixKind, Solver};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative slack when comparing optimised rates that may coincide; it sits
/// at the optimiser's own termination tolerance.
const RATE_TIE: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Optimiser results gathered during criteria 3-6 for the invariant check.
#[derive(Default)]
struct Ledger {
    runs: Vec<(String, OptimizationResult)>,
}

impl Ledger {
    fn record(&mut self, label: String, r: &OptimizationResult) {
        self.runs.push((label, r.clone()));
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// The largest strongly connected component of a random draw.
fn core_of(g: Graph) -> Graph {
    let largest = g
        .strongly_connected_components()
        .into_iter()
        .max_by_key(Vec::len)
        .expect("nonempty graph");
    g.induced_subgraph(&largest)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_res, mut worst_gap, mut failures) = (0.0f64, 0.0f64, 0);
    let mut sizes = Vec::new();
    for i in 0..50u64 {
        let n = rng.random_range(10..=200);
        let k = rng.random_range(3..=8);
        let g = core_of(if i % 2 == 0 {
            generate_knnr(n, k, &[1.0, 1.0], i).unwrap()
        } else {
            generate_er_outdegree(n, OutDegree::Fixed(k.min(4)), i).unwrap()
        });
        assert!(g.is_strongly_connected() && g.n() >= 5, "component of {} vertices", g.n());
        sizes.push(g.n());
        let lap = g.laplacian();
        let dense = left_eigs_with(&g, MatrixKind::Laplacian, 1, Solver::Dense).unwrap();
        let iter = left_eigs_with(&g, MatrixKind::Laplacian, 1, Solver::Iterative).unwrap();
        let mut ok = true;
        for basis in [&dense, &iter] {
            let v = &basis.vectors[0];
            let res = lap.left_mul(v).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            worst_res = worst_res.max(res);
            ok &= res <= 1e-8 && v.iter().all(|&x| x > 0.0);
        }
        let gap = dense.vectors[0]
            .iter()
            .zip(&iter.vectors[0])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst_gap = worst_gap.max(gap);
        ok &= gap <= 1e-6;
        failures += usize::from(!ok);
    }
    outcome(
        failures == 0,
        format!("50 graphs (n {}..{}), failures {failures}, max |vL| {worst_res:.2e} (<= 1e-8), max solver gap {worst_gap:.2e} (<= 1e-6)", sizes.iter().min().unwrap(), sizes.iter().max().unwrap()),
    )
}

/// Members, ascending witnesses and the rank-1 argmax of one CDI run.
fn structural_faults(g: &Graph, r: &CdiResult) -> Vec<String> {
    let mut faults = Vec::new();
    let mut seen = vec![false; g.n()];
    for c in &r.communities {
        for &v in &c.members {
            if std::mem::replace(&mut seen[v], true) {
                faults.push(format!("vertex {v} in two communities"));
            }
        }
    }
    let v1 = r.coords.v1();
    let top = v1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !r.communities[0].members.iter().any(|&v| v1[v] >= top - INFLUENCE_TOLERANCE) {
        faults.push("rank-1 community misses argmax v1".into());
    }
    let s = r.coords.s();
    let level = |a: usize, b: usize| (s[a] - s[b]).abs() <= INFLUENCE_TOLERANCE;
    for c in &r.communities {
        for &v in &c.members {
            let Some(path) = r.witness_path(c.leader, v) else {
                faults.push(format!("no witness for {v}"));
                continue;
            };
            // a hop climbs strictly, or stays level inside the leader's plateau
            let ok = path[0] == v
                && *path.last().unwrap() == c.leader
                && path.windows(2).all(|w| {
                    g.weight(w[0], w[1]).is_some()
                        && (s[w[1]] > s[w[0]] || (level(w[0], c.leader) && level(w[1], c.leader)))
                });
            if !ok {
                faults.push(format!("bad witness for {v}: {path:?}"));
            }
        }
    }
    faults
}

/// Sorted member lists, relabelled, with each community's leader.
fn community_set(r: &CdiResult, relabel: impl Fn(usize) -> usize) -> BTreeMap<Vec<usize>, usize> {
    r.communities
        .iter()
        .map(|c| {
            let mut m: Vec<usize> = c.members.iter().map(|&v| relabel(v)).collect();
            m.sort_unstable();
            (m, relabel(c.leader))
        })
        .collect()
}

#[derive(PartialEq)]
enum Equivariance {
    Exact,
    /// Differences only where the tie rules had to fall back to labels:
    /// leaders with identical coordinates, or one plateau's representative.
    UpToTies,
    Broken,
}

fn rows_tied(r: &CdiResult, a: usize, b: usize) -> bool {
    r.coords.row(a).iter().zip(r.coords.row(b)).all(|(x, y)| (x - y).abs() <= INFLUENCE_TOLERANCE)
}

/// Unions of the member sets whose leaders share their coordinates.
fn merged_by_tied_leaders(r: &CdiResult, relabel: impl Fn(usize) -> usize) -> BTreeSet<Vec<usize>> {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for c in &r.communities {
        let members = c.members.iter().map(|&v| relabel(v));
        match groups.iter_mut().find(|(l, _)| rows_tied(r, *l, c.leader)) {
            Some((_, m)) => m.extend(members),
            None => groups.push((c.leader, members.collect())),
        }
    }
    groups
        .into_iter()
        .map(|(_, mut m)| {
            m.sort_unstable();
            m
        })
        .collect()
}

fn equivariance(r: &CdiResult, rp: &CdiResult, perm: &[usize]) -> Equivariance {
    let (a, b) = (community_set(r, |v| perm[v]), community_set(rp, |v| v));
    if a == b {
        return Equivariance::Exact;
    }
    if a.keys().eq(b.keys()) {
        // same communities, different representatives: fine only inside ties
        let ok = a.values().zip(b.values()).all(|(&la, &lb)| la == lb || rows_tied(rp, la, lb));
        return if ok { Equivariance::UpToTies } else { Equivariance::Broken };
    }
    if merged_by_tied_leaders(r, |v| perm[v]) == merged_by_tied_leaders(rp, |v| v) {
        Equivariance::UpToTies
    } else {
        Equivariance::Broken
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut structural, mut tied, mut broken, mut communities) = (0, 0, 0, 0);
    let mut first_fault = None;
    for i in 0..100u64 {
        let n = rng.random_range(50..=500);
        let g = if i % 2 == 0 {
            generate_knnr(n, rng.random_range(3..=10), &[1.0, 1.0], i).unwrap()
        } else {
            generate_er_outdegree(n, OutDegree::Uniform { min: 1, max: 4 }, i).unwrap()
        };
        let r = cdi(&g, 3, MatrixKind::Laplacian).unwrap();
        communities += r.communities.len();
        let faults = structural_faults(&g, &r);
        if !faults.is_empty() {
            structural += 1;
            first_fault.get_or_insert(faults[0].clone());
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let rp = cdi(&g.permuted(&perm).unwrap(), 3, MatrixKind::Laplacian).unwrap();
        match equivariance(&r, &rp, &perm) {
            Equivariance::Exact => {}
            Equivariance::UpToTies => tied += 1,
            Equivariance::Broken => broken += 1,
        }
    }
    let mut detail = format!(
        "100 graphs ({communities} communities), structural failures {structural}, relabellings exact {}, equal up to tie-broken leaders {tied}, broken {broken}",
        100 - tied - broken
    );
    if let Some(f) = first_fault {
        detail += &format!("; first fault: {f}");
    }
    outcome(structural == 0 && broken == 0, detail)
}

struct KnnrRun {
    seed: u64,
    lambda_y1: f64,
    cdi3: OptimizationResult,
}

fn knnr_runs(ledger: &mut Ledger) -> Vec<(Graph, KnnrRun)> {
    (1..=10u64)
        .map(|seed| {
            let g = generate_knnr(100, 10, &[1.0, 1.0], seed).unwrap();
            let y1 = cdi_perturbation_opt(&g, &cdi(&g, 1, MatrixKind::Laplacian).unwrap()).unwrap();
            let y3 = cdi_perturbation_opt(&g, &cdi(&g, 3, MatrixKind::Laplacian).unwrap()).unwrap();
            ledger.record(format!("knnr seed {seed} y=1"), &y1);
            ledger.record(format!("knnr seed {seed} y=3"), &y3);
            let run = KnnrRun {
                seed,
                lambda_y1: y1.lambda1,
                cdi3: y3,
            };
            (g, run)
        })
        .collect()
}

fn criterion_3(runs: &[(Graph, KnnrRun)]) -> Outcome {
    let y1: Vec<f64> = runs.iter().map(|(_, r)| r.lambda_y1).collect();
    let y3: Vec<f64> = runs.iter().map(|(_, r)| r.cdi3.lambda1).collect();
    let holds = y1.iter().zip(&y3).filter(|(a, b)| **b >= **a * (1.0 - RATE_TIE)).count();
    let (m1, m3) = (median(&y1), median(&y3));
    outcome(
        m3 >= m1 * (1.0 - RATE_TIE) && holds >= 7,
        format!("median lambda1 y=3 {m3:.6e} vs y=1 {m1:.6e}; y=3 >= y=1 on {holds}/10 seeds (need 7)"),
    )
}

fn criterion_4(runs: &[(Graph, KnnrRun)], ledger: &mut Ledger) -> Outcome {
    let ratios: Vec<f64> = runs
        .iter()
        .map(|(g, r)| {
            let direct = direct_baseline_opt(g, 3, r.seed).unwrap();
            ledger.record(format!("knnr seed {} direct", r.seed), &direct);
            r.cdi3.lambda1 / direct.lambda1
        })
        .collect();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let above = ratios.iter().filter(|&&x| x >= 1.0).count();
    let list: Vec<String> = ratios.iter().map(|x| format!("{x:.4}")).collect();
    outcome(
        min >= 0.9 && above >= 5,
        format!("ratios [{}]; min {min:.4} (>= 0.9), >= 1.0 on {above}/10 (need 5)", list.join(", ")),
    )
}

fn criterion_5(ledger: &mut Ledger) -> Outcome {
    let (mut cdi_ratios, mut kmeans_ratios) = (Vec::new(), Vec::new());
    for seed in 1..=10u64 {
        let g = generate_knnr_variable(100, 3, 10, &[1.0, 1.0], seed).unwrap();
        let found = cdi(&g, 3, MatrixKind::Laplacian).unwrap();
        let ours = cdi_perturbation_opt(&g, &found).unwrap();
        let kmeans = kmeans_seeded_opt(&g, &found, seed).unwrap();
        let direct = direct_baseline_opt(&g, 3, seed).unwrap();
        ledger.record(format!("variable-k seed {seed} cdi"), &ours);
        ledger.record(format!("variable-k seed {seed} kmeans"), &kmeans);
        ledger.record(format!("variable-k seed {seed} direct"), &direct);
        cdi_ratios.push(ours.lambda1 / direct.lambda1);
        kmeans_ratios.push(kmeans.lambda1 / direct.lambda1);
    }
    let (mc, mk) = (median(&cdi_ratios), median(&kmeans_ratios));
    outcome(
        mc >= mk,
        format!("median ratio cdi {mc:.4} vs k-means-seeded {mk:.4}"),
    )
}

fn criterion_6(ledger: &mut Ledger) -> Outcome {
    let ks = [5, 7, 15, 25, 50];
    let points = flock_sweep(1200, 0.2, &ks, 3, 1).unwrap();
    for p in &points {
        ledger.record(format!("flock k={}", p.k), &p.result);
    }
    let lambdas: Vec<f64> = points.iter().map(|p| p.lambda1).collect();
    let decreasing = lambdas.windows(2).all(|w| w[1] < w[0]);
    let fit = fit_power_law(&points.iter().map(|p| (p.k as f64, p.lambda1)).collect::<Vec<_>>()).unwrap();
    let list: Vec<String> = points.iter().map(|p| format!("k={} {:.4e}", p.k, p.lambda1)).collect();
    outcome(
        decreasing && (-0.4..=-0.05).contains(&fit.b) && fit.r2 >= 0.85,
        format!(
            "[{}]; strictly decreasing {decreasing}; fit a={:.4e} b={:.3} (in [-0.4, -0.05]) r2={:.3} (>= 0.85)",
            list.join(", "),
            fit.a,
            fit.b,
            fit.r2
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for i in 0..20u64 {
        let n = rng.random_range(5..=50);
        let g = if i % 2 == 0 {
            generate_knnr(n, rng.random_range(2..=4.min(n - 1)), &[1.0, 1.0], i).unwrap()
        } else {
            generate_er_outdegree(n, OutDegree::Uniform { min: 1, max: 3.min(n - 1) }, i).unwrap()
        };
        // one random vertex of every closed class, plus a few extra inputs
        let mut w = vec![0.0; n];
        for class in g.closed_classes() {
            w[*class.choose(&mut rng).unwrap()] = rng.random_range(0.1..1.0);
        }
        let extra = rng.random_range(0..=3.min(n));
        for v in rand::seq::index::sample(&mut rng, n, extra) {
            w[v] = rng.random_range(0.1..1.0);
        }
        assert!(reachable_from_support(&g, &w));
        let c = PerturbationVector::normalized(w).unwrap();
        let rate = convergence_rate(&g.laplacian(), &c).unwrap();
        let x0: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let t_end = 16.0 / rate;
        let tr = simulate(&g, &c, 1.0, &x0, t_end / 400.0, t_end).unwrap();
        let slope = tr.decay_slope(t_end - std::f64::consts::LN_10 / rate, 1e-13);
        let err = slope.map_or(f64::INFINITY, |s| (s + rate).abs() / rate);
        worst = worst.max(err);
        failures += usize::from(err > 0.1);
    }
    outcome(
        failures == 0,
        format!("20 systems, failures {failures}, worst relative slope error {worst:.2e} (<= 0.1)"),
    )
}

/// Best rate over the simplex grid of step `1/steps` on `support`.
fn grid_best(g: &Graph, support: &[usize], steps: usize) -> f64 {
    fn walk(ev: &mut RateEvaluator, support: &[usize], c: &mut Vec<f64>, at: usize, left: usize, steps: usize, best: &mut f64) {
        if at + 1 == support.len() {
            c[support[at]] = left as f64 / steps as f64;
            *best = best.max(ev.rate(c).unwrap());
            return;
        }
        for take in 0..=left {
            c[support[at]] = take as f64 / steps as f64;
            walk(ev, support, c, at + 1, left - take, steps, best);
        }
    }
    let mut ev = RateEvaluator::new(&g.laplacian());
    let mut best = 0.0;
    walk(&mut ev, support, &mut vec![0.0; g.n()], 0, steps, steps, &mut best);
    best
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    let mut supports = Vec::new();
    for i in 0..10u64 {
        let n = rng.random_range(4..=8);
        let g = generate_er_outdegree(n, OutDegree::Uniform { min: 1, max: 3 }, derive_seed(808, &[i])).unwrap();
        let found = cdi(&g, 3, MatrixKind::Laplacian).unwrap();
        let ours = cdi_perturbation_opt(&g, &found).unwrap().lambda1;
        let leaders = found.leaders();
        supports.push(leaders.len());
        let grid = grid_best(&g, &leaders, 50);
        let excess = grid / ours - 1.0;
        worst = worst.max(excess);
        failures += usize::from(excess > 0.02);
    }
    outcome(
        failures == 0,
        format!("10 graphs (leader supports {supports:?}), failures {failures}, worst grid excess {:+.3}% (<= 2%)", 100.0 * worst),
    )
}

fn criterion_9() -> Outcome {
    let spec = PoolSpec {
        subjects: 10,
        params: SubjectParams::default(),
        jitter: 0.2,
        dropout: 0.05,
        heavy_subject: Some(3),
        heavy_dropout: 0.3,
        vectors: 8,
        entry_threshold: 0.01,
        seed: 1,
    };
    let pool = SubjectPool::build(&spec).unwrap();
    let sizes: Vec<usize> = pool.first.iter().map(|s| s.graph.n()).collect();
    let ours = pool.matrix(Metric::Cdi).unwrap();
    let edit = pool.matrix(Metric::Edit).unwrap();
    let identified = (0..10).filter(|&i| identifies(&ours, i, true)).count();
    let edit_identified = (0..10).filter(|&i| identifies(&edit, i, false)).count();
    let edit_misses_heavy = !identifies(&edit, 3, false);
    outcome(
        identified == 10 && edit_misses_heavy,
        format!(
            "scan sizes {}..{}; matching identifies {identified}/10; edit distance identifies {edit_identified}/10, misses heavy-dropout subject: {edit_misses_heavy}",
            sizes.iter().min().unwrap(),
            sizes.iter().max().unwrap()
        ),
    )
}

fn criterion_10(ledger: &Ledger) -> Outcome {
    let mut faults = Vec::new();
    for (label, r) in &ledger.runs {
        let c = r.c.as_slice();
        let sum: f64 = c.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            faults.push(format!("{label}: sum {sum}"));
        }
        if c.iter().any(|&x| x < 0.0) {
            faults.push(format!("{label}: negative entry"));
        }
        if r.lambda_history.windows(2).any(|w| w[1] * 1.001 < w[0]) {
            faults.push(format!("{label}: accepted level fell {:?}", r.lambda_history));
        }
    }
    let mut detail = format!("{} optimiser runs checked, violations {}", ledger.runs.len(), faults.len());
    if let Some(f) = faults.first() {
        detail += &format!("; first: {f}");
    }
    outcome(!ledger.runs.is_empty() && faults.is_empty(), detail)
}

fn main() {
    let only: Option<BTreeSet<usize>> = std::env::var("CDI_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |i: usize| only.as_ref().is_none_or(|set| set.contains(&i));
    let strict = std::env::var("CDI_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let names = [
        "spectral correctness",
        "CDI structure",
        "eigenvector count",
        "speed ratio vs direct optimiser",
        "variable-outdegree advantage",
        "flock power law",
        "rate/trajectory consistency",
        "optimiser oracle dominance",
        "synthetic identification",
        "budget/acceptance invariants",
    ];
    let mut ledger = Ledger::default();
    let mut knnr: Option<Vec<(Graph, KnnrRun)>> = None;
    let mut results = Vec::new();
    for id in 1..=10 {
        if !wanted(id) {
            continue;
        }
        let start = Instant::now();
        let out = match id {
            1 => criterion_1(),
            2 => criterion_2(),
            3 | 4 => {
                let runs = knnr.get_or_insert_with(|| knnr_runs(&mut ledger));
                if id == 3 {
                    criterion_3(runs)
                } else {
                    criterion_4(runs, &mut ledger)
                }
            }
            5 => criterion_5(&mut ledger),
            6 => criterion_6(&mut ledger),
            7 => criterion_7(),
            8 => criterion_8(),
            9 => criterion_9(),
            _ => criterion_10(&ledger),
        };
        println!(
            "criterion {id:>2} {:<32} {} ({:.1}s): {}",
            names[id - 1],
            if out.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            out.detail
        );
        results.push(out.pass);
    }
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
