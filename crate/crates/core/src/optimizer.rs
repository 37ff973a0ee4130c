//! Perturbation optimisation seeded by influence communities.
//!
//! Two stages. Leader optimisation spreads the budget over the most
//! influential vertex (largest first-eigenvector entry) of each community,
//! numerically maximises the convergence rate, and discards communities whose
//! leader is driven to zero. The mixture stage then builds one input vector per
//! surviving community (its first-eigenvector entries), sharpens each with a
//! power transform, mixes them with inverse weights, and grows, tunes and
//! prunes that mixture under a 1.001 acceptance factor.
//!
//! All searches use a bounded Nelder-Mead simplex; powers and weights are
//! searched in log space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cdi::{CdiResult, Community};
use crate::consensus::{convergence_rate, PerturbationVector, RateEvaluator};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectra::{left_eigs, MatrixKind};

/// Options for [`numeric_maximize_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    /// Objective evaluations allowed before returning the best iterate.
    pub max_evaluations: usize,
    /// Simplex diameter (max-norm) at which the search stops.
    pub xatol: f64,
    /// Spread of simplex values at which the search stops.
    pub fatol: f64,
    /// Initial simplex edge along axis `i` is `initial_step * max(|x0_i|, 1)`.
    pub initial_step: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 5000,
            xatol: 1e-8,
            fatol: 1e-8,
            initial_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
}

/// Maximises `objective` over the box `bounds` from `x0` with default options.
pub fn numeric_maximize<F>(objective: F, x0: &[f64], bounds: &[(f64, f64)]) -> Result<SearchResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    numeric_maximize_with(objective, x0, bounds, &SearchOptions::default())
}

/// Nelder-Mead maximisation with trial points projected onto the box.
///
/// Deterministic given `x0`. The incumbent best vertex is only displaced by a
/// strictly better point, so a flat objective returns `x0` unchanged.
pub fn numeric_maximize_with<F>(
    mut objective: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &SearchOptions,
) -> Result<SearchResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let d = x0.len();
    if bounds.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bounds.len(),
        });
    }
    if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::InvalidArgument(format!("empty bound [{lo}, {hi}]")));
    }
    let clip = |x: &mut Vec<f64>| {
        for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(*lo, *hi);
        }
    };
    // minimise the negated objective
    let mut eval = |x: &[f64]| -> Result<f64> {
        let v = objective(x)?;
        if !v.is_finite() {
            return Err(Error::Numerical(format!("objective returned {v} at {x:?}")));
        }
        Ok(-v)
    };

    let mut start = x0.to_vec();
    clip(&mut start);
    let f0 = eval(&start)?;
    if d == 0 {
        return Ok(SearchResult {
            x: start,
            value: -f0,
            evaluations: 1,
            converged: true,
        });
    }
    let mut sim = vec![start.clone()];
    let mut fs = vec![f0];
    for k in 0..d {
        let step = opts.initial_step * start[k].abs().max(1.0);
        let mut y = start.clone();
        y[k] += step;
        if y[k] > bounds[k].1 {
            y[k] = start[k] - step;
        }
        clip(&mut y);
        fs.push(eval(&y)?);
        sim.push(y);
    }

    let (rho, chi, psi, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    let mut used = d + 1;
    loop {
        // stable sort keeps earlier vertices ahead on ties
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        sim = order.iter().map(|&i| sim[i].clone()).collect();
        fs = order.iter().map(|&i| fs[i]).collect();

        let diameter = sim[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&sim[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = fs[1..].iter().map(|f| (f - fs[0]).abs()).fold(0.0, f64::max);
        if diameter <= opts.xatol && spread <= opts.fatol {
            converged = true;
            break;
        }
        if used >= opts.max_evaluations {
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|k| sim[..d].iter().map(|p| p[k]).sum::<f64>() / d as f64)
            .collect();
        let worst = sim[d].clone();
        let toward = |t: f64| {
            let mut y: Vec<f64> = (0..d).map(|k| centroid[k] + t * (centroid[k] - worst[k])).collect();
            clip(&mut y);
            y
        };

        let xr = toward(rho);
        let fr = eval(&xr)?;
        used += 1;
        let mut shrink = false;
        if fr < fs[0] {
            let xe = toward(rho * chi);
            let fe = eval(&xe)?;
            used += 1;
            if fe < fr {
                sim[d] = xe;
                fs[d] = fe;
            } else {
                sim[d] = xr;
                fs[d] = fr;
            }
        } else if fr < fs[d - 1] {
            sim[d] = xr;
            fs[d] = fr;
        } else if fr < fs[d] {
            let xc = toward(psi * rho);
            let fc = eval(&xc)?;
            used += 1;
            if fc <= fr {
                sim[d] = xc;
                fs[d] = fc;
            } else {
                shrink = true;
            }
        } else {
            let xcc = toward(-psi);
            let fcc = eval(&xcc)?;
            used += 1;
            if fcc < fs[d] {
                sim[d] = xcc;
                fs[d] = fcc;
            } else {
                shrink = true;
            }
        }
        if shrink {
            for j in 1..=d {
                let mut y: Vec<f64> = (0..d).map(|k| sim[0][k] + sigma * (sim[j][k] - sim[0][k])).collect();
                clip(&mut y);
                fs[j] = eval(&y)?;
                sim[j] = y;
                used += 1;
            }
        }
    }
    Ok(SearchResult {
        x: sim.swap_remove(0),
        value: -fs[0],
        evaluations: used,
        converged,
    })
}

/// `p_i = w_i^eta / sum_j w_j^eta`, evaluated in log space so large powers
/// neither overflow nor underflow to an all-zero vector.
pub fn power_transform(omega: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidArgument(format!("power must be positive, got {eta}")));
    }
    if omega.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("input vector must be finite and nonnegative".into()));
    }
    let logs: Vec<f64> = omega
        .iter()
        .map(|&w| if w > 0.0 { eta * w.ln() } else { f64::NEG_INFINITY })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("input vector has no positive entry".into()));
    }
    let mut p: Vec<f64> = logs.iter().map(|&l| (l - top).exp()).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    Ok(p)
}

/// `c = (sum_j p_j / r_j) / (sum_j 1 / r_j)`. An infinite `r_j` drops `p_j`.
pub fn combine(p_list: &[Vec<f64>], r: &[f64]) -> Result<PerturbationVector> {
    if p_list.is_empty() {
        return Err(Error::InvalidArgument("nothing to combine".into()));
    }
    if r.len() != p_list.len() {
        return Err(Error::DimensionMismatch {
            expected: p_list.len(),
            found: r.len(),
        });
    }
    let n = p_list[0].len();
    if p_list.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidArgument("input vectors differ in length".into()));
    }
    if r.iter().any(|x| x.is_nan() || *x <= 0.0) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    let w: Vec<f64> = r.iter().map(|x| x.recip()).collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("every input vector was dropped".into()));
    }
    let c = (0..n)
        .map(|i| p_list.iter().zip(&w).map(|(p, wj)| wj * p[i]).sum::<f64>() / total)
        .collect();
    PerturbationVector::new(c)
}

/// Optimiser knobs shared by both stages.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    /// Evaluation budget of each individual search.
    pub max_evaluations: usize,
    /// A step is kept when `rate * acceptance >= Lambda`.
    pub acceptance: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 5000,
            acceptance: 1.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OptimizationResult {
    pub c: PerturbationVector,
    pub lambda1: f64,
    /// Ranks of the communities whose input survived.
    pub active_communities: Vec<usize>,
    pub evaluations: usize,
    /// False when some search exhausted its budget.
    pub converged: bool,
    /// The accepted objective level after each accepted step, in order.
    #[serde(skip)]
    pub lambda_history: Vec<f64>,
}

impl OptimizationResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serialisable")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderOptResult {
    /// Surviving communities, in rank order.
    pub communities: Vec<Community>,
    /// Largest first-eigenvector vertex of each surviving community.
    pub leaders: Vec<usize>,
    /// Optimised allocation (zero off the surviving leaders).
    pub p: PerturbationVector,
    pub lambda1: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Optimisation rounds run; each but the last eliminated a leader.
    pub rounds: usize,
}

const LOG_ETA_BOUNDS: (f64, f64) = (-12.0, 12.0);
const LOG_R_BOUNDS: (f64, f64) = (-30.0, 30.0);
const LOG_STEP: f64 = 0.5;
const LEADER_STEP: f64 = 0.1;

/// Search bookkeeping over one rate evaluator.
struct Session<'a> {
    ev: &'a mut RateEvaluator,
    opts: &'a OptimizerOptions,
    evaluations: usize,
    converged: bool,
}

impl<'a> Session<'a> {
    fn new(ev: &'a mut RateEvaluator, opts: &'a OptimizerOptions) -> Self {
        Self {
            ev,
            opts,
            evaluations: 0,
            converged: true,
        }
    }

    fn rate(&mut self, c: &PerturbationVector) -> Result<f64> {
        self.evaluations += 1;
        self.ev.rate(c.as_slice())
    }

    fn maximize<B>(&mut self, x0: &[f64], bounds: &[(f64, f64)], step: f64, build: B) -> Result<SearchResult>
    where
        B: Fn(&[f64]) -> Result<Option<PerturbationVector>>,
    {
        let ev = &mut *self.ev;
        let search = SearchOptions {
            max_evaluations: self.opts.max_evaluations,
            initial_step: step,
            ..SearchOptions::default()
        };
        let res = numeric_maximize_with(
            |x| match build(x)? {
                Some(c) => ev.rate(c.as_slice()),
                None => Ok(0.0),
            },
            x0,
            bounds,
            &search,
        )?;
        self.evaluations += res.evaluations;
        self.converged &= res.converged;
        Ok(res)
    }
}

/// Unit-sum allocation over `vertices` proportional to `max(x, 0)`; `None`
/// when nothing is positive.
fn leader_allocation(n: usize, vertices: &[usize], x: &[f64]) -> Result<Option<PerturbationVector>> {
    let mut c = vec![0.0; n];
    for (&v, &w) in vertices.iter().zip(x) {
        c[v] = w.max(0.0);
    }
    if c.iter().all(|&w| w == 0.0) {
        return Ok(None);
    }
    PerturbationVector::normalized(c).map(Some)
}

fn argmax_v1(members: &[usize], v1: &[f64]) -> usize {
    members
        .iter()
        .copied()
        .reduce(|a, b| if v1[b] > v1[a] { b } else { a })
        .expect("community has members")
}

fn leader_stage(
    session: &mut Session,
    n: usize,
    communities: &[Community],
    v1: &[f64],
) -> Result<LeaderOptResult> {
    if communities.is_empty() {
        return Err(Error::InvalidArgument("no communities to optimise".into()));
    }
    let mut ranked: Vec<(Community, usize)> = communities
        .iter()
        .map(|c| (c.clone(), argmax_v1(&c.members, v1)))
        .collect();
    ranked.sort_by(|a, b| v1[b.1].total_cmp(&v1[a.1]).then(a.0.rank.cmp(&b.0.rank)));

    let m = ranked.len();
    let harmonic: f64 = (1..=m).map(|i| 1.0 / i as f64).sum();
    let mut alive: Vec<usize> = (0..m).collect();
    let mut x: Vec<f64> = (1..=m).map(|i| 1.0 / (i as f64 * harmonic)).collect();
    let mut rounds = 0;
    let mut lambda;
    // each round either terminates or removes at least one leader
    loop {
        rounds += 1;
        let leaders: Vec<usize> = alive.iter().map(|&i| ranked[i].1).collect();
        if alive.len() == 1 {
            x = vec![1.0];
            let c = leader_allocation(n, &leaders, &x)?.expect("positive");
            lambda = session.rate(&c)?;
            break;
        }
        let bounds = vec![(-1.0, 1.0); alive.len()];
        let res = session.maximize(&x, &bounds, LEADER_STEP, |x| leader_allocation(n, &leaders, x))?;
        lambda = res.value;
        let keep: Vec<bool> = res.x.iter().map(|&w| w > 0.0).collect();
        if keep.iter().all(|&k| k) || keep.iter().all(|&k| !k) || rounds >= m {
            x = res.x;
            break;
        }
        let mass: f64 = res.x.iter().filter(|w| **w > 0.0).sum();
        x = res.x.iter().filter(|w| **w > 0.0).map(|w| w / mass).collect();
        alive = alive.iter().zip(&keep).filter(|(_, &k)| k).map(|(&i, _)| i).collect();
    }
    let leaders: Vec<usize> = alive.iter().map(|&i| ranked[i].1).collect();
    let p = match leader_allocation(n, &leaders, &x)? {
        Some(p) => p,
        None => PerturbationVector::uniform_on(n, &leaders)?,
    };
    Ok(LeaderOptResult {
        communities: alive.iter().map(|&i| ranked[i].0.clone()).collect(),
        leaders,
        p,
        lambda1: lambda,
        evaluations: session.evaluations,
        converged: session.converged,
        rounds,
    })
}

/// Community leader optimisation on a detection result.
pub fn leader_opt(g: &Graph, cdi: &CdiResult) -> Result<LeaderOptResult> {
    let mut ev = RateEvaluator::new(&g.laplacian());
    let opts = OptimizerOptions::default();
    let mut session = Session::new(&mut ev, &opts);
    leader_stage(&mut session, g.n(), &cdi.communities, &cdi.coords.v1())
}

/// Input vector of a community: first-eigenvector entries on its members
/// (negative entries clipped). A community whose entries are all zero gets a
/// unit mass on its strongest vertex instead.
fn community_input(n: usize, community: &Community, v1: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for &v in &community.members {
        w[v] = v1[v].max(0.0);
    }
    if w.iter().all(|&x| x == 0.0) {
        w[argmax_v1(&community.members, v1)] = 1.0;
    }
    w
}

/// Mixture from per-vector log powers and log weights (`+inf` drops a vector).
fn mixture(omegas: &[Vec<f64>], log_eta: &[f64], log_r: &[f64]) -> Result<PerturbationVector> {
    let mut p_list = Vec::with_capacity(omegas.len());
    let mut r = Vec::with_capacity(omegas.len());
    for ((w, le), lr) in omegas.iter().zip(log_eta).zip(log_r) {
        if lr.is_infinite() {
            continue;
        }
        p_list.push(power_transform(w, le.exp())?);
        r.push(lr.exp());
    }
    combine(&p_list, &r)
}

fn mixture_stage(
    session: &mut Session,
    n: usize,
    leaders: &LeaderOptResult,
    v1: &[f64],
) -> Result<OptimizationResult> {
    let acceptance = session.opts.acceptance;
    let omegas: Vec<Vec<f64>> = leaders.communities.iter().map(|c| community_input(n, c, v1)).collect();
    let h = omegas.len();
    let mut history = Vec::new();

    // power of the first vector alone
    let first = &omegas[..1];
    let res = session.maximize(&[0.0], &[LOG_ETA_BOUNDS], LOG_STEP, |x| {
        mixture(first, x, &[0.0]).map(Some)
    })?;
    let mut active = vec![0usize];
    let mut log_eta = vec![res.x[0]];
    let mut log_r = vec![0.0];
    let mut lambda = res.value;
    history.push(lambda);

    // greedy growth: tune only the newcomer's weight, then a shared power
    for j in 1..h {
        let eta_in = *log_eta.last().expect("nonempty");
        let r_in = *log_r.last().expect("nonempty");
        let trial: Vec<Vec<f64>> = active.iter().chain([&j]).map(|&i| omegas[i].clone()).collect();
        let mut trial_eta = log_eta.clone();
        trial_eta.push(eta_in);
        let res = session.maximize(&[r_in], &[LOG_R_BOUNDS], LOG_STEP, |x| {
            let mut lr = log_r.clone();
            lr.push(x[0]);
            mixture(&trial, &trial_eta, &lr).map(Some)
        })?;
        if res.value * acceptance < lambda {
            continue;
        }
        active.push(j);
        log_r.push(res.x[0]);
        let res = session.maximize(&[eta_in], &[LOG_ETA_BOUNDS], LOG_STEP, |x| {
            mixture(&trial, &vec![x[0]; trial.len()], &log_r).map(Some)
        })?;
        log_eta = vec![res.x[0]; active.len()];
        lambda = res.value;
        history.push(lambda);
    }

    let mut chosen: Vec<Vec<f64>> = active.iter().map(|&i| omegas[i].clone()).collect();
    if active.len() > 1 {
        // joint weights and powers
        let (x, value) = joint(session, &chosen, &log_r, &log_eta)?;
        let q = active.len();
        log_r = x[..q].to_vec();
        log_eta = x[q..].to_vec();
        lambda = value;
        history.push(lambda);

        // try dropping each vector in turn
        for i in 0..q {
            if log_r.iter().filter(|r| r.is_finite()).count() == 1 {
                break;
            }
            let saved = log_r[i];
            log_r[i] = f64::INFINITY;
            let rate = session.rate(&mixture(&chosen, &log_eta, &log_r)?)?;
            if rate * acceptance < lambda {
                log_r[i] = saved;
            } else {
                lambda = rate;
                history.push(lambda);
            }
        }
        let kept: Vec<usize> = (0..q).filter(|&i| log_r[i].is_finite()).collect();
        active = kept.iter().map(|&i| active[i]).collect();
        chosen = kept.iter().map(|&i| chosen[i].clone()).collect();
        log_r = kept.iter().map(|&i| log_r[i]).collect();
        log_eta = kept.iter().map(|&i| log_eta[i]).collect();

        if active.len() > 1 {
            let (x, value) = joint(session, &chosen, &log_r, &log_eta)?;
            let q = active.len();
            log_r = x[..q].to_vec();
            log_eta = x[q..].to_vec();
            lambda = value;
        } else {
            let only = &chosen[..1];
            let res = session.maximize(&log_eta, &[LOG_ETA_BOUNDS], LOG_STEP, |x| {
                mixture(only, x, &[0.0]).map(Some)
            })?;
            log_eta = res.x;
            log_r = vec![0.0];
            lambda = res.value;
        }
        history.push(lambda);
    }

    let c = mixture(&chosen, &log_eta, &log_r)?;
    debug_assert!(lambda.is_finite());
    Ok(OptimizationResult {
        c,
        lambda1: lambda,
        active_communities: active.iter().map(|&i| leaders.communities[i].rank).collect(),
        evaluations: session.evaluations,
        converged: session.converged,
        lambda_history: history,
    })
}

fn joint(
    session: &mut Session,
    omegas: &[Vec<f64>],
    log_r: &[f64],
    log_eta: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let q = omegas.len();
    let x0: Vec<f64> = log_r.iter().chain(log_eta).copied().collect();
    let bounds: Vec<(f64, f64)> = std::iter::repeat_n(LOG_R_BOUNDS, q)
        .chain(std::iter::repeat_n(LOG_ETA_BOUNDS, q))
        .collect();
    let res = session.maximize(&x0, &bounds, LOG_STEP, |x| {
        mixture(omegas, &x[q..], &x[..q]).map(Some)
    })?;
    Ok((res.x, res.value))
}

/// Both stages on arbitrary ranked communities, e.g. a clustering seeded in
/// place of influence communities. `v1` is the first Laplacian left
/// eigenvector.
pub fn optimize_communities(
    g: &Graph,
    communities: &[Community],
    v1: &[f64],
    opts: &OptimizerOptions,
) -> Result<OptimizationResult> {
    if v1.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: v1.len(),
        });
    }
    let mut ev = RateEvaluator::new(&g.laplacian());
    let mut session = Session::new(&mut ev, opts);
    let leaders = leader_stage(&mut session, g.n(), communities, v1)?;
    let mut result = mixture_stage(&mut session, g.n(), &leaders, v1)?;
    // report the rate of the returned allocation from a fresh evaluation
    result.lambda1 = convergence_rate(&g.laplacian(), &result.c)?;
    Ok(result)
}

/// Leader optimisation followed by the mixture stage.
pub fn cdi_perturbation_opt(g: &Graph, cdi: &CdiResult) -> Result<OptimizationResult> {
    cdi_perturbation_opt_with(g, cdi, &OptimizerOptions::default())
}

pub fn cdi_perturbation_opt_with(g: &Graph, cdi: &CdiResult, opts: &OptimizerOptions) -> Result<OptimizationResult> {
    optimize_communities(g, &cdi.communities, &cdi.coords.v1(), opts)
}

/// Rounds of restarted search per start in [`direct_baseline_opt`].
const DIRECT_RESTARTS: usize = 4;

/// Reference optimiser over the whole simplex: the allocation is
/// `x / sum(x)` for `x` in a box, searched from the uniform vector, the first
/// eigenvector, then seeded random points, each restarted until it stalls.
pub fn direct_baseline_opt(g: &Graph, multistart: usize, seed: u64) -> Result<OptimizationResult> {
    direct_baseline_opt_with(g, multistart, seed, &OptimizerOptions::default())
}

pub fn direct_baseline_opt_with(
    g: &Graph,
    multistart: usize,
    seed: u64,
    opts: &OptimizerOptions,
) -> Result<OptimizationResult> {
    let n = g.n();
    if n == 0 {
        return Err(Error::InvalidGraph("empty graph".into()));
    }
    let multistart = multistart.max(1);
    let mut starts: Vec<Vec<f64>> = vec![vec![1.0; n]];
    if multistart > 1 {
        let v1 = &left_eigs(g, MatrixKind::Laplacian, 1)?.vectors[0];
        let mass: f64 = v1.iter().map(|x| x.max(0.0)).sum();
        if mass > 0.0 {
            starts.push(v1.iter().map(|x| x.max(0.0) * n as f64 / mass).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while starts.len() < multistart {
        starts.push((0..n).map(|_| rng.random_range(0.0..2.0)).collect());
    }

    let build = |x: &[f64]| -> Result<Option<PerturbationVector>> {
        let sum: f64 = x.iter().sum();
        if sum <= 0.0 {
            return Ok(None);
        }
        PerturbationVector::new(x.iter().map(|v| v / sum).collect()).map(Some)
    };
    let bounds = vec![(0.0, 1e3); n];
    let mut ev = RateEvaluator::new(&g.laplacian());
    let mut session = Session::new(&mut ev, opts);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x0 in starts {
        let mut x = x0;
        let mut value = f64::NEG_INFINITY;
        for _ in 0..DIRECT_RESTARTS {
            let res = session.maximize(&x, &bounds, 0.25, build)?;
            let gained = res.value - value;
            x = res.x;
            value = res.value;
            if gained <= 1e-9 * value.abs().max(1e-300) {
                break;
            }
        }
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((x, value));
        }
    }
    let (x, _) = best.expect("at least one start");
    let c = build(&x)?.unwrap_or(PerturbationVector::uniform_on(n, &(0..n).collect::<Vec<_>>())?);
    let lambda1 = convergence_rate(&g.laplacian(), &c)?;
    Ok(OptimizationResult {
        c,
        lambda1,
        active_communities: Vec::new(),
        evaluations: session.evaluations,
        converged: session.converged,
        lambda_history: vec![lambda1],
    })
}
