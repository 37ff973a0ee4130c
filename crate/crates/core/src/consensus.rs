//! Linear consensus driven by a perturbation input.
//!
//! Each agent follows `dx_i/dt = sum_j a_ij (x_j - x_i) + c_i (u - x_i)`, i.e.
//! `dx/dt = -(L + C) x + C u 1` with `C = diag(c)`. An edge `i -> j` means `i`
//! listens to `j`, so influence flows against edge direction. The deviation
//! `x - u` decays at the rate `|Re lambda_1(-(L + C))|`, which is positive
//! exactly when every agent can follow edges to some perturbed agent.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, Laplacian};
use crate::spectra::PerturbedSpectrum;

/// Allowed deviation of `sum c` from one.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Nonnegative unit-sum allocation of perturbation input.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PerturbationVector(Vec<f64>);

impl PerturbationVector {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidArgument("empty perturbation vector".into()));
        }
        if let Some(i) = c.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "perturbation entry {i} is {} (must be finite and nonnegative)",
                c[i]
            )));
        }
        let sum: f64 = c.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "perturbation must sum to 1, sums to {sum}"
            )));
        }
        Ok(Self(c))
    }

    /// Scales nonnegative weights to unit sum.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::InvalidArgument("weights have no positive mass".into()));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    /// Equal shares on `support`, zero elsewhere.
    pub fn uniform_on(n: usize, support: &[usize]) -> Result<Self> {
        let mut c = vec![0.0; n];
        for &i in support {
            if i >= n {
                return Err(Error::InvalidArgument(format!("vertex {i} out of range")));
            }
            c[i] += 1.0;
        }
        Self::normalized(c)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        support_of(&self.0)
    }
}

fn support_of(c: &[f64]) -> Vec<usize> {
    (0..c.len()).filter(|&i| c[i] > 0.0).collect()
}

/// True iff every vertex has a directed path to a vertex with `c_i > 0`,
/// i.e. every vertex is influenced by the perturbation.
pub fn reachable_from_support(g: &Graph, c: &[f64]) -> bool {
    g.reaching(&support_of(c)).into_iter().all(|r| r)
}

/// Repeated rate evaluation on a fixed Laplacian.
pub struct RateEvaluator {
    spectrum: PerturbedSpectrum,
    /// `listeners[j]`: vertices `i` with an edge `i -> j`.
    listeners: Vec<Vec<usize>>,
    evaluations: usize,
}

impl RateEvaluator {
    pub fn new(lap: &Laplacian) -> Self {
        let n = lap.n();
        let mut listeners = vec![Vec::new(); n];
        for i in 0..n {
            for &(j, v) in lap.off_diagonal(i) {
                if v != 0.0 {
                    listeners[j].push(i);
                }
            }
        }
        Self {
            spectrum: PerturbedSpectrum::new(lap),
            listeners,
            evaluations: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.listeners.len()
    }

    /// Number of rate evaluations so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn all_reach(&self, c: &[f64]) -> bool {
        let mut seen: Vec<bool> = c.iter().map(|&x| x > 0.0).collect();
        let mut stack: Vec<usize> = support_of(c);
        while let Some(j) = stack.pop() {
            for &i in &self.listeners[j] {
                if !seen[i] {
                    seen[i] = true;
                    stack.push(i);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// `|Re lambda_1(-(L + diag(c)))|` for any nonnegative `c`, unit sum or not.
    pub fn rate(&mut self, c: &[f64]) -> Result<f64> {
        if c.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: c.len(),
            });
        }
        if c.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidArgument("perturbation entries must be finite and nonnegative".into()));
        }
        self.evaluations += 1;
        if !self.all_reach(c) {
            return Ok(0.0);
        }
        Ok(self.spectrum.min_real(c)?.abs())
    }
}

/// Convergence rate `|Re lambda_1(-(L + C))|`; zero when some vertex cannot
/// reach the perturbed vertices.
pub fn convergence_rate(lap: &Laplacian, c: &PerturbationVector) -> Result<f64> {
    RateEvaluator::new(lap).rate(c.as_slice())
}

/// Sampled solution of the perturbed consensus dynamics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub target: f64,
}

impl ConsensusTrajectory {
    /// `max_i |x_i(t_k) - u|` for each sample.
    pub fn deviations(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|x| x.iter().map(|v| (v - self.target).abs()).fold(0.0, f64::max))
            .collect()
    }

    /// Least-squares slope of `log max|x - u|` over samples with
    /// `t >= t_from` whose deviation stays above `floor`.
    pub fn decay_slope(&self, t_from: f64, floor: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(self.deviations())
            .filter(|&(&t, d)| t >= t_from && d > floor)
            .map(|(&t, d)| (t, d.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let m = pts.len() as f64;
        let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
        let (mt, my) = (st / m, sy / m);
        let (num, den) = pts
            .iter()
            .fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y - my), b + (t - mt) * (t - mt)));
        (den > 0.0).then(|| num / den)
    }

    /// CSV with header `t,x0,...,x{n-1}`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        write!(w, "t")?;
        for i in 0..n {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in x {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// State norm beyond which integration is declared unstable.
pub const INSTABILITY_LIMIT: f64 = 1e12;
const RTOL: f64 = 1e-10;
const ATOL: f64 = 1e-13;

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Dynamics<'a> {
    lap: &'a Laplacian,
    c: &'a [f64],
    u: f64,
}

impl Dynamics<'_> {
    fn rhs(&self, x: &[f64]) -> Vec<f64> {
        let lx = self.lap.mul(x);
        (0..x.len())
            .map(|i| -lx[i] + self.c[i] * (self.u - x[i]))
            .collect()
    }

    /// One Dormand-Prince step; returns the fifth-order state and the scaled
    /// error norm.
    fn step(&self, x: &[f64], h: f64) -> (Vec<f64>, f64) {
        let n = x.len();
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        k.push(self.rhs(x));
        for row in A.iter().skip(1) {
            let stage: Vec<f64> = (0..n)
                .map(|i| x[i] + h * (0..k.len()).map(|s| row[s] * k[s][i]).sum::<f64>())
                .collect();
            k.push(self.rhs(&stage));
        }
        // the last stage is evaluated at the fifth-order solution
        let next: Vec<f64> = (0..n)
            .map(|i| x[i] + h * (0..6).map(|s| A[6][s] * k[s][i]).sum::<f64>())
            .collect();
        let err = ((0..n)
            .map(|i| {
                let e = h * (0..7).map(|s| ERR[s] * k[s][i]).sum::<f64>();
                let scale = ATOL + RTOL * x[i].abs().max(next[i].abs());
                (e / scale).powi(2)
            })
            .sum::<f64>()
            / n.max(1) as f64)
            .sqrt();
        (next, err)
    }
}

/// Integrates the dynamics with an adaptive Dormand-Prince 5(4) scheme whose
/// step never exceeds `dt`, sampling at `0, dt, 2 dt, ...` and at `t_end`.
pub fn simulate(
    g: &Graph,
    c: &PerturbationVector,
    u: f64,
    x0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<ConsensusTrajectory> {
    let n = g.n();
    if c.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if c.len() != n { c.len() } else { x0.len() },
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end {t_end} must be at least dt {dt}")));
    }
    if !u.is_finite() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("target and initial state must be finite".into()));
    }
    let lap = g.laplacian();
    let dyn_ = Dynamics {
        lap: &lap,
        c: c.as_slice(),
        u,
    };

    let steps = (t_end / dt).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    if t_end - grid[steps] > 1e-12 * t_end {
        grid.push(t_end);
    }

    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut h = dt;
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    for &target_t in &grid[1..] {
        while target_t - t > 1e-14 * target_t.max(1.0) {
            let h_try = h.min(dt).min(target_t - t);
            let (next, err) = dyn_.step(&x, h_try);
            if err <= 1.0 {
                t += h_try;
                x = next;
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !norm.is_finite() || norm > INSTABILITY_LIMIT {
                    return Err(Error::Unstable {
                        t,
                        limit: INSTABILITY_LIMIT,
                    });
                }
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = h_try * factor;
            if h < 1e-14 * dt {
                return Err(Error::Unstable {
                    t,
                    limit: INSTABILITY_LIMIT,
                });
            }
        }
        t = target_t;
        times.push(t);
        states.push(x.clone());
    }
    Ok(ConsensusTrajectory {
        times,
        states,
        target: u,
    })
}
