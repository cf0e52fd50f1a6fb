//! Epigraph-form max-min-margin program
//!
//! ```text
//! minimize    aᵀr
//! subject to  B·r ≤ 0
//!             rᵀWᵀW r ≤ e
//! ```
//!
//! [`solve`] is a primal log-barrier interior-point method with Newton
//! centering. [`oracle_solve`] is a slow independent reference that bisects
//! on the margin and checks each candidate with an exact active-set
//! least-distance projection; it is only meant for small instances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EpigraphProblem {
    pub a: DVector<f64>,
    pub b: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub energy_bound: f64,
}

impl EpigraphProblem {
    pub fn new(a: DVector<f64>, b: DMatrix<f64>, w: DMatrix<f64>, energy_bound: f64) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::Dimensions("empty variable vector".into()));
        }
        if b.ncols() != n || w.ncols() != n {
            return Err(Error::Dimensions(format!(
                "a has {n} entries but B has {} and W has {} columns",
                b.ncols(),
                w.ncols()
            )));
        }
        if !(energy_bound.is_finite() && energy_bound >= 0.0) {
            return Err(Error::Parameter(format!("energy bound {energy_bound} must be ≥ 0")));
        }
        Ok(EpigraphProblem { a, b, w, energy_bound })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.b.nrows()
    }

    /// `WᵀW`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.w.transpose() * &self.w
    }

    pub fn energy(&self, r: &DVector<f64>) -> f64 {
        (&self.w * r).norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖a + Bᵀλ + 2μWᵀWr‖∞`.
    pub stationarity: f64,
    /// Largest constraint violation.
    pub primal_feasibility: f64,
    /// `Σ λᵢ·(−Bᵢr) + μ·(e − rᵀWᵀWr)`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal_feasibility).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodeSolution {
    pub r: DVector<f64>,
    /// Margin, the negated last component of `r`.
    pub gamma: f64,
    pub objective: f64,
    pub kkt: KktResiduals,
    pub status: SolveStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    /// Outer barrier iterations.
    pub max_iter: usize,
    /// Factor by which the barrier weight grows between centerings.
    #[serde(default = "default_growth")]
    pub barrier_growth: f64,
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Parameter(format!("solver tolerance {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("solver needs at least one iteration".into()));
        }
        if !(self.barrier_growth.is_finite() && self.barrier_growth > 1.0) {
            return Err(Error::Parameter(format!("barrier growth {} must exceed 1", self.barrier_growth)));
        }
        Ok(())
    }
}

fn default_growth() -> f64 {
    8.0
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: 1e-7, max_iter: 200, barrier_growth: default_growth() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub inequality: f64,
    pub energy: f64,
}

pub fn check_feasibility(p: &EpigraphProblem, r: &DVector<f64>) -> Result<FeasibilityReport> {
    if r.len() != p.dim() {
        return Err(Error::Dimensions(format!("r has {} entries, problem has {}", r.len(), p.dim())));
    }
    let br = &p.b * r;
    let inequality = br.iter().fold(0.0f64, |m, &v| m.max(v));
    let energy = (p.energy(r) - p.energy_bound).max(0.0);
    Ok(FeasibilityReport { inequality, energy })
}

const PHASE_ONE_GROWTH: f64 = 8.0;
const MAX_NEWTON_PER_CENTERING: usize = 200;
const NEWTON_TOL: f64 = 1e-10;
const GAP_FLOOR: f64 = 1e-6;
const RIDGE: f64 = 1e-12;
const MAX_STEP_EXPANSION: f64 = 1e6;
// relative row violation accepted as a feasibility certificate in the oracle
const CERT_TOL: f64 = 1e-12;
const CERT_SLACK: f64 = 1e-9;
// bisection stops at this relative bracket width; undecided checks count as
// infeasible, so the oracle margin is a lower estimate within it
const ORACLE_REL_TOL: f64 = 1e-7;

/// Internally scaled copy of a problem: unit-norm rows of `B`, `WᵀW`
/// normalized to unit mean eigenvalue and unit energy bound.
struct Scaled {
    a: DVector<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    row_norms: Vec<f64>,
    q_scale: f64,
    /// `r = r_scaled · var_scale`.
    var_scale: f64,
}

impl Scaled {
    fn new(p: &EpigraphProblem) -> Self {
        let n = p.dim();
        let q_raw = p.gram();
        let q_scale = (q_raw.trace() / n as f64).max(f64::MIN_POSITIVE);
        let q = q_raw / q_scale;
        let row_norms: Vec<f64> = p.b.row_iter().map(|r| r.norm().max(f64::MIN_POSITIVE)).collect();
        let mut b = p.b.clone();
        for (i, nrm) in row_norms.iter().enumerate() {
            b.row_mut(i).scale_mut(1.0 / nrm);
        }
        let var_scale = (p.energy_bound / q_scale).sqrt();
        Scaled { a: p.a.clone(), b, q, row_norms, q_scale, var_scale }
    }
}

enum Centering {
    Converged(DVector<f64>, usize),
    Stalled(DVector<f64>, usize),
    Failed,
}

/// Barrier slacks `s = −B·r`, `u = 1 − rᵀQr`; `None` when not strictly feasible.
fn slacks(s: &Scaled, r: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let sl = -(&s.b * r);
    let u = 1.0 - r.dot(&(&s.q * r));
    if sl.iter().all(|&v| v > 0.0) && u > 0.0 && u.is_finite() {
        Some((sl, u))
    } else {
        None
    }
}

fn cholesky_solve_many(h: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = h.nrows();
    let diag_scale = (h.trace() / n as f64).abs().max(1.0);
    let mut ridge = RIDGE * diag_scale;
    for _ in 0..8 {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += ridge;
        }
        if let Some(ch) = hr.cholesky() {
            let x = ch.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        ridge *= 100.0;
    }
    None
}

/// Solve `(h + c·q·qᵀ)·x = rhs` by Sherman–Morrison.
fn rank_one_solve(h: &DMatrix<f64>, c: f64, q: &DVector<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let mut both = DMatrix::zeros(n, 2);
    both.set_column(0, rhs);
    both.set_column(1, q);
    let sol = cholesky_solve_many(h, &both)?;
    let (x0, y) = (sol.column(0), sol.column(1));
    let denom = 1.0 + c * q.dot(&y);
    let x = x0 - y * (c * q.dot(&x0) / denom);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Newton step and decrement of `t·objectiveᵀr + φ(r)` at a strictly
/// feasible point with slacks `sl`, `u`.
fn newton_step(
    s: &Scaled,
    t: f64,
    r: &DVector<f64>,
    objective: &DVector<f64>,
    sl: &DVector<f64>,
    u: f64,
) -> Option<(DVector<f64>, f64)> {
    let qr = &s.q * r;
    let inv_s = sl.map(|v| 1.0 / v);
    let grad = objective * t + s.b.transpose() * &inv_s + &qr * (2.0 / u);
    // H = Bᵀ diag(1/s²) B + 2Q/u + 4 (Qr)(Qr)ᵀ/u²
    let mut bs = s.b.clone();
    for (i, mut row) in bs.row_iter_mut().enumerate() {
        row *= inv_s[i];
    }
    let mut h = bs.transpose() * &bs;
    h += &s.q * (2.0 / u);
    // the rank-one term dominates near the energy boundary; keep it out of
    // the factorization so the ridge is sized by the well-scaled part
    let step = rank_one_solve(&h, 4.0 / (u * u), &qr, &(-&grad))?;
    let decrement = -grad.dot(&step);
    decrement.is_finite().then_some((step, decrement))
}

/// Newton centering for `t·aᵀr + φ(r)` from a strictly feasible start.
fn center(s: &Scaled, t: f64, mut r: DVector<f64>, objective: &DVector<f64>) -> Centering {
    for it in 0..MAX_NEWTON_PER_CENTERING {
        let Some((sl, u)) = slacks(s, &r) else { return Centering::Failed };
        let Some((step, decrement)) = newton_step(s, t, &r, objective, &sl, u) else { return Centering::Failed };
        if decrement / 2.0 <= NEWTON_TOL {
            return Centering::Converged(r, it);
        }
        let qr = &s.q * &r;
        let alpha = line_search(s, t, objective, &sl, u, &qr, &step);
        if alpha <= 0.0 {
            // the direction no longer descends in floating point
            return Centering::Stalled(r, it);
        }
        let cand = &r + &step * alpha;
        if slacks(s, &cand).is_none() {
            return Centering::Stalled(r, it);
        }
        r = cand;
    }
    Centering::Stalled(r, MAX_NEWTON_PER_CENTERING)
}

/// Exact line search along `step`: the barrier is convex along the line, so
/// bisect its derivative inside the strictly feasible interval.
fn line_search(
    s: &Scaled,
    t: f64,
    objective: &DVector<f64>,
    sl: &DVector<f64>,
    u: f64,
    qr: &DVector<f64>,
    step: &DVector<f64>,
) -> f64 {
    let d = &s.b * step;
    let rq_d = qr.dot(step);
    let dq_d = step.dot(&(&s.q * step));
    let lin = t * objective.dot(step);
    let mut alpha_max = f64::INFINITY;
    for (si, di) in sl.iter().zip(d.iter()) {
        if *di > 0.0 {
            alpha_max = alpha_max.min(si / di);
        }
    }
    // u − 2α·rᵀQΔ − α²·ΔᵀQΔ > 0
    if dq_d > 0.0 {
        let disc = (rq_d * rq_d + dq_d * u).sqrt();
        let root = if rq_d >= 0.0 { u / (rq_d + disc) } else { (disc - rq_d) / dq_d };
        alpha_max = alpha_max.min(root);
    } else if rq_d > 0.0 {
        alpha_max = alpha_max.min(u / (2.0 * rq_d));
    }
    let slope = |a: f64| -> f64 {
        let mut v = lin;
        for (si, di) in sl.iter().zip(d.iter()) {
            v += di / (si - a * di);
        }
        v + 2.0 * (rq_d + a * dq_d) / (u - 2.0 * a * rq_d - a * a * dq_d)
    };
    if slope(0.0) >= 0.0 {
        return 0.0;
    }
    // the Newton length is only a first bracket; near the energy boundary the
    // minimizer along the direction can lie well beyond it
    let cap = if alpha_max.is_finite() { 0.99 * alpha_max } else { f64::INFINITY };
    let mut lo = 0.0;
    let mut hi = cap.min(1.0);
    while slope(hi) <= 0.0 {
        if hi >= cap || hi >= MAX_STEP_EXPANSION {
            return hi;
        }
        lo = hi;
        hi = (hi * 2.0).min(cap);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    lo
}

/// Strictly feasible start in scaled coordinates.
fn initial_point(s: &Scaled) -> Option<DVector<f64>> {
    let n = s.a.len();
    // the margin coordinate alone is strictly feasible in the precoding
    // structure, where the last column of B is negative
    let mut r = DVector::zeros(n);
    r[n - 1] = 1.0;
    for scale in [1.0, 1e-2, 1e-4] {
        let cand = &r * scale;
        if slacks(s, &cand).is_some() {
            return Some(cand);
        }
    }
    phase_one(s)
}

/// Minimize `σ` subject to `B·r ≤ σ`, energy; stop once `σ < 0`.
fn phase_one(s: &Scaled) -> Option<DVector<f64>> {
    let n = s.a.len();
    let m = s.b.nrows();
    let mut b = DMatrix::zeros(m, n + 1);
    b.view_mut((0, 0), (m, n)).copy_from(&s.b);
    b.column_mut(n).fill(-1.0);
    let mut q = DMatrix::zeros(n + 1, n + 1);
    q.view_mut((0, 0), (n, n)).copy_from(&s.q);
    let mut a = DVector::zeros(n + 1);
    a[n] = 1.0;
    let aux = Scaled { a: a.clone(), b, q, row_norms: vec![1.0; m], q_scale: 1.0, var_scale: 1.0 };
    let mut r = DVector::zeros(n + 1);
    r[n] = 1.0;
    let mut t = 1.0;
    for _ in 0..40 {
        r = match center(&aux, t, r, &a) {
            Centering::Converged(r, _) | Centering::Stalled(r, _) => r,
            Centering::Failed => return None,
        };
        if r[n] < 0.0 {
            let cand = r.rows(0, n).into_owned();
            return slacks(s, &cand).map(|_| cand);
        }
        t *= PHASE_ONE_GROWTH;
    }
    None
}

fn finish(
    p: &EpigraphProblem,
    s: &Scaled,
    r_scaled: &DVector<f64>,
    t: f64,
    status: SolveStatus,
    iterations: usize,
) -> PrecodeSolution {
    let r = r_scaled * s.var_scale;
    let objective = p.a.dot(&r);
    let gamma = -r[r.len() - 1];
    let kkt = match slacks(s, r_scaled) {
        Some((sl, u)) if t > 0.0 => {
            // duals from the Newton-corrected slacks, accurate to second order
            // in the remaining centering error
            let (d, du) = match newton_step(s, t, r_scaled, &s.a, &sl, u) {
                Some((step, _)) => (&s.b * &step, 2.0 * (&s.q * r_scaled).dot(&step)),
                None => (DVector::zeros(sl.len()), 0.0),
            };
            let lambda =
                DVector::from_fn(sl.len(), |i, _| ((1.0 + d[i] / sl[i]) / (t * sl[i] * s.row_norms[i])).max(0.0));
            let mu = ((1.0 + du / u) / (t * u * s.var_scale * s.q_scale)).max(0.0);
            residuals(p, &r, &lambda, mu)
        }
        _ => residuals(p, &r, &DVector::zeros(p.n_constraints()), 0.0),
    };
    PrecodeSolution { r, gamma, objective, kkt, status, iterations }
}

/// KKT residuals of `(r, λ, μ)` in the problem's own units.
pub fn residuals(p: &EpigraphProblem, r: &DVector<f64>, lambda: &DVector<f64>, mu: f64) -> KktResiduals {
    let q = p.gram();
    let qr = &q * r;
    let stat = &p.a + p.b.transpose() * lambda + &qr * (2.0 * mu);
    let br = &p.b * r;
    let energy = r.dot(&qr);
    let primal = br.iter().fold(0.0f64, |m, &v| m.max(v)).max(energy - p.energy_bound).max(0.0);
    let comp = lambda.iter().zip(br.iter()).map(|(l, b)| (l * -b).abs()).sum::<f64>()
        + (mu * (p.energy_bound - energy)).abs();
    KktResiduals { stationarity: stat.amax(), primal_feasibility: primal, complementarity: comp }
}

/// Barrier interior-point solve.
pub fn solve(p: &EpigraphProblem, settings: &SolverSettings) -> PrecodeSolution {
    let n = p.dim();
    let m = p.n_constraints() as f64 + 1.0;
    if p.energy_bound == 0.0 {
        // only the origin carries zero energy along the transmit coordinates
        let r = DVector::zeros(n);
        let kkt = residuals(p, &r, &DVector::zeros(p.n_constraints()), 0.0);
        return PrecodeSolution { r, gamma: 0.0, objective: 0.0, kkt, status: SolveStatus::Optimal, iterations: 0 };
    }
    let s = Scaled::new(p);
    let Some(mut r) = initial_point(&s) else {
        return finish(p, &s, &DVector::zeros(n), 0.0, SolveStatus::NumericalFailure, 0);
    };
    let mut t = 1.0;
    let mut newton_total = 0;
    for outer in 0..settings.max_iter {
        match center(&s, t, r.clone(), &s.a) {
            Centering::Converged(next, it) => {
                r = next;
                newton_total += it;
            }
            Centering::Stalled(next, it) => {
                r = next;
                newton_total += it;
                log::trace!("centering stalled at t = {t:e}");
            }
            Centering::Failed => {
                return finish(p, &s, &r, t, SolveStatus::NumericalFailure, outer + 1);
            }
        }
        if r.iter().any(|v| !v.is_finite()) {
            return finish(p, &s, &r, t, SolveStatus::NumericalFailure, outer + 1);
        }
        let gap = m / t * s.var_scale;
        if gap <= settings.tol {
            let sol = finish(p, &s, &r, t, SolveStatus::Optimal, outer + 1);
            if sol.kkt.max() <= settings.tol {
                log::trace!("barrier converged: {} outer, {newton_total} Newton steps", outer + 1);
                return sol;
            }
            if gap <= settings.tol * GAP_FLOOR {
                // a tighter barrier cannot repair the residuals any more
                return PrecodeSolution { status: SolveStatus::NumericalFailure, ..sol };
            }
        }
        t *= settings.barrier_growth;
    }
    finish(p, &s, &r, t / settings.barrier_growth, SolveStatus::MaxIterations, settings.max_iter)
}

/// Result of a fixed-margin feasibility check.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginCheck {
    /// A point meeting `margin` (within a relative `1e-9` of the request)
    /// with the reported energy lies within the bound.
    Feasible { margin: f64, energy: f64, p: DVector<f64> },
    /// A dual certificate: every point with this margin needs at least
    /// `lower_bound` energy, more than allowed.
    EnergyExceeded { lower_bound: f64 },
    /// Neither certificate was reached within the iteration budget.
    NoConvergence { violation: f64 },
}

impl MarginCheck {
    pub fn is_feasible(&self) -> bool {
        matches!(self, MarginCheck::Feasible { .. })
    }
}

/// Fixed-margin subproblem: `G·p ≤ h(γ)` with the energy written as a
/// quadratic form in `p` around a centre.
struct MarginGeometry {
    /// Rows of `B` restricted to the transmit coordinates.
    g: DMatrix<f64>,
    /// Coefficient of `γ` in the right-hand side, `h = coef·γ`.
    coef: DVector<f64>,
    chol_l: DMatrix<f64>,
    /// `Q_pp⁻¹·Q_pl`.
    q_shift: DVector<f64>,
    /// `Q_ll − Q_lp Q_pp⁻¹ Q_pl`.
    q_schur: f64,
}

impl MarginGeometry {
    fn new(p: &EpigraphProblem) -> Result<Self> {
        let n = p.dim();
        if n < 2 {
            return Err(Error::Dimensions("need at least one transmit coordinate".into()));
        }
        let k = n - 1;
        let mut unit = DVector::zeros(n);
        unit[k] = 1.0;
        if p.a != unit {
            return Err(Error::Parameter("oracle expects the objective to be the last coordinate".into()));
        }
        let q = p.gram();
        let q_pp = q.view((0, 0), (k, k)).into_owned();
        let q_pl = q.view((0, k), (k, 1)).column(0).into_owned();
        let chol = q_pp
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("oracle needs WᵀW positive definite on the transmit block".into()))?;
        let q_shift = chol.solve(&q_pl);
        let q_schur = q[(k, k)] - q_pl.dot(&q_shift);
        let g = p.b.view((0, 0), (p.n_constraints(), k)).into_owned();
        // B_p·p + B_l·(−γ) ≤ 0  ⇔  B_p·p ≤ B_l·γ
        let coef = p.b.column(k).into_owned();
        Ok(MarginGeometry { g, coef, chol_l: chol.l(), q_shift, q_schur })
    }

    /// Largest positive margin that `p` meets on every row, if any.
    fn achieved_margin(&self, p: &DVector<f64>, scale: f64) -> Option<f64> {
        let gp = &self.g * p;
        let (mut hi, mut lo) = (f64::INFINITY, 0.0f64);
        for (v, c) in gp.iter().zip(self.coef.iter()) {
            // v ≤ c·γ
            if *c < 0.0 {
                hi = hi.min(v / c);
            } else if *c > 0.0 {
                lo = lo.max(v / c);
            } else if *v > CERT_TOL * scale {
                return None;
            }
        }
        (hi.is_finite() && hi > 0.0 && hi >= lo).then_some(hi)
    }

    fn energy(&self, p: &DVector<f64>, margin: f64) -> f64 {
        let r_last = -margin;
        let d = p + &self.q_shift * r_last;
        (self.chol_l.transpose() * d).norm_squared() + r_last * r_last * self.q_schur
    }

    /// Decide margin `gamma` from the minimum-energy point meeting it, found
    /// exactly as a least-distance problem in whitened coordinates
    /// `y = Lᵀ(p − p₀)`. `max_iter` bounds the active-set iterations.
    fn check(&self, gamma: f64, bound: f64, max_iter: usize) -> MarginCheck {
        let k = self.g.ncols();
        let m = self.g.nrows();
        let r_last = -gamma;
        let p0 = -&self.q_shift * r_last;
        let offset = r_last * r_last * self.q_schur;
        // rows in whitened coordinates: gᵢᵀ L⁻ᵀ y ≤ hᵢ − gᵢᵀ p₀, unit norm
        let lt = self.chol_l.transpose();
        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let scale = (0..m).fold(1e-300f64, |a, i| a.max((self.coef[i] * gamma).abs()));
        for i in 0..m {
            let gi = self.g.row(i).transpose();
            let row = self.chol_l.solve_lower_triangular(&gi).unwrap_or(gi);
            let h = self.coef[i] * gamma - self.g.row(i).dot(&p0.transpose());
            let n = row.norm();
            if n > 0.0 {
                rows.push(row / n);
                rhs.push(h / n);
            } else if h < -CERT_TOL * scale {
                return MarginCheck::EnergyExceeded { lower_bound: f64::INFINITY };
            }
        }
        // the program is a cone cut by an ellipsoid, so the margin a point
        // meets, rescaled onto the energy bound, is certified
        let feasible = |y: &DVector<f64>| -> Option<MarginCheck> {
            let p = lt.solve_upper_triangular(y).unwrap_or_else(|| y.clone()) + &p0;
            let margin = self.achieved_margin(&p, scale)?;
            let energy = self.energy(&p, margin);
            let (margin, energy, p) = if energy > 0.0 {
                let s = (bound / energy).sqrt();
                (margin * s, bound, p * s)
            } else {
                (margin, energy, p)
            };
            (margin >= (1.0 - CERT_SLACK) * gamma).then_some(MarginCheck::Feasible { margin, energy, p })
        };
        let y = match least_distance(&rows, &rhs, k, max_iter) {
            LeastDistance::Point(y) => y,
            LeastDistance::Empty => return MarginCheck::EnergyExceeded { lower_bound: f64::INFINITY },
            LeastDistance::NoConvergence => return MarginCheck::NoConvergence { violation: f64::NAN },
        };
        let lower = y.norm_squared() + offset;
        if lower > bound * (1.0 + CERT_SLACK) {
            return MarginCheck::EnergyExceeded { lower_bound: lower };
        }
        feasible(&y).unwrap_or_else(|| {
            let violation = rows.iter().zip(&rhs).map(|(r, h)| r.dot(&y) - h).fold(0.0f64, f64::max);
            MarginCheck::NoConvergence { violation }
        })
    }
}

enum LeastDistance {
    Point(DVector<f64>),
    Empty,
    NoConvergence,
}

/// Shortest `y` with `rowsᵢ·y ≤ rhsᵢ`, through the nonnegative least squares
/// dual `min ‖E·u − f‖, u ≥ 0` with `E = [−rows; −rhs]ᵀ`, `f = e_{k+1}`.
fn least_distance(rows: &[DVector<f64>], rhs: &[f64], k: usize, max_iter: usize) -> LeastDistance {
    let m = rows.len();
    if m == 0 {
        return LeastDistance::Point(DVector::zeros(k));
    }
    let mut e = DMatrix::<f64>::zeros(k + 1, m);
    for (j, (r, h)) in rows.iter().zip(rhs).enumerate() {
        e.view_mut((0, j), (k, 1)).copy_from(&(-r));
        e[(k, j)] = -h;
    }
    let mut f = DVector::<f64>::zeros(k + 1);
    f[k] = 1.0;
    let Some(u) = nnls(&e, &f, max_iter) else {
        return LeastDistance::NoConvergence;
    };
    let r = &e * u - f;
    if r[k].abs() <= 1e-12 {
        return LeastDistance::Empty;
    }
    LeastDistance::Point(-r.rows(0, k) / r[k])
}

/// Lawson–Hanson active-set nonnegative least squares.
fn nnls(e: &DMatrix<f64>, f: &DVector<f64>, max_iter: usize) -> Option<DVector<f64>> {
    let n = e.ncols();
    let tol = 1e-12 * e.amax().max(1.0) * f.amax().max(1.0) * (n as f64);
    let mut u = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = e.select_columns(&idx);
        let zs = sub.svd(true, true).solve(f, 1e-14).unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut z = DVector::zeros(n);
        for (a, &j) in idx.iter().enumerate() {
            z[j] = zs[a];
        }
        z
    };
    for _ in 0..max_iter {
        let w = e.transpose() * (f - e * &u);
        let Some(j) = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&a, &b| w[a].total_cmp(&w[b])) else {
            return Some(u);
        };
        passive[j] = true;
        loop {
            let z = solve_passive(&passive);
            if (0..n).all(|i| !passive[i] || z[i] > 0.0) {
                u = z;
                break;
            }
            let alpha = (0..n)
                .filter(|&i| passive[i] && z[i] <= 0.0)
                .map(|i| u[i] / (u[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            u += (z - &u) * alpha;
            for i in 0..n {
                if passive[i] && u[i] <= tol {
                    passive[i] = false;
                    u[i] = 0.0;
                }
            }
        }
    }
    None
}

/// Whether margin `gamma` is achievable within the energy bound.
pub fn margin_feasible(p: &EpigraphProblem, gamma: f64, sweeps: usize) -> Result<MarginCheck> {
    Ok(MarginGeometry::new(p)?.check(gamma, p.energy_bound, sweeps))
}

/// Reference solver: bisection on the margin with a Dykstra feasibility
/// check per candidate. `iterations` bounds the active-set steps per check.
pub fn oracle_solve(p: &EpigraphProblem, iterations: usize) -> Result<PrecodeSolution> {
    let geo = MarginGeometry::new(p)?;
    let k = p.dim() - 1;
    let bound = p.energy_bound;
    // γ = 0 is always feasible (the origin)
    let mut lo = 0.0;
    let mut best_p = DVector::zeros(k);
    let mut hi = {
        let row_scale = geo.g.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
        let diag_min = geo.chol_l.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        (row_scale * bound.sqrt() / diag_min.max(1e-300)).max(1e-12)
    };
    let mut grow = 0;
    while let MarginCheck::Feasible { p: pp, margin, .. } = geo.check(hi, bound, iterations) {
        lo = margin;
        best_p = pp;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Parameter("margin appears unbounded".into()));
        }
    }
    let floor = 1e-6 * hi;
    let mut steps = 0;
    while hi - lo > ORACLE_REL_TOL * lo.max(floor) && steps < 200 {
        let mid = 0.5 * (lo + hi);
        match geo.check(mid, bound, iterations) {
            MarginCheck::Feasible { p: pp, margin, .. } if margin > lo => {
                lo = margin;
                best_p = pp;
            }
            MarginCheck::Feasible { .. } => {}
            _ => hi = mid,
        }
        steps += 1;
    }
    let mut r = DVector::zeros(k + 1);
    r.rows_mut(0, k).copy_from(&best_p);
    r[k] = -lo;
    let feas = check_feasibility(p, &r)?;
    let kkt = KktResiduals { stationarity: 0.0, primal_feasibility: feas.inequality.max(feas.energy), complementarity: 0.0 };
    let status = if steps < 200 { SolveStatus::Optimal } else { SolveStatus::MaxIterations };
    Ok(PrecodeSolution { objective: -lo, gamma: lo, r, kkt, status, iterations: steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> EpigraphProblem {
        // variables [p, −γ]; constraint p ≥ γ; energy p² ≤ 0.5
        EpigraphProblem::new(
            DVector::from_vec(vec![0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[-1.0, -1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn toy_margin_is_energy_limited() {
        let sol = solve(&toy(), &SolverSettings::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.gamma - 0.5f64.sqrt()).abs() < 1e-6, "γ = {}", sol.gamma);
        assert!((sol.r[0] - 0.5f64.sqrt()).abs() < 1e-6);
        assert!(sol.kkt.max() <= 1e-7, "{:?}", sol.kkt);
        let o = oracle_solve(&toy(), 10_000).unwrap();
        assert!((o.gamma - 0.5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn feasibility_report() {
        let p = toy();
        let f = check_feasibility(&p, &DVector::zeros(2)).unwrap();
        assert_eq!((f.inequality, f.energy), (0.0, 0.0));
        let tight = DVector::from_vec(vec![0.5f64.sqrt(), -(0.5f64.sqrt())]);
        let f2 = check_feasibility(&p, &(tight * 2.0)).unwrap();
        assert!((f2.energy - 3.0 * 0.5).abs() < 1e-12);
        assert!(check_feasibility(&p, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn rejects_bad_dimensions() {
        let r = EpigraphProblem::new(
            DVector::zeros(2),
            DMatrix::zeros(1, 3),
            DMatrix::zeros(1, 2),
            1.0,
        );
        assert!(r.is_err());
        assert!(EpigraphProblem::new(DVector::zeros(2), DMatrix::zeros(1, 2), DMatrix::zeros(1, 2), -1.0).is_err());
    }

    #[test]
    fn zero_energy_gives_origin() {
        let mut p = toy();
        p.energy_bound = 0.0;
        let sol = solve(&p, &SolverSettings::default());
        assert_eq!(sol.gamma, 0.0);
        assert!(sol.r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn oracle_rejects_margin_above_optimum() {
        let p = toy();
        assert!(margin_feasible(&p, 0.7, 10_000).unwrap().is_feasible());
        assert!(!margin_feasible(&p, 0.72, 10_000).unwrap().is_feasible());
    }

    #[test]
    fn opposite_sign_rows_pin_margin_at_zero() {
        // y = p₀ + p₁ must be ≥ γ and ≤ −γ
        let p = EpigraphProblem::new(
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
            DMatrix::from_row_slice(3, 3, &[-1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 0.5, -1.0]),
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            1.0,
        )
        .unwrap();
        let sol = solve(&p, &SolverSettings::default());
        let o = oracle_solve(&p, 20_000).unwrap();
        assert!(sol.gamma.abs() <= 1e-6, "γ = {}", sol.gamma);
        assert!(o.gamma.abs() <= 1e-6);
        assert!(!margin_feasible(&p, 0.1, 5_000).unwrap().is_feasible());
    }

    #[test]
    fn phase_one_handles_general_rows() {
        // last column of B not negative: start r = e_last is infeasible
        let p = EpigraphProblem::new(
            DVector::from_vec(vec![0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, 1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            1.0,
        )
        .unwrap();
        // p ≥ γ and p ≤ 0: best γ is 0
        let sol = solve(&p, &SolverSettings::default());
        assert!(sol.gamma.abs() < 1e-6, "{sol:?}");
    }
}
