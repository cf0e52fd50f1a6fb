//! Temporal precoding: turn a target sign pattern into a transmit block.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qcqp::{self, EpigraphProblem, KktResiduals, PrecodeSolution, SolveStatus, SolverSettings};
use crate::signal::{BlockModel, SystemDims};
use crate::zc::Mapping;

/// Matrices and budgets shared by every block precoded for one user stream.
#[derive(Debug, Clone)]
pub struct PrecodeContext {
    pub model: Arc<BlockModel>,
    /// Beamforming gain from the spatial stage.
    pub beta: f64,
    /// Per-user block transmit energy `E_Tx`.
    pub e_tx: f64,
    w: DMatrix<f64>,
    whitening: Arc<Whitening>,
}

/// Coordinates in which the transmit energy is a plain squared norm:
/// `p_x = basis·w`, `‖G_Txᵀ·U·p_x‖² = ‖w‖²`.
#[derive(Debug, Clone)]
pub struct Whitening {
    pub basis: DMatrix<f64>,
    /// `V·U·basis`.
    pub vu: DMatrix<f64>,
    /// `[I | 0]`, the energy map in the new coordinates.
    w: DMatrix<f64>,
}

// eigen-directions of the energy form below this fraction of the largest
// eigenvalue are numerically indistinguishable from zero energy
const WHITENING_FLOOR: f64 = 1e-14;

impl Whitening {
    pub fn new(model: &BlockModel) -> Result<Self> {
        let q = model.energy_gram.clone();
        let eig = q.symmetric_eigen();
        let top = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
        if top.is_nan() || top <= 0.0 {
            return Err(Error::Singular("transmit filter has no energy".into()));
        }
        let mut order: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > WHITENING_FLOOR * top)
            .collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let nq = q_dim(model);
        let k = order.len();
        let basis = DMatrix::from_fn(nq, k, |i, j| {
            let c = order[j];
            eig.eigenvectors[(i, c)] / eig.eigenvalues[c].sqrt()
        });
        let vu = &model.vu * &basis;
        let w = DMatrix::from_fn(k, k + 1, |i, j| if i == j { 1.0 } else { 0.0 });
        Ok(Whitening { basis, vu, w })
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

fn q_dim(model: &BlockModel) -> usize {
    model.dims.n_q()
}

impl PrecodeContext {
    pub fn new(model: Arc<BlockModel>, beta: f64, e_tx: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Parameter(format!("beamforming gain {beta} must be positive")));
        }
        if !(e_tx.is_finite() && e_tx >= 0.0) {
            return Err(Error::Parameter(format!("transmit energy {e_tx} must be ≥ 0")));
        }
        let nq = model.dims.n_q();
        let e = &model.energy_map;
        let mut w = DMatrix::zeros(e.nrows(), nq + 1);
        w.view_mut((0, 0), (e.nrows(), nq)).copy_from(e);
        let whitening = Arc::new(Whitening::new(&model)?);
        Ok(PrecodeContext { model, beta, e_tx, w, whitening })
    }

    /// Same matrices with a different beamforming gain.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Parameter(format!("beamforming gain {beta} must be positive")));
        }
        Ok(PrecodeContext { beta, ..self.clone() })
    }

    pub fn dims(&self) -> &SystemDims {
        &self.model.dims
    }

    /// Energy budget of one real dimension, `E_Tx / 2`.
    pub fn per_dim_energy(&self) -> f64 {
        self.e_tx / 2.0
    }
}

/// Outcome summary of the program solved for a block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSummary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt: KktResiduals,
    /// Whether the block needed the extended-iteration retry.
    pub retried: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodedBlock {
    pub p_x: Vec<f64>,
    pub gamma: f64,
    pub pattern: Vec<i8>,
    pub solve: SolveSummary,
}

impl PrecodedBlock {
    pub fn is_erasure(&self) -> bool {
        self.solve.status != SolveStatus::Optimal
    }
}

/// Program `min aᵀr` s.t. `−[β·C·V·U, 1]·r ≤ 0`, `‖[E, 0]·r‖² ≤ E_Tx/2`, where
/// `E` is the model's energy map (`G_Txᵀ·U` under the sampled measure).
pub fn build_problem(c_out: &[i8], ctx: &PrecodeContext) -> Result<EpigraphProblem> {
    let dims = ctx.dims();
    let (nt, nq) = (dims.n_tot(), dims.n_q());
    if c_out.len() != nt {
        return Err(Error::Dimensions(format!("pattern has {} samples, block needs {nt}", c_out.len())));
    }
    let vu = &ctx.model.vu;
    let b = DMatrix::from_fn(nt, nq + 1, |i, j| {
        if j < nq {
            -ctx.beta * c_out[i] as f64 * vu[(i, j)]
        } else {
            -1.0
        }
    });
    let mut a = DVector::zeros(nq + 1);
    a[nq] = 1.0;
    EpigraphProblem::new(a, b, ctx.w.clone(), ctx.per_dim_energy())
}

/// The same program in whitened coordinates `r = [w, −γ]`.
pub fn build_whitened_problem(c_out: &[i8], ctx: &PrecodeContext) -> Result<EpigraphProblem> {
    let nt = ctx.dims().n_tot();
    if c_out.len() != nt {
        return Err(Error::Dimensions(format!("pattern has {} samples, block needs {nt}", c_out.len())));
    }
    let wh = &ctx.whitening;
    let k = wh.rank();
    let b = DMatrix::from_fn(nt, k + 1, |i, j| {
        if j < k {
            -ctx.beta * c_out[i] as f64 * wh.vu[(i, j)]
        } else {
            -1.0
        }
    });
    let mut a = DVector::zeros(k + 1);
    a[k] = 1.0;
    EpigraphProblem::new(a, b, wh.w.clone(), ctx.per_dim_energy())
}

impl PrecodeContext {
    pub fn whitening(&self) -> &Whitening {
        &self.whitening
    }
}

fn summarize(sol: &PrecodeSolution, retried: bool) -> SolveSummary {
    SolveSummary { status: sol.status, iterations: sol.iterations, kkt: sol.kkt, retried }
}

const RETRY_GROWTH: f64 = 2.0;

/// Solve for a given target pattern. A block that does not reach optimality
/// is retried once with a slower barrier schedule and four times the
/// iteration budget.
pub fn precode_pattern(c_out: &[i8], ctx: &PrecodeContext, settings: &SolverSettings) -> Result<PrecodedBlock> {
    let problem = build_whitened_problem(c_out, ctx)?;
    let mut sol = qcqp::solve(&problem, settings);
    let mut retried = false;
    if sol.status != SolveStatus::Optimal {
        log::warn!("block solve ended with {:?}; retrying with a larger budget", sol.status);
        let more = SolverSettings {
            max_iter: settings.max_iter * 4,
            barrier_growth: settings.barrier_growth.min(RETRY_GROWTH),
            ..*settings
        };
        sol = qcqp::solve(&problem, &more);
        retried = true;
        if sol.status != SolveStatus::Optimal {
            log::warn!("block solve failed after retry: {:?}", sol.status);
        }
    }
    let k = ctx.whitening.rank();
    let p_x = &ctx.whitening.basis * sol.r.rows(0, k);
    Ok(PrecodedBlock {
        p_x: p_x.as_slice().to_vec(),
        gamma: sol.gamma,
        pattern: c_out.to_vec(),
        solve: summarize(&sol, retried),
    })
}

/// Map symbols to their target pattern and precode it.
pub fn precode(
    symbols: &[usize],
    ctx: &PrecodeContext,
    mapping: &Mapping,
    settings: &SolverSettings,
) -> Result<PrecodedBlock> {
    if mapping.m_rx() != ctx.dims().m_rx {
        return Err(Error::Parameter(format!(
            "mapping is for M_Rx = {} but the block model has M_Rx = {}",
            mapping.m_rx(),
            ctx.dims().m_rx
        )));
    }
    if symbols.len() != ctx.dims().n_symbols {
        return Err(Error::Dimensions(format!(
            "{} symbols for a block of {}",
            symbols.len(),
            ctx.dims().n_symbols
        )));
    }
    let c_out = mapping.encode(symbols)?;
    precode_pattern(&c_out, ctx, settings)
}

/// Noiseless receive samples `β·V·U·p_x`.
pub fn noiseless_receive(p_x: &[f64], ctx: &PrecodeContext) -> Result<Vec<f64>> {
    let nq = ctx.dims().n_q();
    if p_x.len() != nq {
        return Err(Error::Dimensions(format!("p_x has {} samples, block needs {nq}", p_x.len())));
    }
    let p = DVector::from_column_slice(p_x);
    Ok((&ctx.model.vu * p * ctx.beta).as_slice().to_vec())
}

/// `min_k c_k·y_k`: signed distance of the samples to the threshold in the
/// direction the pattern asks for.
pub fn pattern_margin(c_out: &[i8], y: &[f64]) -> f64 {
    c_out.iter().zip(y).map(|(&c, &v)| c as f64 * v).fold(f64::INFINITY, f64::min)
}
