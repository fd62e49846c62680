//! Numerical base-parameter reduction.
//!
//! Regressors are sampled at random in-limit states and stacked; a pivoted QR
//! of the stack splits the columns into an independent set and dependent
//! columns expressed as combinations of it. Zero columns end up dependent
//! with zero coefficients. The result maps the full parameter vector onto the
//! minimal set `β = B · vec(X)` with `Y_full = Y_base · B` at every state.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, column_label, is_friction_column, LinkInertialSet};
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, PivotedQr};
use crate::model::{JointState, RobotModel};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionOptions {
    pub tol: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Keep friction columns in the reduction (the combined variant).
    pub include_friction: bool,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        ReductionOptions {
            tol: DEFAULT_TOL,
            n_samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            include_friction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseParamMapping {
    pub rank: usize,
    /// Columns of the full regressor kept as the base regressor, ascending.
    pub independent_cols: Vec<usize>,
    /// `rank × n_full`; row `k` defines base parameter `k`.
    pub recombination: DMatrix<f64>,
    pub labels: Vec<String>,
    pub include_friction: bool,
    pub tol: f64,
    /// Set when the rank differs between `tol` and `10·tol`.
    pub rank_warning: Option<String>,
}

impl BaseParamMapping {
    pub fn n_full(&self) -> usize {
        self.recombination.ncols()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mapping serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: BaseParamMapping = serde_json::from_str(text)?;
        if m.recombination.nrows() != m.rank || m.independent_cols.len() != m.rank || m.labels.len() != m.rank {
            return Err(Error::Malformed("mapping dimensions disagree with its rank".into()));
        }
        Ok(m)
    }
}

/// States drawn uniformly inside the position, velocity and acceleration limits.
pub fn sample_states(model: &RobotModel, n: usize, seed: u64) -> Vec<JointState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut s = JointState::zeros(model.n_joints());
            for (i, l) in model.limits().iter().enumerate() {
                s.q[i] = rng.random_range(l.q_min..=l.q_max);
                s.dq[i] = rng.random_range(-l.dq_max..=l.dq_max);
                s.ddq[i] = rng.random_range(-l.ddq_max..=l.ddq_max);
            }
            s
        })
        .collect()
}

/// Row-stack of regressors at `n` random in-limit states.
pub fn sample_regressors(model: &RobotModel, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample state".into()));
    }
    let blocks: Vec<DMatrix<f64>> = sample_states(model, n, seed)
        .iter()
        .map(|s| dynamics::regressor(model, s))
        .collect();
    Ok(stack_rows(&blocks))
}

pub(crate) fn stack_rows(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        out.view_mut((r0, 0), (b.nrows(), cols)).copy_from(b);
        r0 += b.nrows();
    }
    out
}

/// Split the columns of `stacked` into independent and dependent sets.
pub fn compute_base_mapping(stacked: &DMatrix<f64>, tol: f64) -> Result<BaseParamMapping> {
    let (m, p) = stacked.shape();
    if m < p {
        return Err(Error::Count {
            what: "stacked rows (at least one per column)",
            expected: p,
            found: m,
        });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} outside (0, 1)")));
    }
    let rank = numerical_rank(stacked, tol);
    let loose = numerical_rank(stacked, tol * 10.0);
    let rank_warning = (loose != rank).then(|| {
        format!(
            "numerical rank changes from {rank} at tol {tol:e} to {loose} at tol {:e}",
            tol * 10.0
        )
    });

    let qr = PivotedQr::new(stacked);
    let r11 = qr.r.view((0, 0), (rank, rank)).clone_owned();
    let r12 = qr.r.view((0, rank), (rank, p - rank)).clone_owned();
    let k = r11.solve_upper_triangular(&r12).ok_or_else(|| Error::RankDeficient {
        rank,
        columns: p,
        directions: "leading triangular block is singular".into(),
    })?;

    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by_key(|&i| qr.perm[i]);
    let mut recombination = DMatrix::zeros(rank, p);
    for (row, &piv) in order.iter().enumerate() {
        recombination[(row, qr.perm[piv])] = 1.0;
        for j in 0..p - rank {
            recombination[(row, qr.perm[rank + j])] = k[(piv, j)];
        }
    }
    let independent_cols: Vec<usize> = order.iter().map(|&i| qr.perm[i]).collect();
    let labels = (0..rank)
        .map(|r| label_row(&recombination, independent_cols[r]))
        .collect();
    Ok(BaseParamMapping {
        rank,
        independent_cols,
        recombination,
        labels,
        include_friction: true,
        tol,
        rank_warning,
    })
}

/// Reduction of a model's full regressor with the given options.
pub fn reduce_model(model: &RobotModel, opts: &ReductionOptions) -> Result<BaseParamMapping> {
    let mut stacked = sample_regressors(model, opts.n_samples, opts.seed)?;
    if !opts.include_friction {
        for c in (0..stacked.ncols()).filter(|&c| is_friction_column(c)) {
            stacked.column_mut(c).fill(0.0);
        }
    }
    let mut mapping = compute_base_mapping(&stacked, opts.tol)?;
    mapping.include_friction = opts.include_friction;
    Ok(mapping)
}

/// `β = B · vec(X)`.
pub fn project_params(mapping: &BaseParamMapping, params: &LinkInertialSet) -> DVector<f64> {
    &mapping.recombination * params.to_vector()
}

/// Base regressor: the independent columns of the full regressor.
pub fn base_regressor(model: &RobotModel, mapping: &BaseParamMapping, s: &JointState) -> DMatrix<f64> {
    select_columns(&dynamics::regressor(model, s), &mapping.independent_cols)
}

pub(crate) fn select_columns(y: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(y.nrows(), cols.len(), |i, j| y[(i, cols[j])])
}

fn format_coefficient(c: f64) -> String {
    let snapped = (c * 1000.0).round() / 1000.0;
    if (c - snapped).abs() < 1e-6 {
        format!("{snapped}")
    } else {
        format!("{:.6}", c).trim_end_matches('0').to_string()
    }
}

fn label_row(b: &DMatrix<f64>, own: usize) -> String {
    let row = b.row(b.row_iter().position(|r| r[own] == 1.0).expect("own column present"));
    let mut label = column_label(own);
    for (c, &v) in row.iter().enumerate() {
        if c == own || v.abs() < 1e-9 {
            continue;
        }
        let sign = if v < 0.0 { '-' } else { '+' };
        let mag = format_coefficient(v.abs());
        if mag == "1" {
            label.push_str(&format!(" {sign} {}", column_label(c)));
        } else {
            label.push_str(&format!(" {sign} {mag}·{}", column_label(c)));
        }
    }
    label
}
