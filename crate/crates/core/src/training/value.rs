//! Least-squares value baseline.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::policy::{ValueParams, STATE_FEATURE_DIM};
use crate::reward::returns_to_go;
use crate::rollout::TrajectoryStep;

pub const RIDGE: f64 = 1e-6;

/// (state features, discounted return-to-go) for every step.
pub fn value_samples(trajectories: &[Vec<TrajectoryStep>], gamma: f64) -> Vec<([f64; STATE_FEATURE_DIM], f64)> {
    trajectories
        .iter()
        .flat_map(|traj| {
            let rewards: Vec<f64> = traj.iter().map(|s| s.reward).collect();
            let g = returns_to_go(&rewards, gamma);
            traj.iter().zip(g).map(|(s, r)| (s.state_features, r))
        })
        .collect()
}

/// Regresses returns on state features plus an intercept.
pub fn fit_value(trajectories: &[Vec<TrajectoryStep>], gamma: f64) -> Result<ValueParams> {
    fit_value_samples(&value_samples(trajectories, gamma))
}

/// Solves the normal equations by Cholesky; when they are singular, solves
/// the ridge system with `RIDGE` on the diagonal instead.
pub fn fit_value_samples(samples: &[([f64; STATE_FEATURE_DIM], f64)]) -> Result<ValueParams> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("value fit needs at least one sample".into()));
    }
    let cols = STATE_FEATURE_DIM + 1;
    let x = DMatrix::from_fn(samples.len(), cols, |i, j| if j < STATE_FEATURE_DIM { samples[i].0[j] } else { 1.0 });
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * y;
    let w = match xtx.clone().cholesky().map(|c| c.solve(&xty)) {
        Some(w) if w.iter().all(|v| v.is_finite()) && well_posed(&xtx) => w,
        _ => {
            let ridge = xtx + DMatrix::identity(cols, cols) * RIDGE;
            ridge
                .cholesky()
                .ok_or_else(|| Error::NonFinite("ridge normal equations".into()))?
                .solve(&xty)
        }
    };
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("value weights".into()));
    }
    let mut v_weights = [0.0; STATE_FEATURE_DIM];
    v_weights.copy_from_slice(&w.as_slice()[..STATE_FEATURE_DIM]);
    Ok(ValueParams {
        v_weights,
        intercept: w[STATE_FEATURE_DIM],
    })
}

/// Rejects Gram matrices whose smallest eigenvalue is negligible relative to
/// the largest, which Cholesky alone may accept through roundoff.
fn well_posed(xtx: &DMatrix<f64>) -> bool {
    let eig = xtx.clone().symmetric_eigenvalues();
    let max = eig.iter().copied().fold(0.0, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > max * 1e-12
}
