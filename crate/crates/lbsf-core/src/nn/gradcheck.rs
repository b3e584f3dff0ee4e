//! Central finite-difference verification of reverse-mode gradients.
//!
//! Intended to run with `f64` parameters ("check mode"); `f32` rounding
//! drowns the comparison long before 1e-4 relative error.

use rand::seq::SliceRandom;
use rand::Rng;

use super::param::{Grads, ParamSet};
use super::scalar::Scalar;
use super::KernelError;

#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    /// Central-difference step.
    pub eps: f64,
    /// Number of coordinates to probe; all coordinates when fewer exist.
    pub sample: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { eps: 1e-4, sample: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinate of the worst error, as (parameter name, flat index).
    pub worst: Option<(String, usize)>,
}

/// Compare analytic gradients against central differences on a random
/// subsample of trainable coordinates.
///
/// `f(params)` must evaluate the scalar loss for the current parameter
/// values; `analytic` holds the gradients to verify. Relative error uses
/// `max(|analytic|, |numeric|, 1e-8)` as the denominator.
pub fn finite_diff_compare<S, F>(
    mut f: F,
    params: &mut ParamSet<S>,
    analytic: &Grads<S>,
    cfg: FdConfig,
    rng: &mut impl Rng,
) -> Result<FdReport, KernelError>
where
    S: Scalar,
    F: FnMut(&ParamSet<S>) -> Result<S, KernelError>,
{
    let mut coords: Vec<(usize, usize)> = Vec::new();
    for (pid, p) in params.iter() {
        if p.trainable {
            for j in 0..p.value.numel() {
                coords.push((pid.0, j));
            }
        }
    }
    if coords.len() > cfg.sample {
        coords.shuffle(rng);
        coords.truncate(cfg.sample);
    }

    let eps = S::from_f64(cfg.eps);
    let mut report = FdReport { max_rel_err: 0.0, checked: coords.len(), worst: None };
    for &(pi, j) in &coords {
        let pid = super::param::ParamId(pi);
        let orig = params.value(pid).data()[j];

        params.value_mut(pid).data_mut()[j] = orig + eps;
        let up = f(params)?;
        params.value_mut(pid).data_mut()[j] = orig - eps;
        let down = f(params)?;
        params.value_mut(pid).data_mut()[j] = orig;

        if !up.is_finite() || !down.is_finite() {
            return Err(KernelError::NonFinite { op: "finite_diff_check" });
        }
        let numeric = (up.into_f64() - down.into_f64()) / (2.0 * cfg.eps);
        let analytic_v = analytic.get(pid).map(|g| g.data()[j].into_f64()).unwrap_or(0.0);
        let denom = analytic_v.abs().max(numeric.abs()).max(1e-8);
        let rel = (analytic_v - numeric).abs() / denom;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst = Some((params.get(pid).name.clone(), j));
        }
    }
    Ok(report)
}

/// Run `f` once to collect analytic gradients, then verify them against
/// finite differences. `f` receives a gradient buffer to fill exactly when
/// the analytic pass is wanted.
pub fn finite_diff_check<S, F>(
    mut f: F,
    params: &mut ParamSet<S>,
    cfg: FdConfig,
    rng: &mut impl Rng,
) -> Result<FdReport, KernelError>
where
    S: Scalar,
    F: FnMut(&ParamSet<S>, Option<&mut Grads<S>>) -> Result<S, KernelError>,
{
    let mut analytic = Grads::zeros_like(params);
    let loss = f(params, Some(&mut analytic))?;
    if !loss.is_finite() {
        return Err(KernelError::NonFinite { op: "finite_diff_check" });
    }
    finite_diff_compare(|ps| f(ps, None), params, &analytic, cfg, rng)
}
