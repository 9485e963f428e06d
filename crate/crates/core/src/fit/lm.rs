//! Small dense Levenberg–Marquardt solver with a forward-difference Jacobian.
//!
//! The residual function returns `None` for parameter vectors outside its
//! domain; such trial steps are rejected like a cost increase.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub initial_damping: f64,
    /// Damping multiplier on a rejected step, divisor on an accepted one.
    pub damping_factor: f64,
    /// Relative forward-difference step, scaled by `max(|x|, 1)`.
    pub fd_step: f64,
    /// Stop when the relative cost decrease of an accepted step falls below.
    pub cost_tolerance: f64,
    /// Stop when the largest step component falls below.
    pub step_tolerance: f64,
    pub max_iterations: usize,
    /// Singular-value ratio below which the Jacobian counts as rank deficient.
    pub rank_tolerance: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            initial_damping: 1e-3,
            damping_factor: 10.0,
            fd_step: 1e-6,
            cost_tolerance: 1e-10,
            step_tolerance: 1e-10,
            max_iterations: 200,
            rank_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Jacobian at `params`.
    pub jacobian: DMatrix<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rank_deficient: bool,
    /// Damping in effect when the solver stopped.
    pub damping: f64,
}

impl LmOutcome {
    /// `(JᵀJ + λ·D)⁻¹` at the optimum, with the same diagonal scaling the
    /// solver uses.
    pub fn damped_curvature_inverse(&self) -> Option<DMatrix<f64>> {
        let a = self.jacobian.transpose() * &self.jacobian;
        let m = a.clone() + DMatrix::from_diagonal(&marquardt_diagonal(&a)) * self.damping;
        m.try_inverse()
    }
}

/// Forward-difference Jacobian. Falls back to a backward difference for a
/// parameter whose forward step leaves the residual domain.
pub fn forward_jacobian<F>(f: &F, x: &DVector<f64>, r0: &DVector<f64>, rel_step: f64) -> Option<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        let h = rel_step * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let column = match f(&probe) {
            Some(r) if r.len() == r0.len() => (r - r0) / h,
            _ => {
                probe[j] = x[j] - h;
                match f(&probe) {
                    Some(r) if r.len() == r0.len() => (r0 - r) / h,
                    _ => return None,
                }
            }
        };
        jac.set_column(j, &column);
        probe[j] = x[j];
    }
    Some(jac)
}

fn marquardt_diagonal(a: &DMatrix<f64>) -> DVector<f64> {
    let d = a.diagonal();
    let floor = (d.max() * 1e-12).max(f64::MIN_POSITIVE);
    d.map(|v| v.max(floor))
}

fn solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = m.clone().cholesky() {
        return Some(chol.solve(rhs));
    }
    m.lu().solve(rhs)
}

fn is_rank_deficient(jac: &DMatrix<f64>, tol: f64) -> bool {
    let sv = jac.clone().svd(false, false).singular_values;
    let max = sv.max();
    !(max > 0.0) || sv.min() < tol * max
}

pub fn minimize<F>(f: F, x0: DVector<f64>, cfg: &LmConfig) -> Result<LmOutcome>
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let mut x = x0;
    let mut r = f(&x).ok_or_else(|| Error::InvalidInput("residuals undefined at the initial parameters".into()))?;
    let mut cost = r.norm_squared();
    let mut jac = forward_jacobian(&f, &x, &r, cfg.fd_step)
        .ok_or_else(|| Error::InvalidInput("Jacobian undefined at the initial parameters".into()))?;
    let mut damping = cfg.initial_damping;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let gradient = jac.transpose() * &r;
        if gradient.amax() == 0.0 {
            converged = true;
            break;
        }
        let normal = jac.transpose() * &jac;
        let diag = marquardt_diagonal(&normal);
        let neg_gradient = -gradient;

        let mut accepted = false;
        loop {
            let m = normal.clone() + DMatrix::from_diagonal(&diag) * damping;
            let Some(step) = solve(m, &neg_gradient) else {
                damping *= cfg.damping_factor;
                if damping > 1e30 {
                    break;
                }
                continue;
            };
            if step.amax() < cfg.step_tolerance {
                converged = true;
                break;
            }
            let candidate = &x + &step;
            match f(&candidate) {
                Some(r_new) if r_new.len() == r.len() && r_new.norm_squared() < cost => {
                    let new_cost = r_new.norm_squared();
                    let rel = (cost - new_cost) / cost;
                    x = candidate;
                    r = r_new;
                    cost = new_cost;
                    damping /= cfg.damping_factor;
                    accepted = true;
                    if rel < cfg.cost_tolerance {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    damping *= cfg.damping_factor;
                    if damping > 1e30 {
                        break;
                    }
                }
            }
        }
        if accepted {
            match forward_jacobian(&f, &x, &r, cfg.fd_step) {
                Some(j) => jac = j,
                None => break,
            }
        }
        if converged || !accepted {
            break;
        }
    }

    let rank_deficient = is_rank_deficient(&jac, cfg.rank_tolerance);
    Ok(LmOutcome {
        params: x,
        residuals: r,
        jacobian: jac,
        cost,
        iterations,
        converged: converged && !rank_deficient,
        rank_deficient,
        damping,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_rosenbrock() {
        let f = |x: &DVector<f64>| Some(DVector::from_vec(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]));
        let out = minimize(f, DVector::from_vec(vec![-1.2, 1.0]), &LmConfig::default()).unwrap();
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-6 && (out.params[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn linear_fit_matches_normal_equations() {
        // y = 2 + 3 t with a small perturbation
        let t: Vec<f64> = (0..8).map(f64::from).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.0 + 3.0 * t + 0.1 * (t * 1.7).sin()).collect();
        let f = |p: &DVector<f64>| Some(DVector::from_iterator(8, t.iter().zip(&y).map(|(t, y)| p[0] + p[1] * t - y)));
        let out = minimize(f, DVector::from_vec(vec![0.0, 0.0]), &LmConfig::default()).unwrap();
        let a = DMatrix::from_fn(8, 2, |i, j| if j == 0 { 1.0 } else { t[i] });
        let exact = (a.transpose() * &a).try_inverse().unwrap() * a.transpose() * DVector::from_vec(y.clone());
        assert!((out.params - exact).amax() < 1e-8);
    }

    #[test]
    fn zero_residual_start_stays_put() {
        let f = |x: &DVector<f64>| Some(DVector::from_vec(vec![x[0] - 3.0, 2.0 * (x[1] + 1.0)]));
        let out = minimize(f, DVector::from_vec(vec![3.0, -1.0]), &LmConfig::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.params, DVector::from_vec(vec![3.0, -1.0]));
    }

    #[test]
    fn flags_rank_deficiency() {
        // second parameter has no effect
        let f = |x: &DVector<f64>| Some(DVector::from_vec(vec![x[0] - 1.0, 2.0 * x[0] + 4.0]));
        let out = minimize(f, DVector::from_vec(vec![0.0, 5.0]), &LmConfig::default()).unwrap();
        assert!(out.rank_deficient);
        assert!(!out.converged);
        assert_eq!(out.params[1], 5.0);
    }

    #[test]
    fn rejects_steps_outside_domain() {
        // minimum of (x - (-1))² lies outside x > 0
        let f = |x: &DVector<f64>| (x[0] > 0.0).then(|| DVector::from_vec(vec![x[0] + 1.0]));
        let out = minimize(f, DVector::from_vec(vec![2.0]), &LmConfig::default()).unwrap();
        assert!(out.params[0] > 0.0);
        assert!(out.cost < 9.0);
    }

    #[test]
    fn undefined_start_is_an_error() {
        let f = |_: &DVector<f64>| None;
        assert!(minimize(f, DVector::from_vec(vec![1.0]), &LmConfig::default()).is_err());
    }
}
