//! Newton continuation in time for conserved-quantity constraint systems.
//!
//! Both flows are traced by solving `F(x; t) = 0` for the real coefficient
//! coordinates `x` at successive times, warm-started from the previous
//! solution.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::conformal_map::{polynomial_roots, univalence_check, PolynomialMap, DEFAULT_SAMPLES, ROOT_MARGIN};
use crate::error::{FlowError, Result};
use crate::invariants::WirtingerGradient;
use crate::trajectory::{from_real, to_real, EvolutionConfig, Model, Trajectory, TrajectorySample};

/// Condition number (after row/column equilibration) beyond which a linear
/// system is declared singular.
pub const CONDITION_LIMIT: f64 = 1e12;
pub const MIN_STEP: f64 = 1e-12;
const MAX_NEWTON_ITERATIONS: usize = 30;

pub trait ConstraintSystem {
    /// Residual `F(x; t)` and Jacobian `∂F/∂x`.
    fn residual_jacobian(&self, x: &[f64], t: f64) -> Result<(DVector<f64>, DMatrix<f64>)>;

    /// Initial guess at `t + dt` from the converged state at `t`.
    fn predict(&self, x: &[f64], t: f64, dt: f64, jacobian: &DMatrix<f64>) -> Vec<f64>;
}

/// Stacks complex constraint values and their Wirtinger gradients into the
/// real layout: entry 0 is `Re F_0`, then `(Re F_k, Im F_k)` for `k ≥ 1`;
/// columns follow `(a_1, Re a_2, Im a_2, …)`.
pub fn stack_real_system(grads: &[WirtingerGradient], targets: &[Complex64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = grads.len();
    let dim = 2 * n - 1;
    let mut f = DVector::zeros(dim);
    let mut j = DMatrix::zeros(dim, dim);
    for (k, (grad, target)) in grads.iter().zip(targets).enumerate() {
        let diff = grad.value - target;
        let rows: Vec<(usize, fn(Complex64) -> f64)> = if k == 0 {
            vec![(0, |z: Complex64| z.re)]
        } else {
            vec![(2 * k - 1, |z: Complex64| z.re), (2 * k, |z: Complex64| z.im)]
        };
        for (row, part) in rows {
            f[row] = part(diff);
            for m in 1..=n {
                let (d_re, d_im) = grad.real_partials(m);
                if m == 1 {
                    j[(row, 0)] = part(d_re);
                } else {
                    j[(row, 2 * m - 3)] = part(d_re);
                    j[(row, 2 * m - 2)] = part(d_im);
                }
            }
        }
    }
    (f, j)
}

/// 2-norm condition number after scaling rows and columns to unit max-abs.
pub fn equilibrated_condition(matrix: &DMatrix<f64>) -> f64 {
    let mut m = matrix.clone();
    for mut row in m.row_iter_mut() {
        let s = row.amax();
        if s > 0.0 {
            row /= s;
        }
    }
    for mut col in m.column_iter_mut() {
        let s = col.amax();
        if s > 0.0 {
            col /= s;
        }
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub jacobian: DMatrix<f64>,
}

/// Plain Newton iteration to `‖F‖_∞ ≤ tol`, followed by at most two
/// polishing steps that are kept only while they reduce the residual.
pub fn newton_solve(system: &dyn ConstraintSystem, x0: &[f64], t: f64, tol: f64) -> Result<NewtonOutcome> {
    let mut x = x0.to_vec();
    let (mut f, mut jac) = system.residual_jacobian(&x, t)?;
    let mut res = f.amax();
    let mut iterations = 0;
    let mut polish = 0;
    while iterations < MAX_NEWTON_ITERATIONS {
        if res <= tol {
            if polish == 2 {
                break;
            }
            polish += 1;
        }
        let delta = jac
            .clone()
            .lu()
            .solve(&(-&f))
            .ok_or(FlowError::SingularJacobian { t, condition: f64::INFINITY })?;
        let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
        if !(trial[0] > 0.0) || trial.iter().any(|v| !v.is_finite()) {
            break;
        }
        let (f_new, jac_new) = system.residual_jacobian(&trial, t)?;
        let res_new = f_new.amax();
        iterations += 1;
        if res <= tol && res_new >= res {
            break;
        }
        x = trial;
        f = f_new;
        jac = jac_new;
        res = res_new;
    }
    if res <= tol {
        Ok(NewtonOutcome { x, residual: res, iterations, jacobian: jac })
    } else {
        Err(FlowError::NewtonDivergence { t, last_good_t: f64::NAN, residual: res })
    }
}

/// Cheap local-univalence guard applied after every accepted step.
pub(crate) fn derivative_roots_clear(map: &PolynomialMap) -> bool {
    map.derivative(1)
        .map(|d| polynomial_roots(&d).iter().all(|r| r.norm() > 1.0 + ROOT_MARGIN))
        .unwrap_or(false)
}

pub(crate) fn full_univalence(map: &PolynomialMap) -> (bool, String) {
    match univalence_check(map, DEFAULT_SAMPLES.max(8 * map.degree())) {
        Ok(r) => (r.univalent, r.failing_margin().unwrap_or_default()),
        Err(e) => (false, e.to_string()),
    }
}

/// Traces `F(x; t) = 0` from `t = 0` to `config.t_end`, emitting a sample
/// at every record time.
pub fn continuation_trajectory(
    model: Model,
    map: &PolynomialMap,
    config: &EvolutionConfig,
    system: &dyn ConstraintSystem,
    reference: &[Complex64],
) -> Result<Trajectory> {
    config.validate()?;
    let (ok, why) = full_univalence(map);
    if !ok {
        return Err(FlowError::InvalidInput(format!("initial map is not univalent: {why}")));
    }
    let tol = config.tolerance;
    let start = newton_solve(system, &to_real(map), 0.0, tol.max(1e-300)).map_err(|e| match e {
        FlowError::NewtonDivergence { residual, .. } => FlowError::InvalidInput(format!(
            "initial data does not satisfy its own constraints (residual {residual:.3e})"
        )),
        other => other,
    })?;
    let cond = equilibrated_condition(&start.jacobian);
    if cond > CONDITION_LIMIT {
        return Err(FlowError::SingularJacobian { t: 0.0, condition: cond });
    }

    let mut x = start.x;
    let mut jac = start.jacobian;
    let mut t = 0.0;
    let mut dt = config.initial_step;
    let mut samples = vec![TrajectorySample::build(model, 0.0, from_real(&x)?, reference, true, 0.0)];
    let mut breakdown = None;

    'records: for target in config.record_times() {
        while t < target {
            let clipped = dt >= target - t;
            let h = if clipped { target - t } else { dt };
            let guess = system.predict(&x, t, h, &jac);
            match newton_solve(system, &guess, t + h, tol) {
                Ok(out) => {
                    let cond = equilibrated_condition(&out.jacobian);
                    if cond > CONDITION_LIMIT {
                        breakdown = Some(FlowError::SingularJacobian { t: t + h, condition: cond });
                        break 'records;
                    }
                    let candidate = from_real(&out.x)?;
                    if !derivative_roots_clear(&candidate) {
                        breakdown = Some(FlowError::Breakdown {
                            t: t + h,
                            reason: "root of f' reached the closed unit disk".into(),
                        });
                        break 'records;
                    }
                    x = out.x;
                    jac = out.jacobian;
                    t += h;
                    if !clipped {
                        dt = (h * config.max_step_growth).min(0.5 * t.max(1.0));
                    }
                    if clipped {
                        t = target;
                    }
                }
                Err(FlowError::NewtonDivergence { residual, .. }) => {
                    dt = h / 2.0;
                    if dt < MIN_STEP {
                        breakdown = Some(FlowError::NewtonDivergence { t: t + h, last_good_t: t, residual });
                        break 'records;
                    }
                }
                Err(e) => {
                    breakdown = Some(e);
                    break 'records;
                }
            }
        }
        let map_t = from_real(&x)?;
        let (ok, why) = full_univalence(&map_t);
        if !ok {
            breakdown = Some(FlowError::Breakdown { t, reason: format!("univalence lost: {why}") });
            break;
        }
        samples.push(TrajectorySample::build(model, t, map_t, reference, true, dt));
    }
    Ok(Trajectory { model, samples, breakdown })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Circle;

    // x_0² = 1 + 2t: a one-unknown system with a known branch
    impl ConstraintSystem for Circle {
        fn residual_jacobian(&self, x: &[f64], t: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
            Ok((DVector::from_vec(vec![x[0] * x[0] - 1.0 - 2.0 * t]), DMatrix::from_element(1, 1, 2.0 * x[0])))
        }

        fn predict(&self, x: &[f64], _t: f64, _dt: f64, _j: &DMatrix<f64>) -> Vec<f64> {
            x.to_vec()
        }
    }

    #[test]
    fn newton_converges_quadratically() {
        let out = newton_solve(&Circle, &[1.0], 1.5, 1e-14).unwrap();
        assert!((out.x[0] - 2.0).abs() < 1e-15);
        assert!(out.iterations < 10);
    }

    #[test]
    fn condition_ignores_pure_scaling() {
        let m = DMatrix::from_row_slice(2, 2, &[1e8, 0.0, 0.0, 1e-6]);
        assert!((equilibrated_condition(&m) - 1.0).abs() < 1e-12);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(equilibrated_condition(&s) > 1e15);
    }

    #[test]
    fn continuation_follows_simple_branch() {
        let map = PolynomialMap::identity();
        let cfg = EvolutionConfig::new(4.0, crate::trajectory::Method::Continuation);
        let traj = continuation_trajectory(Model::HeleShaw, &map, &cfg, &Circle, &[Complex64::new(1.0, 0.0)]).unwrap();
        assert!(traj.breakdown.is_none());
        assert!((traj.last().a1() - 3.0).abs() < 1e-12);
    }
}
