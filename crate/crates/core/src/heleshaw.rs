//! Injection-driven Hele-Shaw flow (Polubarinova-Galin equation) for
//! polynomial maps.
//!
//! Two independent evolutions are provided: an ODE for the coefficients
//! obtained by matching Fourier modes of `Re[f_t · conj(ξ f′)] = 1` on the
//! unit circle, and Newton continuation on the moment constraints
//! `M_0 = M_0(0) + 2t`, `M_k = M_k(0)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::conformal_map::PolynomialMap;
use crate::error::{FlowError, Result};
use crate::invariants::{richardson_moment_gradient, MomentVector};
use crate::newton::{
    continuation_trajectory, derivative_roots_clear, equilibrated_condition, full_univalence, stack_real_system,
    ConstraintSystem, CONDITION_LIMIT, MIN_STEP,
};
use crate::trajectory::{complex_from_real, from_real, to_real, EvolutionConfig, Method, Model, Trajectory, TrajectorySample};

/// Real mode residuals of the linearised boundary condition for a
/// coefficient velocity `v` (`v[0]` real): mode 0 gives `Re Σ k ā_k v_k`,
/// mode `m ≥ 1` gives `Σ_k k ā_k v_{k+m} + Σ_j (j+m) a_{j+m} conj(v_j)` split
/// into real and imaginary parts.
fn pg_modes(a: &[Complex64], v: &[Complex64]) -> Vec<f64> {
    let n = a.len();
    let mut out = Vec::with_capacity(2 * n - 1);
    let mode0: f64 = (1..=n).map(|k| (a[k - 1].conj() * v[k - 1]).re * k as f64).sum();
    out.push(mode0);
    for m in 1..n {
        let mut c = Complex64::new(0.0, 0.0);
        for k in 1..=n - m {
            c += a[k - 1].conj() * v[k + m - 1] * k as f64;
            c += a[k + m - 1] * v[k - 1].conj() * (k + m) as f64;
        }
        out.push(c.re);
        out.push(c.im);
    }
    out
}

fn pg_matrix(map: &PolynomialMap) -> DMatrix<f64> {
    let a = map.coeffs();
    let n = a.len();
    let dim = 2 * n - 1;
    let mut matrix = DMatrix::zeros(dim, dim);
    let zero = Complex64::new(0.0, 0.0);
    for col in 0..dim {
        let mut v = vec![zero; n];
        if col == 0 {
            v[0] = Complex64::new(1.0, 0.0);
        } else {
            let m = (col + 3) / 2;
            v[m - 1] = if col % 2 == 1 { Complex64::new(1.0, 0.0) } else { Complex64::i() };
        }
        for (row, value) in pg_modes(a, &v).into_iter().enumerate() {
            matrix[(row, col)] = value;
        }
    }
    matrix
}

fn pg_rhs(n: usize) -> DVector<f64> {
    let mut rhs = DVector::zeros(2 * n - 1);
    rhs[0] = 1.0;
    rhs
}

/// Linear system `A ẋ = b` for the coefficient velocity in the real layout
/// `(ȧ_1, Re ȧ_2, Im ȧ_2, …)`, equations ordered mode 0 then `(Re, Im)` of
/// modes `1..n-1`. Fails when the equilibrated condition number exceeds
/// `1e12`.
pub fn assemble_pg_system(map: &PolynomialMap) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let matrix = pg_matrix(map);
    let condition = equilibrated_condition(&matrix);
    if condition > CONDITION_LIMIT {
        return Err(FlowError::Breakdown {
            t: f64::NAN,
            reason: format!("mode-matching system singular (condition {condition:.3e})"),
        });
    }
    Ok((matrix, pg_rhs(map.len())))
}

/// Coefficient velocity `(ȧ_1, …, ȧ_n)` of the strong solution through `map`.
pub fn pg_velocity(map: &PolynomialMap) -> Result<Vec<Complex64>> {
    Ok(complex_from_real(&velocity_real(map)?))
}

fn velocity_real(map: &PolynomialMap) -> Result<Vec<f64>> {
    let matrix = pg_matrix(map);
    let sol = matrix.lu().solve(&pg_rhs(map.len())).ok_or_else(|| FlowError::Breakdown {
        t: f64::NAN,
        reason: "mode-matching system singular".into(),
    })?;
    Ok(sol.iter().copied().collect())
}

fn rhs(x: &[f64]) -> Result<Vec<f64>> {
    velocity_real(&from_real(x)?)
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn rk4_step(x: &[f64], h: f64) -> Result<Vec<f64>> {
    // the system is autonomous
    let k1 = rhs(x)?;
    let k2 = rhs(&axpy(x, h / 2.0, &k1))?;
    let k3 = rhs(&axpy(x, h / 2.0, &k2))?;
    let k4 = rhs(&axpy(x, h, &k3))?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Per-component error scale: the modulus of the complex coefficient the
/// component belongs to.
fn error_scales(x: &[f64], y: &[f64]) -> Vec<f64> {
    let modulus = |v: &[f64], i: usize| -> f64 {
        if i == 0 {
            v[0].abs()
        } else {
            let base = if i % 2 == 1 { i } else { i - 1 };
            v[base].hypot(v[base + 1])
        }
    };
    (0..x.len()).map(|i| modulus(x, i).max(modulus(y, i)) + 1e-300).collect()
}

struct StepOutcome {
    x: Vec<f64>,
    error: f64,
}

/// One RK4 step with step doubling; the returned state carries the
/// Richardson correction and `error` is the scaled local error estimate.
fn doubled_step(x: &[f64], h: f64, tol: f64) -> Result<StepOutcome> {
    let full = rk4_step(x, h)?;
    let half = rk4_step(&rk4_step(x, h / 2.0)?, h / 2.0)?;
    let scales = error_scales(x, &half);
    let error = half
        .iter()
        .zip(&full)
        .zip(&scales)
        .map(|((a, b), s)| ((a - b) / 15.0).abs() / (tol * s))
        .fold(0.0, f64::max);
    let x = half.iter().zip(&full).map(|(a, b)| a + (a - b) / 15.0).collect();
    Ok(StepOutcome { x, error })
}

/// Integrates the mode-matched coefficient ODE with adaptive RK4.
pub fn evolve_ode(map: &PolynomialMap, config: &EvolutionConfig) -> Result<Trajectory> {
    config.validate()?;
    let (ok, why) = full_univalence(map);
    if !ok {
        return Err(FlowError::InvalidInput(format!("initial map is not univalent: {why}")));
    }
    assemble_pg_system(map)?;
    let reference = MomentVector::of(map).moments;
    let tol = config.tolerance;
    let mut x = to_real(map);
    let mut t = 0.0;
    let mut h = config.initial_step;
    let mut last_step = 0.0;
    let mut samples = vec![TrajectorySample::build(Model::HeleShaw, 0.0, map.clone(), &reference, true, 0.0)];
    let mut breakdown = None;

    'records: for target in config.record_times() {
        while t < target {
            let clipped = h >= target - t;
            let step = if clipped { target - t } else { h };
            let outcome = match doubled_step(&x, step, tol) {
                Ok(o) => o,
                Err(FlowError::Breakdown { reason, .. }) => {
                    breakdown = Some(FlowError::Breakdown { t, reason });
                    break 'records;
                }
                Err(FlowError::InvalidInput(reason)) => {
                    // a_1 left the positive axis inside a stage
                    breakdown = Some(FlowError::Breakdown { t, reason });
                    break 'records;
                }
                Err(e) => return Err(e),
            };
            let factor = if outcome.error == 0.0 { config.max_step_growth } else { 0.9 * outcome.error.powf(-0.2) };
            if outcome.error <= 1.0 && outcome.x.iter().all(|v| v.is_finite()) {
                let candidate = from_real(&outcome.x);
                let candidate = match candidate {
                    Ok(c) if derivative_roots_clear(&c) => c,
                    _ => {
                        breakdown = Some(FlowError::Breakdown {
                            t: t + step,
                            reason: "root of f' reached the closed unit disk".into(),
                        });
                        break 'records;
                    }
                };
                let condition = equilibrated_condition(&pg_matrix(&candidate));
                if condition > CONDITION_LIMIT {
                    breakdown = Some(FlowError::Breakdown {
                        t: t + step,
                        reason: format!("mode-matching system singular (condition {condition:.3e})"),
                    });
                    break 'records;
                }
                x = outcome.x;
                t = if clipped { target } else { t + step };
                last_step = step;
                if !clipped {
                    h = step * factor.clamp(0.2, config.max_step_growth);
                }
            } else {
                h = step * factor.clamp(0.1, 0.9);
                if h < MIN_STEP {
                    breakdown = Some(FlowError::StepUnderflow { t, step: h });
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
        samples.push(TrajectorySample::build(Model::HeleShaw, t, map_t, &reference, true, last_step));
    }
    Ok(Trajectory { model: Model::HeleShaw, samples, breakdown })
}

/// Moment constraints `M_0(a) = M_0(0) + 2t`, `M_k(a) = M_k(0)`.
pub struct MomentSystem {
    pub initial: Vec<Complex64>,
}

impl ConstraintSystem for MomentSystem {
    fn residual_jacobian(&self, x: &[f64], t: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let map = from_real(x)?;
        let grads = (0..map.len())
            .map(|k| richardson_moment_gradient(&map, k))
            .collect::<Result<Vec<_>>>()?;
        let mut targets = self.initial.clone();
        targets[0] += 2.0 * t;
        Ok(stack_real_system(&grads, &targets))
    }

    /// Tangent predictor: `ẋ = J⁻¹ (2, 0, …, 0)ᵀ`.
    fn predict(&self, x: &[f64], _t: f64, dt: f64, jacobian: &DMatrix<f64>) -> Vec<f64> {
        let mut rate = DVector::zeros(x.len());
        rate[0] = 2.0;
        match jacobian.clone().lu().solve(&rate) {
            Some(v) => axpy(x, dt, v.as_slice()),
            None => x.to_vec(),
        }
    }
}

/// Traces the strong solution through the moment constraints.
pub fn evolve_continuation(map: &PolynomialMap, config: &EvolutionConfig) -> Result<Trajectory> {
    let initial = MomentVector::of(map).moments;
    let system = MomentSystem { initial: initial.clone() };
    continuation_trajectory(Model::HeleShaw, map, config, &system, &initial)
}

pub fn evolve(map: &PolynomialMap, config: &EvolutionConfig) -> Result<Trajectory> {
    match config.method {
        Method::Ode => evolve_ode(map, config),
        Method::Continuation => evolve_continuation(map, config),
    }
}
