//! Injection-driven Stokes flow traced through its conserved quantities.
//!
//! A polynomial trajectory is characterised by `C_0(a) = C_0(0) + 2t` and
//! `C_k(a) = C_k(0)` for `1 ≤ k ≤ n−1`; the coefficients are recovered at
//! each time by Newton continuation.

use nalgebra::{DMatrix, DVector};

use crate::conformal_map::PolynomialMap;
use crate::error::{FlowError, Result};
use crate::invariants::{stokes_invariant_gradient, StokesInvariants};
use crate::newton::{continuation_trajectory, stack_real_system, ConstraintSystem};
use crate::trajectory::{from_real, EvolutionConfig, Model, Trajectory};

/// Residual of the Stokes invariant system in the real layout: one real
/// entry for `C_0`, then `(Re, Im)` pairs for `C_1..C_{n-1}`.
pub fn stokes_residual(coeffs: &[f64], t: f64, targets: &StokesInvariants) -> Result<Vec<f64>> {
    let map = from_real(coeffs)?;
    if targets.values.len() != map.len() {
        return Err(FlowError::InvalidInput(format!(
            "{} targets for a degree-{} map",
            targets.values.len(),
            map.len()
        )));
    }
    Ok(StokesSystem { initial: targets.clone() }.evaluate(&map, t)?.0.iter().copied().collect())
}

pub struct StokesSystem {
    pub initial: StokesInvariants,
}

impl StokesSystem {
    fn evaluate(&self, map: &PolynomialMap, t: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let grads = (0..map.len())
            .map(|k| stokes_invariant_gradient(map, k))
            .collect::<Result<Vec<_>>>()?;
        let mut targets = self.initial.values.clone();
        targets[0] += 2.0 * t;
        Ok(stack_real_system(&grads, &targets))
    }
}

impl ConstraintSystem for StokesSystem {
    fn residual_jacobian(&self, x: &[f64], t: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.evaluate(&from_real(x)?, t)
    }

    /// `a_1 ← √(a_1² + 2Δt · a_1²/C_0)`, other coefficients held.
    fn predict(&self, x: &[f64], t: f64, dt: f64, _jacobian: &DMatrix<f64>) -> Vec<f64> {
        let c0 = self.initial.c0() + 2.0 * t;
        let mut guess = x.to_vec();
        guess[0] = (x[0] * x[0] + 2.0 * dt * x[0] * x[0] / c0).sqrt();
        guess
    }
}

pub fn evolve_stokes(map: &PolynomialMap, config: &EvolutionConfig) -> Result<Trajectory> {
    let initial = StokesInvariants::of(map);
    let reference = initial.values.clone();
    let system = StokesSystem { initial };
    continuation_trajectory(Model::Stokes, map, config, &system, &reference)
}

/// `a_1(t)` on the real `n = 2` branch through `[a_1, a_2]`:
/// `a_1² = [(C_0 + 2t) + √((C_0 + 2t)² − 8|C_1|²)]/2`.
pub fn quadratic_branch_a1(c0: f64, c1_modulus: f64, t: f64) -> f64 {
    let s = c0 + 2.0 * t;
    ((s + (s * s - 8.0 * c1_modulus * c1_modulus).sqrt()) / 2.0).sqrt()
}
