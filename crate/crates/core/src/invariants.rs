//! Richardson complex moments and Stokes invariant quantities.
//!
//! Moments are computed two ways: the multilinear coefficient sum over
//! compositions, and a trapezoidal contour integral on `|ξ| = 1` that serves
//! as an independent oracle.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal_map::{complex_pairs, PolynomialMap};
use crate::error::{FlowError, Result};

/// Default `M_k ≠ 0` threshold, relative to `M_0`.
pub const N0_RELATIVE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    #[serde(with = "complex_pairs")]
    pub moments: Vec<Complex64>,
    pub n0: Option<usize>,
    pub tolerance: f64,
}

impl MomentVector {
    /// All moments `M_0..M_{n-1}` of `map`, with `n0` at the default
    /// tolerance.
    pub fn of(map: &PolynomialMap) -> Self {
        let moments: Vec<Complex64> = (0..map.len())
            .map(|k| richardson_moment(map, k).expect("k < n"))
            .collect();
        Self::from_moments(moments)
    }

    pub fn from_moments(moments: Vec<Complex64>) -> Self {
        let tolerance = N0_RELATIVE_TOL * moments.first().map_or(1.0, |m| m.norm().max(f64::MIN_POSITIVE));
        let n0 = n0_of_slice(&moments, tolerance);
        Self { moments, n0, tolerance }
    }

    pub fn m0(&self) -> f64 {
        self.moments[0].re
    }

    pub fn get(&self, k: usize) -> Complex64 {
        self.moments.get(k).copied().unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StokesInvariants {
    #[serde(with = "complex_pairs")]
    pub values: Vec<Complex64>,
}

impl StokesInvariants {
    pub fn of(map: &PolynomialMap) -> Self {
        let values = (0..map.len()).map(|k| stokes_invariant(map, k).expect("k < n")).collect();
        Self { values }
    }

    pub fn c0(&self) -> f64 {
        self.values[0].re
    }

    pub fn get(&self, k: usize) -> Complex64 {
        self.values.get(k).copied().unwrap_or_default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailWeight {
    pub g: f64,
}

/// `g = Σ_{i≥2} i |a_i|²`, so that `M_0 = a_1² + g`.
pub fn tail_weight(map: &PolynomialMap) -> TailWeight {
    let g = map
        .coeffs()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| (i + 1) as f64 * c.norm_sqr())
        .sum();
    TailWeight { g }
}

fn check_index(map: &PolynomialMap, k: usize) -> Result<()> {
    if k >= map.len() {
        return Err(FlowError::IndexOutOfRange { k, n: map.len() });
    }
    Ok(())
}

/// Visits every composition `(i_1, …, i_parts)` with parts in `[1, n]` and
/// total `≤ n`.
fn for_each_composition(parts: usize, n: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, parts: usize, remaining: usize, visit: &mut impl FnMut(&[usize])) {
        if buf.len() == parts {
            visit(buf);
            return;
        }
        let still = parts - buf.len() - 1;
        // leave room for the remaining parts, each at least 1
        for i in 1..=remaining.saturating_sub(still) {
            buf.push(i);
            rec(buf, parts, remaining - i, visit);
            buf.pop();
        }
    }
    if parts > n {
        return;
    }
    let mut buf = Vec::with_capacity(parts);
    rec(&mut buf, parts, n, visit);
}

/// `M_k = Σ i_1 a_{i_1} ⋯ a_{i_{k+1}} conj(a_{i_1+⋯+i_{k+1}})` over all
/// compositions with total at most `n`.
pub fn richardson_moment(map: &PolynomialMap, k: usize) -> Result<Complex64> {
    check_index(map, k)?;
    let n = map.len();
    let mut total = Complex64::new(0.0, 0.0);
    for_each_composition(k + 1, n, &mut |idx| {
        let s: usize = idx.iter().sum();
        let prod = idx.iter().fold(Complex64::new(idx[0] as f64, 0.0), |p, &i| p * map.coeff(i));
        total += prod * map.coeff(s).conj();
    });
    Ok(total)
}

/// Wirtinger gradient of a real-analytic function of the coefficients:
/// `dz[m-1] = ∂F/∂a_m`, `dzbar[m-1] = ∂F/∂ā_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct WirtingerGradient {
    pub value: Complex64,
    pub dz: Vec<Complex64>,
    pub dzbar: Vec<Complex64>,
}

impl WirtingerGradient {
    /// Directional derivative along a coefficient velocity `v`.
    pub fn directional(&self, v: &[Complex64]) -> Complex64 {
        self.dz
            .iter()
            .zip(&self.dzbar)
            .zip(v)
            .map(|((dz, dzb), vi)| dz * vi + dzb * vi.conj())
            .sum()
    }

    /// Partial derivatives with respect to `Re a_m` and `Im a_m`.
    pub fn real_partials(&self, m: usize) -> (Complex64, Complex64) {
        let (dz, dzb) = (self.dz[m - 1], self.dzbar[m - 1]);
        (dz + dzb, Complex64::i() * (dz - dzb))
    }
}

/// `M_k` together with its Wirtinger gradient, term by term from the
/// composition sum.
pub fn richardson_moment_gradient(map: &PolynomialMap, k: usize) -> Result<WirtingerGradient> {
    check_index(map, k)?;
    let n = map.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut value = zero;
    let mut dz = vec![zero; n];
    let mut dzbar = vec![zero; n];
    for_each_composition(k + 1, n, &mut |idx| {
        let s: usize = idx.iter().sum();
        let weight = idx[0] as f64;
        let tail = map.coeff(s).conj();
        let prod = idx.iter().fold(Complex64::new(weight, 0.0), |p, &i| p * map.coeff(i));
        value += prod * tail;
        dzbar[s - 1] += prod;
        for skip in 0..idx.len() {
            let partial = idx
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != skip)
                .fold(Complex64::new(weight, 0.0), |p, (_, &i)| p * map.coeff(i));
            dz[idx[skip] - 1] += partial * tail;
        }
    });
    Ok(WirtingerGradient { value, dz, dzbar })
}

/// Trapezoidal evaluation of `(1/2πi) ∮ f^k f′ f̄(1/ξ) dξ` on the unit circle.
///
/// On `|ξ| = 1`, `f̄(1/ξ) = conj(f(ξ))` and `dξ = iξ dθ`, so the integral is
/// the mean of `f^k f′ conj(f) ξ` over equispaced samples. The rule is exact
/// for the trigonometric polynomial involved once `samples > n(k+2)`.
pub fn moment_contour_oracle(map: &PolynomialMap, k: usize, samples: usize) -> Result<Complex64> {
    let n = map.len();
    let needed = 4 * n * (k + 2);
    if samples < needed || !samples.is_power_of_two() {
        return Err(FlowError::InvalidInput(format!(
            "contour oracle needs a power-of-two sample count >= {needed}, got {samples}"
        )));
    }
    let d1 = map.derivative(1)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..samples {
        let xi = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / samples as f64);
        let f = map.evaluate(xi);
        let fp = crate::conformal_map::eval_power_series(&d1, xi);
        acc += f.powu(k as u32) * fp * f.conj() * xi;
    }
    Ok(acc / samples as f64)
}

/// Smallest power-of-two sample count accepted by the contour oracle.
pub fn oracle_samples(n: usize, k: usize) -> usize {
    (4 * n * (k + 2)).next_power_of_two()
}

/// `C_k = Σ_{j=1}^{n-k} j a_j conj(a_{j+k})`.
pub fn stokes_invariant(map: &PolynomialMap, k: usize) -> Result<Complex64> {
    check_index(map, k)?;
    let n = map.len();
    Ok((1..=n - k).map(|j| map.coeff(j) * map.coeff(j + k).conj() * j as f64).sum())
}

/// `C_k` as the mean of `ξ f′(ξ) conj(f(ξ)) ξ^k` over equispaced samples of
/// the unit circle; exact once `samples > 2n`.
pub fn stokes_contour_oracle(map: &PolynomialMap, k: usize, samples: usize) -> Result<Complex64> {
    check_index(map, k)?;
    let needed = 4 * map.len();
    if samples < needed {
        return Err(FlowError::InvalidInput(format!("contour oracle needs >= {needed} samples, got {samples}")));
    }
    let d1 = map.derivative(1)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..samples {
        let xi = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / samples as f64);
        let fp = crate::conformal_map::eval_power_series(&d1, xi);
        acc += xi * fp * map.evaluate(xi).conj() * xi.powu(k as u32);
    }
    Ok(acc / samples as f64)
}

pub fn stokes_invariant_gradient(map: &PolynomialMap, k: usize) -> Result<WirtingerGradient> {
    check_index(map, k)?;
    let n = map.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut dz = vec![zero; n];
    let mut dzbar = vec![zero; n];
    let mut value = zero;
    for j in 1..=n - k {
        value += map.coeff(j) * map.coeff(j + k).conj() * j as f64;
        dz[j - 1] += map.coeff(j + k).conj() * j as f64;
        dzbar[j + k - 1] += map.coeff(j) * j as f64;
    }
    Ok(WirtingerGradient { value, dz, dzbar })
}

/// Index of the first moment (k ≥ 1) exceeding `tol` in modulus.
pub fn n0_of(moments: &MomentVector, tol: f64) -> Option<usize> {
    n0_of_slice(&moments.moments, tol)
}

fn n0_of_slice(moments: &[Complex64], tol: f64) -> Option<usize> {
    moments.iter().enumerate().skip(1).find(|(_, m)| m.norm() > tol).map(|(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn moment_examples() {
        let id = PolynomialMap::identity();
        assert_eq!(richardson_moment(&id, 0).unwrap(), c(1.0, 0.0));
        let m = PolynomialMap::from_real(&[1.0, 0.2]).unwrap();
        assert!((richardson_moment(&m, 1).unwrap() - c(0.2, 0.0)).norm() < 1e-15);
        assert!((richardson_moment(&m, 0).unwrap() - c(1.08, 0.0)).norm() < 1e-15);
        let m = PolynomialMap::from_real(&[1.0, 0.0, 0.1]).unwrap();
        assert!((richardson_moment(&m, 2).unwrap() - c(0.1, 0.0)).norm() < 1e-15);
        assert!(matches!(richardson_moment(&m, 3), Err(FlowError::IndexOutOfRange { k: 3, n: 3 })));
    }

    #[test]
    fn oracle_examples() {
        let id = PolynomialMap::identity();
        let v = moment_contour_oracle(&id, 0, oracle_samples(1, 0)).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-12);
        let m = PolynomialMap::from_real(&[1.0, 0.2]).unwrap();
        let v = moment_contour_oracle(&m, 1, 64).unwrap();
        assert!((v - c(0.2, 0.0)).norm() < 1e-12);
        assert!(moment_contour_oracle(&m, 1, 12).is_err());
        assert!(moment_contour_oracle(&m, 1, 48).is_err());
    }

    #[test]
    fn composition_count_matches_binomial() {
        // compositions of totals ≤ n into p parts: C(n, p)
        for n in 1..8 {
            for p in 1..=n {
                let mut count = 0;
                for_each_composition(p, n, &mut |_| count += 1);
                let binom = (0..p).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
                assert_eq!(count, binom, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn stokes_examples() {
        let id = PolynomialMap::identity();
        assert_eq!(stokes_invariant(&id, 0).unwrap(), c(1.0, 0.0));
        let m = PolynomialMap::from_real(&[1.0, 0.1]).unwrap();
        assert!((stokes_invariant(&m, 1).unwrap() - c(0.1, 0.0)).norm() < 1e-15);
        assert!((stokes_invariant(&m, 0).unwrap() - c(1.02, 0.0)).norm() < 1e-15);
        assert!(stokes_invariant(&m, 2).is_err());
    }

    #[test]
    fn stokes_oracle_agrees() {
        let m = PolynomialMap::new(vec![c(1.0, 0.0), c(0.1, -0.03), c(0.02, 0.05), c(0.0, 0.01)]).unwrap();
        for k in 0..4 {
            let d = stokes_contour_oracle(&m, k, 64).unwrap() - stokes_invariant(&m, k).unwrap();
            assert!(d.norm() < 1e-15, "k={k}");
        }
        assert!(stokes_contour_oracle(&m, 0, 8).is_err());
    }

    #[test]
    fn n0_examples() {
        let mv = |v: &[f64]| MomentVector::from_moments(v.iter().map(|&x| c(x, 0.0)).collect());
        assert_eq!(n0_of(&mv(&[1.02, 0.2, 0.05]), 1e-9), Some(1));
        assert_eq!(n0_of(&mv(&[1.0, 0.0, 0.3]), 1e-9), Some(2));
        assert_eq!(n0_of(&mv(&[1.0, 1e-12, 1e-12]), 1e-9), None);
        assert_eq!(mv(&[1.0, 0.0, 0.3]).n0, Some(2));
    }

    #[test]
    fn tail_weight_identity() {
        let m = PolynomialMap::new(vec![c(1.3, 0.0), c(0.1, -0.2), c(0.03, 0.01)]).unwrap();
        let g = tail_weight(&m).g;
        let m0 = richardson_moment(&m, 0).unwrap();
        assert!((m0.re - (1.69 + g)).abs() < 1e-14);
        assert_eq!(m0.im, 0.0);
    }

    #[test]
    fn wirtinger_gradients_match_finite_differences() {
        let m = PolynomialMap::new(vec![c(1.1, 0.0), c(0.1, 0.05), c(-0.03, 0.02), c(0.01, 0.004)]).unwrap();
        let h = 1e-6;
        for k in 0..4 {
            let grad = richardson_moment_gradient(&m, k).unwrap();
            let sgrad = stokes_invariant_gradient(&m, k).unwrap();
            assert!((grad.value - richardson_moment(&m, k).unwrap()).norm() < 1e-15);
            for idx in 1..=4 {
                for (dir, unit) in [(0, c(1.0, 0.0)), (1, c(0.0, 1.0))] {
                    let bump = |s: f64| {
                        let mut cs = m.coeffs().to_vec();
                        cs[idx - 1] += unit * s;
                        PolynomialMap::new(cs).ok()
                    };
                    if idx == 1 && dir == 1 {
                        continue;
                    }
                    let (p, q) = (bump(h).unwrap(), bump(-h).unwrap());
                    let fd = (richardson_moment(&p, k).unwrap() - richardson_moment(&q, k).unwrap()) / (2.0 * h);
                    let (dre, dim) = grad.real_partials(idx);
                    let analytic = if dir == 0 { dre } else { dim };
                    assert!((fd - analytic).norm() < 1e-8, "M_{k} a_{idx} dir {dir}: {fd} vs {analytic}");
                    let fd = (stokes_invariant(&p, k).unwrap() - stokes_invariant(&q, k).unwrap()) / (2.0 * h);
                    let (dre, dim) = sgrad.real_partials(idx);
                    let analytic = if dir == 0 { dre } else { dim };
                    assert!((fd - analytic).norm() < 1e-8, "C_{k} a_{idx} dir {dir}");
                }
            }
        }
    }
}
