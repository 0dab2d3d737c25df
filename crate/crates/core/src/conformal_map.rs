//! Polynomial conformal maps of the unit disk.
//!
//! A map `f(ξ) = a_1 ξ + a_2 ξ² + … + a_n ξⁿ` is stored by its coefficient
//! vector, index 1 first. `a_1` is real and positive. The module also
//! provides boundary geometry (modulus and curvature along `|ξ| = 1`), a
//! sampled univalence certificate and the unit-area rescaling.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FlowError, Result};

/// Coefficients smaller than this are structural zeros for degree bookkeeping.
pub const TRIM_THRESHOLD: f64 = 1e-30;
/// Margin by which every root of `f′` must clear the closed unit disk.
pub const ROOT_MARGIN: f64 = 1e-9;
/// Relative (to the maximal boundary radius) proximity threshold of the
/// sampled simplicity test.
pub const GAP_RELATIVE: f64 = 1e-10;
/// Default number of boundary samples.
pub const DEFAULT_SAMPLES: usize = 4096;
/// `|f′|` below this fraction of `a_1` on the boundary is treated as a cusp.
pub const SINGULAR_DERIVATIVE_TOL: f64 = 1e-8;

/// Imaginary residue of `a_1` that is silently dropped at construction.
const A1_IMAG_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialMap {
    coeffs: Vec<Complex64>,
}

impl PolynomialMap {
    /// Builds a map from `(a_1, …, a_n)`.
    ///
    /// `a_1` must be real and strictly positive; an imaginary part at the
    /// `1e-12` relative level is zeroed, anything larger is rejected.
    pub fn new(mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(FlowError::InvalidInput("map has no coefficients (degree 0)".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(FlowError::InvalidInput("non-finite coefficient".into()));
        }
        let a1 = coeffs[0];
        if a1.re <= 0.0 {
            return Err(FlowError::InvalidInput(format!("a_1 must be positive, got {a1}")));
        }
        if a1.im.abs() > A1_IMAG_SLACK * a1.re {
            return Err(FlowError::InvalidInput(format!("a_1 must be real, got {a1}")));
        }
        coeffs[0].im = 0.0;
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn identity() -> Self {
        Self { coeffs: vec![Complex64::new(1.0, 0.0)] }
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::from_real(&[radius])
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Structural length `n` of the coefficient vector.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree after trimming trailing near-zero coefficients.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| c.norm() >= TRIM_THRESHOLD)
            .map_or(1, |i| i + 1)
    }

    pub fn a1(&self) -> f64 {
        self.coeffs[0].re
    }

    /// `a_k` with 1-based `k`; zero beyond the stored length.
    pub fn coeff(&self, k: usize) -> Complex64 {
        if k == 0 {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs.get(k - 1).copied().unwrap_or_default()
    }

    pub fn evaluate(&self, xi: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| (acc + c) * xi)
    }

    /// Power coefficients (constant term first) of `f′` or `f″`.
    pub fn derivative(&self, order: usize) -> Result<Vec<Complex64>> {
        match order {
            1 => Ok(self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| c * (i + 1) as f64)
                .collect()),
            2 => Ok(self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * ((i + 1) * i) as f64)
                .collect()),
            _ => Err(FlowError::InvalidInput(format!("derivative order must be 1 or 2, got {order}"))),
        }
    }

    /// `f / s` for a positive real `s`.
    pub fn scaled(&self, divisor: f64) -> Self {
        let mut coeffs: Vec<Complex64> = self.coeffs.iter().map(|c| c / divisor).collect();
        coeffs[0].im = 0.0;
        Self { coeffs }
    }

    /// Zero moment `Σ k |a_k|²` (area / π).
    pub fn area_moment(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (i + 1) as f64 * c.norm_sqr())
            .sum()
    }
}

/// Horner evaluation of power coefficients `c_0 + c_1 ξ + …`.
pub fn eval_power_series(coeffs: &[Complex64], xi: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * xi + c)
}

pub fn evaluate(map: &PolynomialMap, xi: Complex64) -> Complex64 {
    map.evaluate(xi)
}

pub fn derivative(map: &PolynomialMap, order: usize) -> Result<Vec<Complex64>> {
    map.derivative(order)
}

/// Roots of a power series `c_0 + … + c_d ξ^d` (trailing zeros ignored) via
/// the eigenvalues of its companion matrix.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let Some(lead_idx) = coeffs.iter().rposition(|c| c.norm() >= TRIM_THRESHOLD) else {
        return Vec::new();
    };
    let d = lead_idx;
    if d == 0 {
        return Vec::new();
    }
    let lead = coeffs[d];
    let mut companion = DMatrix::<Complex64>::zeros(d, d);
    for i in 1..d {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..d {
        companion[(i, d - 1)] = -coeffs[i] / lead;
    }
    if d == 1 {
        return vec![companion[(0, 0)]];
    }
    companion
        .schur()
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnivalenceReport {
    pub univalent: bool,
    /// Smallest planar distance between boundary samples more than
    /// `4π/samples` apart in parameter.
    pub min_boundary_gap: f64,
    pub derivative_root_min_modulus: f64,
    /// Non-adjacent boundary segments that cross.
    pub self_intersections: usize,
}

impl UnivalenceReport {
    pub fn failing_margin(&self) -> Option<String> {
        if self.derivative_root_min_modulus <= 1.0 + ROOT_MARGIN {
            return Some(format!(
                "derivative root at |xi| = {:.6} inside the closed disk (needs > 1 + {ROOT_MARGIN:e})",
                self.derivative_root_min_modulus
            ));
        }
        if self.self_intersections > 0 {
            return Some(format!("boundary curve self-intersects ({} crossings)", self.self_intersections));
        }
        if !self.univalent {
            return Some(format!("boundary samples nearly touch (gap {:.3e})", self.min_boundary_gap));
        }
        None
    }
}

/// Sampled univalence certificate on the closed disk.
///
/// Requires every root of `f′` to lie outside `|ξ| ≤ 1 + ROOT_MARGIN` and the
/// sampled boundary polygon to be simple: no crossing of non-adjacent
/// segments and no pair of samples more than two steps apart closer than
/// `GAP_RELATIVE · max|f|`.
pub fn univalence_check(map: &PolynomialMap, samples: usize) -> Result<UnivalenceReport> {
    let n = map.degree();
    if samples < 8 * n {
        return Err(FlowError::InvalidInput(format!("need at least {} boundary samples, got {samples}", 8 * n)));
    }
    let roots = polynomial_roots(&map.derivative(1)?);
    let root_min = roots.iter().map(|r| r.norm()).fold(f64::INFINITY, f64::min);

    let points = boundary_points(map, samples);
    let max_radius = points.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let eps_gap = GAP_RELATIVE * max_radius;
    let (min_gap, crossings) = polygon_simplicity(&points);

    let univalent = root_min > 1.0 + ROOT_MARGIN && crossings == 0 && min_gap > eps_gap;
    Ok(UnivalenceReport {
        univalent,
        min_boundary_gap: min_gap,
        derivative_root_min_modulus: root_min,
        self_intersections: crossings,
    })
}

pub fn is_univalent(map: &PolynomialMap) -> bool {
    let samples = DEFAULT_SAMPLES.max(8 * map.degree());
    univalence_check(map, samples).map(|r| r.univalent).unwrap_or(false)
}

fn boundary_points(map: &PolynomialMap, samples: usize) -> Vec<Complex64> {
    (0..samples)
        .map(|j| map.evaluate(Complex64::from_polar(1.0, 2.0 * PI * j as f64 / samples as f64)))
        .collect()
}

fn cyclic_separation(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(n - d)
}

fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    (b - a).re * (c - a).im - (b - a).im * (c - a).re
}

fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Returns (minimal non-neighbour sample gap, number of crossing segment
/// pairs) for a closed polygon, using a uniform grid so the cost stays
/// linear for well-spread curves.
fn polygon_simplicity(points: &[Complex64]) -> (f64, usize) {
    let n = points.len();
    let perimeter: f64 = (0..n).map(|i| (points[(i + 1) % n] - points[i]).norm()).sum();
    let cell = (2.0 * perimeter / n as f64).max(f64::MIN_POSITIVE);
    let key = |z: Complex64| ((z.re / cell).floor() as i64, (z.im / cell).floor() as i64);

    // segment i joins points[i] and points[i+1]; insert it into every cell of
    // its bounding box
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..n {
        let (a, b) = (points[i], points[(i + 1) % n]);
        let (x0, y0) = key(Complex64::new(a.re.min(b.re), a.im.min(b.im)));
        let (x1, y1) = key(Complex64::new(a.re.max(b.re), a.im.max(b.im)));
        for x in x0..=x1 {
            for y in y0..=y1 {
                grid.entry((x, y)).or_default().push(i);
            }
        }
    }

    let mut crossings = 0usize;
    let mut min_gap = f64::INFINITY;
    let mut seen = std::collections::HashSet::new();
    for members in grid.values() {
        for (ai, &i) in members.iter().enumerate() {
            for &j in &members[ai + 1..] {
                if i == j {
                    continue;
                }
                let (lo, hi) = (i.min(j), i.max(j));
                if !seen.insert((lo, hi)) {
                    continue;
                }
                if cyclic_separation(i, j, n) >= 2
                    && segments_cross(points[i], points[(i + 1) % n], points[j], points[(j + 1) % n])
                {
                    crossings += 1;
                }
                // sample gaps: compare segment start points (covers every
                // sample once as a segment start)
                if cyclic_separation(i, j, n) > 2 {
                    min_gap = min_gap.min((points[i] - points[j]).norm());
                }
            }
        }
    }
    if !min_gap.is_finite() {
        // no non-neighbour pair shares a cell: every such gap exceeds the cell size
        min_gap = cell;
    }
    (min_gap, crossings)
}

/// Rescales to unit zero moment: returns `f / √(area/π)`.
pub fn rescaled_map(map: &PolynomialMap, area: f64) -> Result<PolynomialMap> {
    if !(area > 0.0) || !area.is_finite() {
        return Err(FlowError::InvalidInput(format!("area must be positive, got {area}")));
    }
    Ok(map.scaled((area / PI).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundarySample {
    pub theta: f64,
    pub z: Complex64,
    pub kappa: f64,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryGeometry {
    pub samples: Vec<BoundarySample>,
    pub resolution: usize,
}

impl BoundaryGeometry {
    pub fn max_radius_deviation(&self) -> f64 {
        self.samples.iter().map(|s| (s.r - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_curvature_deviation(&self) -> f64 {
        self.samples.iter().map(|s| (s.kappa - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Boundary points, moduli and curvatures `κ = Re(1 + ξf″/f′)/|f′|` at
/// `samples` equispaced parameters.
pub fn boundary_geometry(map: &PolynomialMap, samples: usize) -> Result<BoundaryGeometry> {
    let n = map.degree();
    if samples < 8 * n {
        return Err(FlowError::InvalidInput(format!("need at least {} boundary samples, got {samples}", 8 * n)));
    }
    let d1 = map.derivative(1)?;
    let d2 = map.derivative(2)?;
    let floor = SINGULAR_DERIVATIVE_TOL * map.a1();
    let mut out = Vec::with_capacity(samples);
    for j in 0..samples {
        let theta = 2.0 * PI * j as f64 / samples as f64;
        let xi = Complex64::from_polar(1.0, theta);
        let fp = eval_power_series(&d1, xi);
        let modulus = fp.norm();
        if modulus < floor {
            return Err(FlowError::NearSingularBoundary { theta, modulus });
        }
        let fpp = eval_power_series(&d2, xi);
        let kappa = (1.0 + xi * fpp / fp).re / modulus;
        let z = map.evaluate(xi);
        out.push(BoundarySample { theta, z, kappa, r: z.norm() });
    }
    Ok(BoundaryGeometry { samples: out, resolution: samples })
}

/// Serde adapter: complex vectors as JSON arrays of `[re, im]` pairs.
pub mod complex_pairs {
    use super::*;

    pub fn to_pairs(values: &[Complex64]) -> Vec<[f64; 2]> {
        values.iter().map(|c| [c.re, c.im]).collect()
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Vec<Complex64> {
        pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }

    pub fn serialize<S: Serializer>(values: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
        to_pairs(values).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(from_pairs(&pairs))
    }
}

impl Serialize for PolynomialMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        complex_pairs::serialize(&self.coeffs, s)
    }
}

impl<'de> Deserialize<'de> for PolynomialMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coeffs = complex_pairs::deserialize(d)?;
        PolynomialMap::new(coeffs).map_err(serde::de::Error::custom)
    }
}
