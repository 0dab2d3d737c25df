//! Trajectory samples, evolution configuration and the real coordinate
//! layout shared by both flows.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal_map::PolynomialMap;
use crate::error::{FlowError, Result};
use crate::invariants::{tail_weight, MomentVector, StokesInvariants, TailWeight};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    HeleShaw,
    Stokes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ode,
    Continuation,
}

/// When to emit samples. `t = 0` is always recorded in addition.
#[derive(Clone, Debug, PartialEq)]
pub enum RecordSchedule {
    /// `count` log-spaced times from `min(1e-2, t_end)` to `t_end`.
    Log(usize),
    List(Vec<f64>),
}

impl RecordSchedule {
    pub const LOG_START: f64 = 1e-2;

    pub fn times(&self, t_end: f64) -> Vec<f64> {
        let mut times = match self {
            RecordSchedule::Log(0) => vec![],
            RecordSchedule::Log(1) => vec![t_end],
            RecordSchedule::Log(count) => {
                let start = Self::LOG_START.min(t_end);
                let ratio = (t_end / start).ln() / (*count - 1) as f64;
                (0..*count).map(|i| start * (ratio * i as f64).exp()).collect()
            }
            RecordSchedule::List(v) => v.clone(),
        };
        if let (RecordSchedule::Log(c), Some(last)) = (self, times.last_mut()) {
            if *c > 0 {
                *last = t_end;
            }
        }
        times.retain(|&t| t > 0.0 && t <= t_end);
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub t_end: f64,
    pub method: Method,
    pub initial_step: f64,
    pub tolerance: f64,
    pub max_step_growth: f64,
    pub record: RecordSchedule,
}

impl EvolutionConfig {
    pub fn new(t_end: f64, method: Method) -> Self {
        Self {
            t_end,
            method,
            initial_step: 1e-3,
            tolerance: 1e-10,
            max_step_growth: 2.0,
            record: RecordSchedule::Log(121),
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_record(mut self, record: RecordSchedule) -> Self {
        self.record = record;
        self
    }

    pub fn with_initial_step(mut self, h: f64) -> Self {
        self.initial_step = h;
        self
    }

    pub fn record_times(&self) -> Vec<f64> {
        self.record.times(self.t_end)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(FlowError::InvalidInput(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.tolerance > 0.0) {
            return Err(FlowError::InvalidInput(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.initial_step > 0.0) {
            return Err(FlowError::InvalidInput("initial step must be positive".into()));
        }
        if !(self.max_step_growth > 1.0) {
            return Err(FlowError::InvalidInput("max step growth must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub moment_drift: f64,
    pub univalent: bool,
    pub step_size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub map: PolynomialMap,
    pub moments: MomentVector,
    pub stokes: Option<StokesInvariants>,
    pub g: TailWeight,
    pub diagnostics: Diagnostics,
}

impl TrajectorySample {
    /// Builds a sample and its conserved-quantity drift against the initial
    /// values (`M_k` for Hele-Shaw, `C_k` for Stokes).
    pub fn build(model: Model, t: f64, map: PolynomialMap, reference: &[Complex64], univalent: bool, step_size: f64) -> Self {
        let moments = MomentVector::of(&map);
        let stokes = (model == Model::Stokes).then(|| StokesInvariants::of(&map));
        let current: &[Complex64] = match &stokes {
            Some(s) => &s.values,
            None => &moments.moments,
        };
        let moment_drift = conserved_drift(current, reference, t);
        let g = tail_weight(&map);
        Self { t, map, moments, stokes, g, diagnostics: Diagnostics { moment_drift, univalent, step_size } }
    }

    pub fn a1(&self) -> f64 {
        self.map.a1()
    }
}

/// `max_k |Q_k(t) − Q_k(0) − 2t δ_{k0}|`.
pub fn conserved_drift(current: &[Complex64], reference: &[Complex64], t: f64) -> f64 {
    current
        .iter()
        .zip(reference)
        .enumerate()
        .map(|(k, (q, q0))| {
            let target = if k == 0 { q0 + 2.0 * t } else { *q0 };
            (q - target).norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub model: Model,
    pub samples: Vec<TrajectorySample>,
    /// Why the evolution stopped before `t_end`, if it did.
    pub breakdown: Option<FlowError>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory always holds the initial sample")
    }

    pub fn first(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn t_max(&self) -> f64 {
        self.last().t
    }

    pub fn degree(&self) -> usize {
        self.first().map.len()
    }

    /// Initial conserved quantities: `M_k(0)` or `C_k(0)`.
    pub fn initial_invariants(&self) -> Vec<Complex64> {
        let s = self.first();
        match (&s.stokes, self.model) {
            (Some(c), _) => c.values.clone(),
            (None, Model::Stokes) => StokesInvariants::of(&s.map).values,
            (None, Model::HeleShaw) => s.moments.moments.clone(),
        }
    }

    pub fn sample_at(&self, t: f64) -> Option<&TrajectorySample> {
        self.samples.iter().find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

/// Real coordinates `(a_1, Re a_2, Im a_2, …, Re a_n, Im a_n)` of a map.
pub fn to_real(map: &PolynomialMap) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * map.len() - 1);
    x.push(map.a1());
    for c in &map.coeffs()[1..] {
        x.push(c.re);
        x.push(c.im);
    }
    x
}

pub fn complex_from_real(x: &[f64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(x[0], 0.0)];
    coeffs.extend(x[1..].chunks(2).map(|p| Complex64::new(p[0], p[1])));
    coeffs
}

pub fn from_real(x: &[f64]) -> Result<PolynomialMap> {
    if x.len() % 2 == 0 {
        return Err(FlowError::InvalidInput(format!("real state must have odd length, got {}", x.len())));
    }
    PolynomialMap::new(complex_from_real(x))
}
