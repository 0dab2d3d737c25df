//! Coefficient files, trajectory CSV/JSON and atomic file writes.
//!
//! CSV columns: `t`, `a1_re, a1_im, …, an_re, an_im`, the conserved
//! quantities `M0_re, M0_im, …` (Hele-Shaw) or `C0_re, C0_im, …` (Stokes),
//! then `g, drift, univalent, step`. Reals are written with 17 significant
//! digits so that a parse reproduces them bit for bit. An early stop is
//! recorded as a trailing `# breakdown: …` comment line.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::conformal_map::{complex_pairs, PolynomialMap};
use crate::error::{FlowError, Result};
use crate::invariants::{MomentVector, StokesInvariants, TailWeight};
use crate::trajectory::{Diagnostics, Model, Trajectory, TrajectorySample};

const BREAKDOWN_PREFIX: &str = "# breakdown: ";

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| FlowError::Io(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Coefficients as a JSON array of `[re, im]` pairs, `a_1` first.
pub fn parse_coefficients(text: &str) -> Result<PolynomialMap> {
    let pairs: Vec<[f64; 2]> = serde_json::from_str(text)?;
    PolynomialMap::new(complex_pairs::from_pairs(&pairs))
}

pub fn read_coefficients(path: &Path) -> Result<PolynomialMap> {
    parse_coefficients(&fs::read_to_string(path)?)
}

pub fn coefficients_json(map: &PolynomialMap) -> String {
    serde_json::to_string(map).expect("coefficients serialize")
}

pub fn write_coefficients(path: &Path, map: &PolynomialMap) -> Result<()> {
    write_atomic(path, coefficients_json(map).as_bytes())
}

fn invariant_prefix(model: Model) -> char {
    match model {
        Model::HeleShaw => 'M',
        Model::Stokes => 'C',
    }
}

fn conserved(sample: &TrajectorySample, model: Model) -> &[Complex64] {
    match (&sample.stokes, model) {
        (Some(s), Model::Stokes) => &s.values,
        _ => &sample.moments.moments,
    }
}

pub fn csv_header(model: Model, n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for k in 1..=n {
        h.push(format!("a{k}_re"));
        h.push(format!("a{k}_im"));
    }
    let q = invariant_prefix(model);
    for k in 0..n {
        h.push(format!("{q}{k}_re"));
        h.push(format!("{q}{k}_im"));
    }
    h.extend(["g", "drift", "univalent", "step"].map(String::from));
    h
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv(traj: &Trajectory) -> Result<String> {
    let n = traj.degree();
    let mut writer = csv::Writer::from_writer(vec![]);
    writer.write_record(csv_header(traj.model, n))?;
    for s in &traj.samples {
        if s.map.len() != n {
            return Err(FlowError::InvalidInput(format!("sample at t = {} has {} coefficients, expected {n}", s.t, s.map.len())));
        }
        let mut row = vec![real(s.t)];
        for z in s.map.coeffs().iter().chain(conserved(s, traj.model)) {
            row.push(real(z.re));
            row.push(real(z.im));
        }
        row.push(real(s.g.g));
        row.push(real(s.diagnostics.moment_drift));
        row.push(s.diagnostics.univalent.to_string());
        row.push(real(s.diagnostics.step_size));
        writer.write_record(&row)?;
    }
    let mut text = String::from_utf8(writer.into_inner().map_err(|e| FlowError::Io(e.to_string()))?)
        .expect("csv output is utf-8");
    if let Some(reason) = &traj.breakdown {
        text.push_str(BREAKDOWN_PREFIX);
        text.push_str(&reason.to_string().replace('\n', " "));
        text.push('\n');
    }
    Ok(text)
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    write_atomic(path, trajectory_csv(traj)?.as_bytes())
}

fn parse_real(field: &str, column: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| FlowError::Parse(format!("line {line}, column {column}: not a number: {field:?}")))
}

/// Reads a trajectory written by [`trajectory_csv`]. The model is inferred
/// from the conserved-quantity columns.
pub fn parse_trajectory_csv(text: &str) -> Result<Trajectory> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let width = header.len();
    if width < 9 || (width - 5) % 4 != 0 {
        return Err(FlowError::Parse(format!("unexpected trajectory header with {width} columns")));
    }
    let n = (width - 5) / 4;
    let model = match header[1 + 2 * n].chars().next() {
        Some('M') => Model::HeleShaw,
        Some('C') => Model::Stokes,
        _ => return Err(FlowError::Parse(format!("unknown conserved-quantity column {:?}", header[1 + 2 * n]))),
    };
    if header != csv_header(model, n) {
        return Err(FlowError::Parse(format!("header does not match the degree-{n} {model:?} layout")));
    }

    let mut samples = vec![];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize| parse_real(&record[i], &header[i], line);
        let t = num(0)?;
        let complex_at = |i: usize| -> Result<Complex64> { Ok(Complex64::new(num(i)?, num(i + 1)?)) };
        let coeffs = (0..n).map(|k| complex_at(1 + 2 * k)).collect::<Result<Vec<_>>>()?;
        let quantities = (0..n).map(|k| complex_at(1 + 2 * n + 2 * k)).collect::<Result<Vec<_>>>()?;
        let base = 1 + 4 * n;
        let univalent = match record[base + 2].trim() {
            "true" => true,
            "false" => false,
            other => return Err(FlowError::Parse(format!("line {line}: univalent must be true or false, got {other:?}"))),
        };
        let map = PolynomialMap::new(coeffs)?;
        let (moments, stokes) = match model {
            Model::HeleShaw => (MomentVector::from_moments(quantities), None),
            Model::Stokes => (MomentVector::of(&map), Some(StokesInvariants { values: quantities })),
        };
        samples.push(TrajectorySample {
            t,
            map,
            moments,
            stokes,
            g: TailWeight { g: num(base)? },
            diagnostics: Diagnostics { moment_drift: num(base + 1)?, univalent, step_size: num(base + 3)? },
        });
    }
    if samples.is_empty() {
        return Err(FlowError::Parse("trajectory has no samples".into()));
    }
    let breakdown = text.lines().find_map(|l| l.strip_prefix(BREAKDOWN_PREFIX)).map(|reason| FlowError::Breakdown {
        t: samples.last().map_or(0.0, |s| s.t),
        reason: reason.to_string(),
    });
    Ok(Trajectory { model, samples, breakdown })
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    parse_trajectory_csv(&fs::read_to_string(path)?)
}

#[derive(Serialize)]
struct JsonSample<'a> {
    t: f64,
    #[serde(with = "complex_pairs")]
    coefficients: &'a [Complex64],
    #[serde(with = "complex_pairs")]
    conserved: &'a [Complex64],
    g: f64,
    drift: f64,
    univalent: bool,
    step: f64,
}

#[derive(Serialize)]
struct JsonTrajectory<'a> {
    model: Model,
    conserved_symbol: char,
    samples: Vec<JsonSample<'a>>,
    breakdown: Option<String>,
}

/// The CSV fields as a JSON document.
pub fn trajectory_json(traj: &Trajectory) -> String {
    let doc = JsonTrajectory {
        model: traj.model,
        conserved_symbol: invariant_prefix(traj.model),
        samples: traj
            .samples
            .iter()
            .map(|s| JsonSample {
                t: s.t,
                coefficients: s.map.coeffs(),
                conserved: conserved(s, traj.model),
                g: s.g.g,
                drift: s.diagnostics.moment_drift,
                univalent: s.diagnostics.univalent,
                step: s.diagnostics.step_size,
            })
            .collect(),
        breakdown: traj.breakdown.as_ref().map(|e| e.to_string()),
    };
    serde_json::to_string_pretty(&doc).expect("trajectory serializes")
}

/// Largest coefficient difference between two trajectories at the times
/// they share.
pub fn max_coefficient_difference(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut shared = 0;
    for s in &a.samples {
        if let Some(other) = b.sample_at(s.t) {
            if other.map.len() != s.map.len() {
                return Err(FlowError::InvalidInput("trajectories have different degrees".into()));
            }
            shared += 1;
            for (x, y) in s.map.coeffs().iter().zip(other.map.coeffs()) {
                worst = worst.max((x - y).norm());
            }
        }
    }
    if shared == 0 {
        return Err(FlowError::InvalidInput("trajectories share no record times".into()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heleshaw::evolve_continuation;
    use crate::stokes::evolve_stokes;
    use crate::trajectory::{EvolutionConfig, Method, RecordSchedule};

    fn cubic() -> PolynomialMap {
        PolynomialMap::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.05), Complex64::new(0.02, 0.0)]).unwrap()
    }

    fn cfg() -> EvolutionConfig {
        EvolutionConfig::new(2.0, Method::Continuation).with_record(RecordSchedule::Log(6))
    }

    #[test]
    fn header_layout() {
        let h = csv_header(Model::Stokes, 2);
        assert_eq!(h.join(","), "t,a1_re,a1_im,a2_re,a2_im,C0_re,C0_im,C1_re,C1_im,g,drift,univalent,step");
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let traj = evolve_continuation(&cubic(), &cfg()).unwrap();
        let text = trajectory_csv(&traj).unwrap();
        let back = parse_trajectory_csv(&text).unwrap();
        assert_eq!(back.samples.len(), traj.samples.len());
        assert_eq!(back.model, Model::HeleShaw);
        for (x, y) in traj.samples.iter().zip(&back.samples) {
            assert_eq!(x.t.to_bits(), y.t.to_bits());
            assert_eq!(x.map, y.map);
            assert_eq!(x.moments.moments, y.moments.moments);
            assert_eq!(x.g, y.g);
            assert_eq!(x.diagnostics, y.diagnostics);
        }
        assert_eq!(trajectory_csv(&back).unwrap(), text);
    }

    #[test]
    fn stokes_csv_carries_invariants() {
        let traj = evolve_stokes(&PolynomialMap::from_real(&[1.0, 0.1]).unwrap(), &cfg()).unwrap();
        let back = parse_trajectory_csv(&trajectory_csv(&traj).unwrap()).unwrap();
        assert_eq!(back.model, Model::Stokes);
        assert_eq!(back.last().stokes, traj.last().stokes);
    }

    #[test]
    fn breakdown_is_a_comment_line() {
        let mut traj = evolve_continuation(&cubic(), &cfg()).unwrap();
        traj.breakdown = Some(FlowError::Breakdown { t: 2.0, reason: "test stop".into() });
        let text = trajectory_csv(&traj).unwrap();
        assert!(text.lines().last().unwrap().starts_with("# breakdown: "));
        let back = parse_trajectory_csv(&text).unwrap();
        assert_eq!(back.samples.len(), traj.samples.len());
        assert!(back.breakdown.unwrap().to_string().contains("test stop"));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_trajectory_csv("t,x\n1,2\n").is_err());
        let traj = evolve_continuation(&cubic(), &cfg()).unwrap();
        let text = trajectory_csv(&traj).unwrap().replacen("true", "maybe", 1);
        assert!(matches!(parse_trajectory_csv(&text), Err(FlowError::Parse(_))));
    }

    #[test]
    fn coefficient_json() {
        let m = parse_coefficients("[[1, 0], [0.2, 0]]").unwrap();
        assert_eq!(m.coeffs()[1], Complex64::new(0.2, 0.0));
        assert_eq!(parse_coefficients(&coefficients_json(&cubic())).unwrap(), cubic());
        assert!(parse_coefficients("[[1, 0], [0.2]]").is_err());
        assert!(parse_coefficients("[[-1, 0]]").is_err());
        assert!(parse_coefficients("{").is_err());
    }

    #[test]
    fn json_mirrors_csv_fields() {
        let traj = evolve_continuation(&cubic(), &cfg()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&trajectory_json(&traj)).unwrap();
        assert_eq!(v["model"], "heleshaw");
        assert_eq!(v["samples"].as_array().unwrap().len(), traj.samples.len());
        assert_eq!(v["samples"][0]["coefficients"][1][1], 0.05);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("momentflow-export-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        write_coefficients(&path, &cubic()).unwrap();
        write_coefficients(&path, &PolynomialMap::identity()).unwrap();
        assert_eq!(read_coefficients(&path).unwrap(), PolynomialMap::identity());
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
