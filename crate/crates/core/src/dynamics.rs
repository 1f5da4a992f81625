//! Forward orbits, fixed points and their stability, and a heuristic
//! classification of ω-limit sets.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CsxError, Result};
use crate::linalg::{eigenvalues, solve, sup_norm};
use crate::model::{support, ModelSpec};

/// Orbits with a component above this are treated as diverging.
pub const OVERFLOW_LIMIT: f64 = 1e12;
/// Eigenvalue moduli this close to 1 make a fixed point non-hyperbolic.
pub const STABILITY_MARGIN: f64 = 1e-8;
/// Largest accepted `‖T(x) − x‖_∞` for a fixed point.
pub const FIXED_POINT_RESIDUAL: f64 = 1e-10;
/// Recurrence and diameter tolerance for ω-limit detection.
pub const RECURRENCE_TOL: f64 = 1e-8;
pub const DEFAULT_TRANSIENT: usize = 5000;
pub const DEFAULT_WINDOW: usize = 1000;

const SEED_BUDGET: f64 = 1e5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub model_hash: String,
}

#[inline]
fn step_into(model: &ModelSpec, x: &[f64], f: &mut [f64], out: &mut [f64]) {
    model.eval_growth(x, f);
    for k in 0..x.len() {
        out[k] = x[k] * f[k];
    }
}

fn overflowed(x: &[f64]) -> bool {
    x.iter().any(|v| !(v.abs() <= OVERFLOW_LIMIT))
}

/// `x0, T(x0), …, T^steps(x0)`.
pub fn iterate(model: &ModelSpec, x0: &[f64], steps: usize) -> Result<Trajectory> {
    model.check_state(x0)?;
    let n = model.dim();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    let mut f = vec![0.0; n];
    for k in 1..=steps {
        let mut next = vec![0.0; n];
        step_into(model, &states[k - 1], &mut f, &mut next);
        if overflowed(&next) {
            return Err(CsxError::Overflow {
                step: k,
                limit: OVERFLOW_LIMIT,
            });
        }
        states.push(next);
    }
    Ok(Trajectory {
        states,
        model_hash: model.fingerprint(),
    })
}

/// `T^steps(x0)` without storing the orbit.
pub fn iterate_final(model: &ModelSpec, x0: &[f64], steps: usize) -> Result<Vec<f64>> {
    model.check_state(x0)?;
    let n = model.dim();
    let mut x = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut f = vec![0.0; n];
    for k in 1..=steps {
        step_into(model, &x, &mut f, &mut next);
        if overflowed(&next) {
            return Err(CsxError::Overflow {
                step: k,
                limit: OVERFLOW_LIMIT,
            });
        }
        std::mem::swap(&mut x, &mut next);
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    Repellor,
    Attractor,
    Saddle,
    NonHyperbolic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointRecord {
    pub location: Vec<f64>,
    /// 0-based species indices.
    pub support: Vec<usize>,
    pub eigenvalues: Vec<Eigenvalue>,
    pub classification: Stability,
}

pub fn classify_eigenvalues(ev: &[Eigenvalue]) -> Stability {
    let m: Vec<f64> = ev.iter().map(Eigenvalue::modulus).collect();
    if m.iter().any(|v| (v - 1.0).abs() <= STABILITY_MARGIN) {
        Stability::NonHyperbolic
    } else if m.iter().all(|&v| v > 1.0) {
        Stability::Repellor
    } else if m.iter().all(|&v| v < 1.0) {
        Stability::Attractor
    } else {
        Stability::Saddle
    }
}

/// Stability record for a point that must already be a fixed point of `T`.
pub fn fixed_point_record(model: &ModelSpec, x: &[f64]) -> Result<FixedPointRecord> {
    let tx = model.apply_map(x)?;
    let res = tx
        .iter()
        .zip(x)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if !(res < FIXED_POINT_RESIDUAL) {
        return Err(CsxError::Precondition(format!(
            "‖T(x) − x‖ = {:e} at {:?} is not a fixed point",
            res, x
        )));
    }
    let dt = model.jacobian_map(x)?;
    let mut ev: Vec<Eigenvalue> = eigenvalues(&dt)
        .into_iter()
        .map(|z| Eigenvalue { re: z.re, im: z.im })
        .collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(FixedPointRecord {
        location: x.to_vec(),
        support: support(x),
        classification: classify_eigenvalues(&ev),
        eigenvalues: ev,
    })
}

/// The origin followed by every axial fixed point that exists inside the box.
pub fn find_axial_and_origin(model: &ModelSpec) -> Vec<FixedPointRecord> {
    let n = model.dim();
    let mut out = Vec::with_capacity(n + 1);
    if let Ok(rec) = fixed_point_record(model, &vec![0.0; n]) {
        out.push(rec);
    }
    for i in 0..n {
        if let Ok(q) = model.axial_fixed_point(i) {
            let mut x = vec![0.0; n];
            x[i] = q;
            if let Ok(rec) = fixed_point_record(model, &x) {
                out.push(rec);
            }
        }
    }
    out
}

/// Axial fixed point `Q_i` as a full state vector.
pub fn axial_state(model: &ModelSpec, i: usize) -> Result<Vec<f64>> {
    let q = model.axial_fixed_point(i)?;
    let mut x = vec![0.0; model.dim()];
    x[i] = q;
    Ok(x)
}

fn newton_fixed_point(model: &ModelSpec, seed: &[f64]) -> Option<Vec<f64>> {
    let n = model.dim();
    let mut x = seed.to_vec();
    let mut f = vec![0.0; n];
    let mut tx = vec![0.0; n];
    let residual = |x: &[f64], f: &mut [f64], tx: &mut [f64]| {
        step_into(model, x, f, tx);
        (0..n).map(|k| tx[k] - x[k]).collect::<Vec<f64>>()
    };
    let mut r = residual(&x, &mut f, &mut tx);
    let mut norm = sup_norm(&r);
    for _ in 0..100 {
        if norm < 1e-14 {
            break;
        }
        let mut j = model.jacobian_map(&x).ok()?;
        for k in 0..n {
            j[(k, k)] -= 1.0;
        }
        let step = solve(j, &r)?;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = (0..n).map(|k| x[k] - t * step[k]).collect();
            if trial.iter().all(|v| *v >= 0.0) {
                let rt = residual(&trial, &mut f, &mut tx);
                let nt = sup_norm(&rt);
                if nt < norm {
                    x = trial;
                    r = rt;
                    norm = nt;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (norm < FIXED_POINT_RESIDUAL).then_some(x)
}

/// Fixed points with every component positive, found by Newton from a tensor
/// grid of seeds in `(0, q]` (or `(0, r]` when `q` is missing).
pub fn find_interior_fixed_points(model: &ModelSpec, seeds_per_axis: usize) -> Result<Vec<FixedPointRecord>> {
    if seeds_per_axis == 0 {
        return Err(CsxError::param("seeds_per_axis", "must be positive"));
    }
    let n = model.dim();
    let count = (seeds_per_axis as f64).powi(n as i32);
    if count > SEED_BUDGET {
        return Err(CsxError::BudgetExceeded {
            what: "fixed-point seeds",
            count,
            limit: SEED_BUDGET,
        });
    }
    let top = model.axial_point().unwrap_or_else(|_| model.box_corner().to_vec());
    let seeds: Vec<Vec<f64>> = (0..count as usize)
        .map(|mut code| {
            (0..n)
                .map(|k| {
                    let idx = code % seeds_per_axis;
                    code /= seeds_per_axis;
                    top[k] * (idx + 1) as f64 / seeds_per_axis as f64
                })
                .collect()
        })
        .collect();
    let roots: Vec<Option<Vec<f64>>> = seeds
        .par_iter()
        .map(|s| newton_fixed_point(model, s).filter(|x| x.iter().all(|v| *v > 1e-10)))
        .collect();
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for x in roots.into_iter().flatten() {
        let dup = unique.iter().any(|u| {
            u.iter().zip(&x).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())) < 1e-8
        });
        if !dup {
            unique.push(x);
        }
    }
    unique.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    unique
        .iter()
        .map(|x| fixed_point_record(model, x))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OmegaKind {
    FixedPoint,
    PeriodicOrbit,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaEstimate {
    pub kind: OmegaKind,
    pub representative: Vec<Vec<f64>>,
    pub period: Option<usize>,
}

/// Replaces a converged state by the exact axial or origin fixed point it approximates.
fn snap_fixed_point(model: &ModelSpec, x: &[f64]) -> Vec<f64> {
    let sup = support(x);
    if sup.is_empty() {
        return vec![0.0; x.len()];
    }
    if sup.len() == 1 {
        if let Ok(q) = axial_state(model, sup[0]) {
            if (q[sup[0]] - x[sup[0]]).abs() < 1e-6 {
                return q;
            }
        }
    }
    x.to_vec()
}

/// Heuristic ω-limit classification from a finite window after a transient.
pub fn classify_omega(model: &ModelSpec, x0: &[f64], transient: usize, window: usize) -> Result<OmegaEstimate> {
    if x0.iter().all(|v| *v == 0.0) {
        return Err(CsxError::Precondition("x0 must be nonzero".into()));
    }
    if transient == 0 || window == 0 {
        return Err(CsxError::param("window", "transient and window must be positive"));
    }
    let start = iterate_final(model, x0, transient)?;
    let states = iterate(model, &start, window - 1)?.states;

    let n = model.dim();
    let diameter = (0..n)
        .map(|k| {
            let (lo, hi) = states
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s[k]), b.max(s[k])));
            hi - lo
        })
        .fold(0.0, f64::max);
    if diameter < RECURRENCE_TOL {
        let last = states.last().unwrap();
        return Ok(OmegaEstimate {
            kind: OmegaKind::FixedPoint,
            representative: vec![snap_fixed_point(model, last)],
            period: Some(1),
        });
    }
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < RECURRENCE_TOL);
    for p in 2..=window / 4 {
        if (0..window - p).all(|k| close(&states[k], &states[k + p])) {
            return Ok(OmegaEstimate {
                kind: OmegaKind::PeriodicOrbit,
                representative: states[window - p..].to_vec(),
                period: Some(p),
            });
        }
    }
    Ok(OmegaEstimate {
        kind: OmegaKind::Unclassified,
        representative: vec![states.last().unwrap().clone()],
        period: None,
    })
}

/// True iff no two orbit points satisfy `p ≤ q` with `p ≠ q` (tolerance 1e-9).
pub fn check_periodic_unordered(orbit: &[Vec<f64>]) -> bool {
    const TOL: f64 = 1e-9;
    for (a, p) in orbit.iter().enumerate() {
        for (b, q) in orbit.iter().enumerate() {
            if a == b {
                continue;
            }
            let below = p.iter().zip(q).all(|(x, y)| *x <= y + TOL);
            let distinct = p.iter().zip(q).any(|(x, y)| (x - y).abs() > TOL);
            if below && distinct {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn e22() -> ModelSpec {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.25, 2.0, 1.0, 0.2, 2.0, 0.0, 1.0]);
        ModelSpec::leslie_gower(a, vec![2.0; 3], Some(vec![1.1; 3])).unwrap()
    }

    fn moduli(rec: &FixedPointRecord) -> Vec<f64> {
        let mut m: Vec<f64> = rec.eigenvalues.iter().map(|e| e.modulus()).collect();
        m.sort_by(f64::total_cmp);
        m
    }

    #[test]
    fn zero_and_axial_orbits_are_constant() {
        let m = e22();
        let t = iterate(&m, &[0.0; 3], 5).unwrap();
        assert!(t.states.iter().all(|s| s == &vec![0.0; 3]));
        let t = iterate(&m, &[0.0, 1.0, 0.0], 5).unwrap();
        assert!(t.states.iter().all(|s| s == &vec![0.0, 1.0, 0.0]));
        assert_eq!(t.states.len(), 6);
    }

    #[test]
    fn worked_example_converges_to_e1() {
        let x = iterate_final(&e22(), &[0.5; 3], 10_000).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && x[1] < 1e-6 && x[2] < 1e-6);
    }

    #[test]
    fn overflow_detected() {
        let m = ModelSpec::ricker(DMatrix::identity(2, 2), vec![40.0, 40.0], None).unwrap();
        assert!(matches!(iterate(&m, &[0.01, 0.01], 100), Err(CsxError::Overflow { .. })));
    }

    #[test]
    fn worked_example_axial_records() {
        let recs = find_axial_and_origin(&e22());
        assert_eq!(recs.len(), 4);
        assert_eq!(recs[0].classification, Stability::Repellor);
        let e1 = moduli(&recs[1]);
        for (v, want) in e1.iter().zip([0.5, 2.0 / 3.0, 2.0 / 3.0]) {
            assert!((v - want).abs() < 1e-12);
        }
        assert_eq!(recs[1].classification, Stability::Attractor);
        assert_eq!(recs[3].classification, Stability::Saddle);
        let e3 = moduli(&recs[3]);
        for (v, want) in e3.iter().zip([0.5, 1.6, 5.0 / 3.0]) {
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn interior_fixed_points() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let m = ModelSpec::leslie_gower(a, vec![2.0, 2.0], None).unwrap();
        let pts = find_interior_fixed_points(&m, 5).unwrap();
        assert_eq!(pts.len(), 1);
        for v in &pts[0].location {
            assert!((v - 2.0 / 3.0).abs() < 1e-12);
        }
        assert!(find_interior_fixed_points(&e22(), 5).unwrap().is_empty());
        let d = ModelSpec::leslie_gower(DMatrix::identity(2, 2), vec![2.0, 2.0], None).unwrap();
        let pts = find_interior_fixed_points(&d, 4).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].location.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn omega_examples() {
        let m = e22();
        let w = classify_omega(&m, &[0.2, 0.3, 0.4], DEFAULT_TRANSIENT, DEFAULT_WINDOW).unwrap();
        assert_eq!(w.kind, OmegaKind::FixedPoint);
        assert_eq!(w.representative[0], vec![1.0, 0.0, 0.0]);
        let w = classify_omega(&m, &[0.0, 1.0, 0.0], 10, 10).unwrap();
        assert_eq!(w.representative, vec![vec![0.0, 1.0, 0.0]]);
        assert!(classify_omega(&m, &[0.0; 3], 10, 10).is_err());

        let r = ModelSpec::ricker(DMatrix::identity(2, 2), vec![2.2, 2.2], None).unwrap();
        let w = classify_omega(&r, &[0.3, 0.6], DEFAULT_TRANSIENT, DEFAULT_WINDOW).unwrap();
        assert_eq!(w.kind, OmegaKind::PeriodicOrbit);
        assert_eq!(w.period, Some(2));
    }

    #[test]
    fn unorderedness_of_orbits() {
        assert!(check_periodic_unordered(&[vec![1.0, 2.0]]));
        assert!(check_periodic_unordered(&[vec![1.0, 0.5], vec![0.5, 1.0]]));
        assert!(!check_periodic_unordered(&[vec![1.0, 0.5], vec![1.2, 0.6]]));
    }
}
