//! The modified carrying simplex as a radial graph `d ↦ λ₀(d) d` over the unit
//! probability simplex.
//!
//! Membership of a point in the basin of repulsion of the origin is decided by
//! following its backward orbit with a face-restricted Newton inverse of `T`.
//! Each ray is then bisected independently.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CsxError, Result};
use crate::linalg::{solve, sup_norm};
use crate::model::{support, ModelSpec, ZERO_THRESHOLD};

/// Upper bound on the number of directions in a grid.
pub const DIRECTION_BUDGET: f64 = 1e6;
/// Default relative bisection tolerance on `λ₀`.
pub const DEFAULT_HEIGHT_TOL: f64 = 1e-6;
/// Lower end of the bisection bracket.
pub const LAMBDA_LO: f64 = 1e-6;

const MAX_HALVINGS: usize = 30;

/// A point of the unit probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Direction(Vec<f64>);

impl Direction {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CsxError::param("d", "components must be finite and >= 0"));
        }
        let s: f64 = d.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(CsxError::param("d", format!("components sum to {}, not 1", s)));
        }
        Ok(Direction(d))
    }

    /// Normalises a nonzero nonnegative vector onto the simplex.
    pub fn from_point(x: &[f64]) -> Result<Self> {
        let s: f64 = x.iter().sum();
        if !(s > 0.0) || x.iter().any(|v| *v < 0.0) {
            return Err(CsxError::param("x", "needs a nonzero nonnegative point"));
        }
        let mut d: Vec<f64> = x.iter().map(|v| v / s).collect();
        // Keep the sum within rounding of one.
        let err: f64 = 1.0 - d.iter().sum::<f64>();
        if let Some(k) = (0..d.len()).max_by(|&a, &b| d[a].total_cmp(&d[b])) {
            d[k] += err;
        }
        Ok(Direction(d))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn support(&self) -> Vec<usize> {
        support(&self.0)
    }
}

/// All lattice points `k / resolution` of the simplex, first vertex `e_1`, in
/// descending lexicographic order of `k`.
pub fn direction_grid(n: usize, resolution: usize) -> Result<Vec<Direction>> {
    if resolution < 1 {
        return Err(CsxError::param("resolution", "must be at least 1"));
    }
    if n < 1 {
        return Err(CsxError::param("n", "must be at least 1"));
    }
    let count = binomial(resolution + n - 1, n - 1);
    if count > DIRECTION_BUDGET {
        return Err(CsxError::BudgetExceeded {
            what: "direction grid",
            count,
            limit: DIRECTION_BUDGET,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut k = vec![0usize; n];
    compositions(&mut k, 0, resolution, &mut |k| {
        let d = k.iter().map(|&v| v as f64 / resolution as f64).collect();
        out.push(Direction(d));
    });
    Ok(out)
}

fn compositions(k: &mut Vec<usize>, pos: usize, left: usize, emit: &mut impl FnMut(&[usize])) {
    if pos + 1 == k.len() {
        k[pos] = left;
        emit(k);
        return;
    }
    for v in (0..=left).rev() {
        k[pos] = v;
        compositions(k, pos + 1, left - v, emit);
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasinTestConfig {
    pub max_backward_steps: usize,
    /// Sup-norm below which a backward orbit counts as having reached 0.
    pub zero_radius: f64,
    /// Slack beyond `[0, r]` before an iterate counts as escaped.
    pub escape_margin: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Steps over which a still-shrinking orbit is treated as undecided.
    pub shrink_window: usize,
}

impl Default for BasinTestConfig {
    fn default() -> Self {
        BasinTestConfig {
            max_backward_steps: 400,
            zero_radius: 1e-8,
            escape_margin: 1e-9,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            shrink_window: 20,
        }
    }
}

impl BasinTestConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_backward_steps > 0
            && self.zero_radius > 0.0
            && self.escape_margin > 0.0
            && self.newton_tol > 0.0
            && self.newton_max_iter > 0
            && self.shrink_window > 0;
        if ok {
            Ok(())
        } else {
            Err(CsxError::param("basin config", "all settings must be positive"))
        }
    }
}

/// Residual of `T(x) = y` on the face `idx` and its sup norm.
fn face_residual(model: &ModelSpec, x: &[f64], y: &[f64], idx: &[usize], f: &mut [f64], res: &mut [f64]) -> f64 {
    model.eval_growth(x, f);
    let mut worst: f64 = 0.0;
    for (a, &k) in idx.iter().enumerate() {
        res[a] = x[k] * f[k] - y[k];
        if !res[a].is_finite() {
            return f64::INFINITY;
        }
        worst = worst.max(res[a].abs());
    }
    worst
}

/// Solves `T(x) = y` for `x` on the face spanned by the support of `y`.
pub fn newton_inverse(model: &ModelSpec, y: &[f64], guess: &[f64], cfg: &BasinTestConfig) -> Result<Vec<f64>> {
    let n = model.dim();
    if y.len() != n || guess.len() != n {
        return Err(CsxError::Domain("state length does not match model".into()));
    }
    let idx = support(y);
    let mut x = vec![0.0; n];
    if idx.is_empty() {
        return Ok(x);
    }
    for &k in &idx {
        x[k] = if guess[k] > ZERO_THRESHOLD { guess[k] } else { y[k] };
    }
    let m = idx.len();
    let y_norm = sup_norm(y);
    let target = cfg.newton_tol * y_norm.min(1.0);
    let mut f = vec![0.0; n];
    let mut res = vec![0.0; m];
    let mut trial_res = vec![0.0; m];
    let mut trial = x.clone();
    let mut norm = face_residual(model, &x, y, &idx, &mut f, &mut res);

    for _ in 0..cfg.newton_max_iter {
        if norm <= target {
            return Ok(x);
        }
        let df = model.eval_jacobian_growth(&x);
        let jac = nalgebra::DMatrix::from_fn(m, m, |a, b| {
            let (i, j) = (idx[a], idx[b]);
            let diag = if a == b { f[i] } else { 0.0 };
            diag + x[i] * df[(i, j)]
        });
        let step = solve(jac, &res).ok_or_else(|| {
            CsxError::InverseFailed("restricted Jacobian is singular".into())
        })?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            trial.copy_from_slice(&x);
            let mut inside = true;
            for (a, &k) in idx.iter().enumerate() {
                trial[k] = x[k] - t * step[a];
                if !(trial[k] > 0.0) {
                    inside = false;
                }
            }
            if inside {
                let trial_norm = face_residual(model, &trial, y, &idx, &mut f, &mut trial_res);
                if trial_norm < norm {
                    std::mem::swap(&mut x, &mut trial);
                    std::mem::swap(&mut res, &mut trial_res);
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // Stalled line search: accept if already at rounding level.
            if norm <= 64.0 * f64::EPSILON * y_norm.max(f64::MIN_POSITIVE) {
                return Ok(x);
            }
            return Err(CsxError::InverseFailed(format!(
                "line search stalled at residual {:e}",
                norm
            )));
        }
        // Refresh f at the accepted iterate for the next Jacobian.
        model.eval_growth(&x, &mut f);
    }
    if norm <= target || norm <= 64.0 * f64::EPSILON * y_norm {
        Ok(x)
    } else {
        Err(CsxError::InverseFailed(format!(
            "no convergence after {} iterations (residual {:e})",
            cfg.newton_max_iter, norm
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Membership {
    /// Backward orbit reaches the origin: the point lies in the basin of repulsion.
    BelowSigma,
    AtOrAbove,
    Undetermined,
}

/// Classifies `x` by following its backward orbit.
pub fn basin_membership(model: &ModelSpec, x: &[f64], cfg: &BasinTestConfig) -> Membership {
    let r = model.box_corner();
    let mut cur = x.to_vec();
    if sup_norm(&cur) < cfg.zero_radius {
        return Membership::BelowSigma;
    }
    let mut norms = Vec::with_capacity(cfg.max_backward_steps);
    for _ in 0..cfg.max_backward_steps {
        cur = match newton_inverse(model, &cur, &cur, cfg) {
            Ok(prev) => prev,
            Err(_) => return Membership::AtOrAbove,
        };
        if cur.iter().zip(r).any(|(v, ri)| *v > ri + cfg.escape_margin) {
            return Membership::AtOrAbove;
        }
        let norm = sup_norm(&cur);
        if norm < cfg.zero_radius {
            return Membership::BelowSigma;
        }
        norms.push(norm);
    }
    let w = cfg.shrink_window.min(norms.len().saturating_sub(1));
    let tail = &norms[norms.len() - 1 - w..];
    if w > 0 && tail.windows(2).all(|p| p[1] < p[0]) {
        Membership::Undetermined
    } else {
        Membership::AtOrAbove
    }
}

/// Scale `λ₀(d)` at which the ray through `d` meets the simplex.
pub fn radial_height(model: &ModelSpec, d: &Direction, cfg: &BasinTestConfig, tol: f64) -> Result<f64> {
    let dv = d.as_slice();
    if dv.len() != model.dim() {
        return Err(CsxError::Domain("direction length does not match model".into()));
    }
    let r = model.box_corner();
    let idx = d.support();
    let mut hi = idx
        .iter()
        .map(|&i| r[i] / dv[i])
        .fold(f64::INFINITY, f64::min);
    let point = |lam: f64| dv.iter().map(|v| lam * v).collect::<Vec<f64>>();
    let bracket_err = |reason: &str| CsxError::BracketError {
        direction: dv.to_vec(),
        reason: reason.to_string(),
    };

    let mut lo = LAMBDA_LO;
    if basin_membership(model, &point(lo), cfg) != Membership::BelowSigma {
        lo = LAMBDA_LO / 100.0;
        if basin_membership(model, &point(lo), cfg) != Membership::BelowSigma {
            return Err(bracket_err("lower end of the bracket is not in the basin of 0"));
        }
    }
    if !(hi > lo) {
        return Err(bracket_err("box exit scale is below the lower end"));
    }
    let patient = BasinTestConfig {
        max_backward_steps: cfg.max_backward_steps * 4,
        ..*cfg
    };
    while hi - lo > tol * 0.5 * (hi + lo) {
        let mid = 0.5 * (lo + hi);
        let p = point(mid);
        let mut verdict = basin_membership(model, &p, cfg);
        if verdict == Membership::Undetermined {
            verdict = basin_membership(model, &p, &patient);
        }
        match verdict {
            Membership::BelowSigma => lo = mid,
            Membership::AtOrAbove => hi = mid,
            Membership::Undetermined => return Err(CsxError::HeightUndetermined(dv.to_vec())),
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceGap {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialSurface {
    pub directions: Vec<Direction>,
    /// `None` where the height could not be determined (see `gaps`).
    pub heights: Vec<Option<f64>>,
    pub gaps: Vec<SurfaceGap>,
    pub model_hash: String,
    pub resolution: usize,
    pub tol: f64,
    pub residual: Option<f64>,
}

impl RadialSurface {
    pub fn point(&self, k: usize) -> Option<Vec<f64>> {
        self.heights[k].map(|h| self.directions[k].as_slice().iter().map(|v| h * v).collect())
    }

    pub fn gap_fraction(&self) -> f64 {
        self.gaps.len() as f64 / self.directions.len().max(1) as f64
    }

    /// Finite heights as `(min, max)`.
    pub fn height_range(&self) -> Option<(f64, f64)> {
        let mut it = self.heights.iter().flatten();
        let first = *it.next()?;
        Some(it.fold((first, first), |(a, b), &h| (a.min(h), b.max(h))))
    }

    /// Heights at the vertices `e_i`, in species order.
    pub fn vertex_heights(&self) -> Vec<Option<f64>> {
        let n = self.directions.first().map_or(0, |d| d.as_slice().len());
        (0..n)
            .map(|i| {
                self.directions
                    .iter()
                    .position(|d| d.as_slice()[i] == 1.0)
                    .and_then(|k| self.heights[k])
            })
            .collect()
    }
}

/// Heights over the full direction grid, plus the invariance residual.
pub fn compute_surface(model: &ModelSpec, resolution: usize, cfg: &BasinTestConfig) -> Result<RadialSurface> {
    compute_surface_with_tol(model, resolution, cfg, DEFAULT_HEIGHT_TOL)
}

pub fn compute_surface_with_tol(
    model: &ModelSpec,
    resolution: usize,
    cfg: &BasinTestConfig,
    tol: f64,
) -> Result<RadialSurface> {
    cfg.validate()?;
    let directions = direction_grid(model.dim(), resolution)?;
    let results: Vec<Result<f64>> = directions
        .par_iter()
        .map(|d| radial_height(model, d, cfg, tol))
        .collect();
    let mut heights = Vec::with_capacity(results.len());
    let mut gaps = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(h) => heights.push(Some(h)),
            Err(e @ (CsxError::HeightUndetermined(_) | CsxError::BracketError { .. })) => {
                heights.push(None);
                gaps.push(SurfaceGap {
                    index: k,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let mut surface = RadialSurface {
        directions,
        heights,
        gaps,
        model_hash: model.fingerprint(),
        resolution,
        tol,
        residual: None,
    };
    surface.residual = invariance_residual(model, &surface, cfg).ok();
    Ok(surface)
}

/// Largest relative mismatch between `Σ_i T(p)_i` and the height along the
/// direction of `T(p)`, over surface points `p`.
pub fn invariance_residual(model: &ModelSpec, surface: &RadialSurface, cfg: &BasinTestConfig) -> Result<f64> {
    let per_point: Vec<Result<f64>> = (0..surface.directions.len())
        .into_par_iter()
        .map(|k| {
            let Some(p) = surface.point(k) else {
                return Ok(0.0);
            };
            let y = model.apply_map(&p)?;
            let total: f64 = y.iter().sum();
            let d = Direction::from_point(&y)?;
            let lam = radial_height(model, &d, cfg, surface.tol)?;
            Ok((lam - total).abs() / lam)
        })
        .collect();
    per_point
        .into_iter()
        .try_fold(0.0_f64, |acc, r| r.map(|v| acc.max(v)))
}

/// Pairs `(a, b)` of surface points with equal support where `p_a ≪ p_b` on that
/// support, each coordinate by more than twice the bisection tolerance.
pub fn unordered_violations(surface: &RadialSurface) -> Vec<(usize, usize)> {
    let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for (k, d) in surface.directions.iter().enumerate() {
        if surface.heights[k].is_some() {
            groups.entry(d.support()).or_default().push(k);
        }
    }
    let mut keys: Vec<&Vec<usize>> = groups.keys().collect();
    keys.sort();
    let mut out = Vec::new();
    for key in keys {
        let members = &groups[key];
        if key.len() < 2 {
            // Single-species faces hold one point each (the axial vertex).
            continue;
        }
        let pts: Vec<Vec<f64>> = members.iter().map(|&k| surface.point(k).unwrap()).collect();
        for a in 0..members.len() {
            for b in 0..members.len() {
                if a == b {
                    continue;
                }
                let (ha, hb) = (surface.heights[members[a]].unwrap(), surface.heights[members[b]].unwrap());
                let gap = 2.0 * surface.tol * ha.max(hb);
                if key.iter().all(|&i| pts[b][i] - pts[a][i] > gap) {
                    out.push((members[a], members[b]));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Obj,
}

impl std::str::FromStr for ExportFormat {
    type Err = CsxError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "obj" => Ok(ExportFormat::Obj),
            other => Err(CsxError::Format(format!("unknown surface format `{}`", other))),
        }
    }
}

/// Formats with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

pub fn export_surface(surface: &RadialSurface, format: ExportFormat) -> Result<Vec<u8>> {
    let n = surface.directions.first().map_or(0, |d| d.as_slice().len());
    let mut s = String::new();
    match format {
        ExportFormat::Csv => {
            let head: Vec<String> = (1..=n)
                .map(|i| format!("d_{}", i))
                .chain(std::iter::once("lambda".to_string()))
                .chain((1..=n).map(|i| format!("x_{}", i)))
                .collect();
            s.push_str(&head.join(","));
            s.push('\n');
            for (k, d) in surface.directions.iter().enumerate() {
                let h = surface.heights[k].unwrap_or(f64::NAN);
                let row: Vec<String> = d
                    .as_slice()
                    .iter()
                    .map(|&v| fmt_f64(v))
                    .chain(std::iter::once(fmt_f64(h)))
                    .chain(d.as_slice().iter().map(|&v| fmt_f64(h * v)))
                    .collect();
                s.push_str(&row.join(","));
                s.push('\n');
            }
        }
        ExportFormat::Obj => {
            if n != 3 {
                return Err(CsxError::Format(format!(
                    "obj export needs 3 species, model has {}",
                    n
                )));
            }
            let res = surface.resolution;
            let mut index: HashMap<(usize, usize), usize> = HashMap::new();
            for (k, d) in surface.directions.iter().enumerate() {
                let i = (d.as_slice()[0] * res as f64).round() as usize;
                let j = (d.as_slice()[1] * res as f64).round() as usize;
                index.insert((i, j), k + 1);
                let h = surface.heights[k].unwrap_or(f64::NAN);
                let _ = writeln!(
                    s,
                    "v {} {} {}",
                    fmt_f64(h * d.as_slice()[0]),
                    fmt_f64(h * d.as_slice()[1]),
                    fmt_f64(h * d.as_slice()[2])
                );
            }
            for i in 0..res {
                for j in 0..res - i {
                    let _ = writeln!(
                        s,
                        "f {} {} {}",
                        index[&(i, j)],
                        index[&(i + 1, j)],
                        index[&(i, j + 1)]
                    );
                    if i + j + 2 <= res {
                        let _ = writeln!(
                            s,
                            "f {} {} {}",
                            index[&(i + 1, j)],
                            index[&(i + 1, j + 1)],
                            index[&(i, j + 1)]
                        );
                    }
                }
            }
        }
    }
    Ok(s.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn decoupled2() -> ModelSpec {
        ModelSpec::leslie_gower(DMatrix::identity(2, 2), vec![2.0, 2.0], None).unwrap()
    }

    fn e22() -> ModelSpec {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.25, 2.0, 1.0, 0.2, 2.0, 0.0, 1.0]);
        ModelSpec::leslie_gower(a, vec![2.0; 3], Some(vec![1.1; 3])).unwrap()
    }

    #[test]
    fn direction_grid_counts() {
        let g = direction_grid(2, 2).unwrap();
        let pts: Vec<&[f64]> = g.iter().map(|d| d.as_slice()).collect();
        assert_eq!(pts, vec![&[1.0, 0.0][..], &[0.5, 0.5], &[0.0, 1.0]]);
        assert_eq!(direction_grid(3, 1).unwrap().len(), 3);
        assert_eq!(direction_grid(3, 4).unwrap().len(), 15);
        assert!(matches!(direction_grid(10, 100), Err(CsxError::BudgetExceeded { .. })));
        assert!(direction_grid(3, 0).is_err());
    }

    #[test]
    fn direction_validation() {
        assert!(Direction::new(vec![0.5, 0.6]).is_err());
        assert!(Direction::new(vec![-0.1, 1.1]).is_err());
        let d = Direction::from_point(&[1.0, 2.0, 3.0]).unwrap();
        assert!((d.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn newton_round_trip_and_face() {
        let m = e22();
        let cfg = BasinTestConfig::default();
        let x0 = [0.3, 0.7, 0.9];
        let y = m.apply_map(&x0).unwrap();
        let x = newton_inverse(&m, &y, &y, &cfg).unwrap();
        for k in 0..3 {
            assert!((x[k] - x0[k]).abs() < 1e-10);
        }
        let q = [1.0, 0.0, 0.0];
        assert_eq!(newton_inverse(&m, &q, &q, &cfg).unwrap(), q.to_vec());
        let yf = m.apply_map(&[0.4, 0.0, 0.2]).unwrap();
        let xf = newton_inverse(&m, &yf, &[0.5, 0.5, 0.5], &cfg).unwrap();
        assert_eq!(support(&xf), vec![0, 2]);
        assert!((xf[0] - 0.4).abs() < 1e-10 && (xf[2] - 0.2).abs() < 1e-10);
    }

    #[test]
    fn membership_examples() {
        let cfg = BasinTestConfig::default();
        let m = e22();
        assert_eq!(basin_membership(&m, &[0.01; 3], &cfg), Membership::BelowSigma);
        assert_eq!(basin_membership(&m, &[1.0, 0.0, 0.0], &cfg), Membership::AtOrAbove);
        assert_eq!(basin_membership(&decoupled2(), &[0.5, 0.5], &cfg), Membership::BelowSigma);
        assert_eq!(basin_membership(&decoupled2(), &[0.5, 1.05], &cfg), Membership::AtOrAbove);
    }

    #[test]
    fn decoupled_heights_match_closed_form() {
        let m = decoupled2();
        let cfg = BasinTestConfig::default();
        for d in direction_grid(2, 8).unwrap() {
            let lam = radial_height(&m, &d, &cfg, DEFAULT_HEIGHT_TOL).unwrap();
            let expect = d
                .as_slice()
                .iter()
                .filter(|v| **v > 0.0)
                .map(|v| 1.0 / v)
                .fold(f64::INFINITY, f64::min);
            assert!((lam - expect).abs() < 1e-5, "{:?}: {} vs {}", d, lam, expect);
        }
    }

    #[test]
    fn axial_heights_are_q() {
        let m = e22();
        let cfg = BasinTestConfig::default();
        for i in 0..3 {
            let mut d = vec![0.0; 3];
            d[i] = 1.0;
            let lam = radial_height(&m, &Direction::new(d).unwrap(), &cfg, DEFAULT_HEIGHT_TOL).unwrap();
            assert!((lam - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn worked_example_surface_low_resolution() {
        let s = compute_surface(&e22(), 4, &BasinTestConfig::default()).unwrap();
        assert!(s.gaps.is_empty());
        for h in s.vertex_heights() {
            assert!((h.unwrap() - 1.0).abs() < 1e-5);
        }
        assert!(s.residual.unwrap() < 1e-3);
        assert!(unordered_violations(&s).is_empty());
    }

    #[test]
    fn violations_detect_scaled_point() {
        let mut s = compute_surface(&decoupled2(), 4, &BasinTestConfig::default()).unwrap();
        assert!(unordered_violations(&s).is_empty());
        let k = 2; // (0.5, 0.5)
        s.heights[k] = s.heights[k].map(|h| 2.0 * h);
        let v = unordered_violations(&s);
        assert!(!v.is_empty());
        assert!(v.iter().all(|&(a, b)| b == k && a != k));
    }

    #[test]
    fn export_shapes() {
        let s = compute_surface(&decoupled2(), 2, &BasinTestConfig::default()).unwrap();
        let csv = String::from_utf8(export_surface(&s, ExportFormat::Csv).unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "d_1,d_2,lambda,x_1,x_2");
        assert_eq!(lines.len(), 4);
        assert!(export_surface(&s, ExportFormat::Obj).is_err());

        let fake = RadialSurface {
            directions: direction_grid(3, 4).unwrap(),
            heights: vec![Some(1.0); 15],
            gaps: vec![],
            model_hash: String::new(),
            resolution: 4,
            tol: 1e-6,
            residual: None,
        };
        let obj = String::from_utf8(export_surface(&fake, ExportFormat::Obj).unwrap()).unwrap();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 15);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 16);
    }
}
