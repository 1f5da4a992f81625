//! Checks of the existence conditions for a modified carrying simplex.
//!
//! The built-in families are settled by closed-form arguments on their
//! parameters (`VerifiedAnalytic`). Everything else is sampled on a grid of the
//! relevant box; a sampled pass is reported as `Verified` (or `Inconclusive` in
//! strict mode) since sampling cannot prove a statement about every point.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CsxError, Result};
use crate::linalg::{inverse_with_condition, spectral_radius};
use crate::model::{assemble_m, Family, MatrixKind, ModelSpec};

/// Strict-negativity margin for derivatives.
pub const SIGN_MARGIN: f64 = 1e-12;
/// A sampled spectral radius passes when it is below `1 − SPECTRAL_MARGIN`.
pub const SPECTRAL_MARGIN: f64 = 1e-9;
/// Off-diagonal entries of `DT⁻¹` may dip this far below zero.
pub const INVERSE_SLACK: f64 = 1e-9;
/// `DT(x)` counts as singular above this 1-norm condition number.
pub const MAX_CONDITION: f64 = 1e12;
/// Upper bound on tensor-grid size.
pub const GRID_BUDGET: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictStatus {
    Verified,
    VerifiedAnalytic,
    Failed,
    Inconclusive,
}

impl VerdictStatus {
    pub fn passed(self) -> bool {
        matches!(self, VerdictStatus::Verified | VerdictStatus::VerifiedAnalytic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub status: VerdictStatus,
    pub witness: Option<Vec<f64>>,
    pub detail: String,
}

impl ConditionVerdict {
    fn analytic(detail: impl Into<String>) -> Self {
        ConditionVerdict {
            status: VerdictStatus::VerifiedAnalytic,
            witness: None,
            detail: detail.into(),
        }
    }

    fn failed(witness: Vec<f64>, detail: impl Into<String>) -> Self {
        ConditionVerdict {
            status: VerdictStatus::Failed,
            witness: Some(witness),
            detail: detail.into(),
        }
    }

    fn inconclusive(detail: impl Into<String>) -> Self {
        ConditionVerdict {
            status: VerdictStatus::Inconclusive,
            witness: None,
            detail: detail.into(),
        }
    }

    fn sampled_pass(cfg: &VerifyConfig, detail: impl Into<String>) -> Self {
        let status = if cfg.strict {
            VerdictStatus::Inconclusive
        } else {
            VerdictStatus::Verified
        };
        ConditionVerdict {
            status,
            witness: None,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Overall {
    SimplexExists,
    NotEstablished,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub axial: ConditionVerdict,
    pub signs: ConditionVerdict,
    pub spectral: ConditionVerdict,
    pub dissipative: ConditionVerdict,
    pub inverse_signs: ConditionVerdict,
    pub overall: Overall,
    /// All off-diagonal `∂f_i/∂x_j` strictly negative on the sampled box, i.e. the
    /// classical all-negative Jacobian hypothesis would hold as well.
    pub classical_negative_jacobian: bool,
    pub axial_point: Option<Vec<f64>>,
    pub resolution: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GridDomain {
    /// `[0, r]`
    BoxR,
    /// `[0, q] \ {0}`
    BoxQ,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub points: Vec<Vec<f64>>,
    pub resolution: usize,
    pub domain: GridDomain,
    /// Size of the tensor part before augmentation.
    pub base_points: usize,
}

impl SampleGrid {
    /// Appends extra points (e.g. earlier witnesses) that are not already present.
    pub fn with_points(mut self, extra: impl IntoIterator<Item = Vec<f64>>) -> Self {
        let mut seen: HashSet<Vec<u64>> = self.points.iter().map(|p| bits(p)).collect();
        for p in extra {
            if seen.insert(bits(&p)) {
                self.points.push(p);
            }
        }
        self
    }
}

fn bits(p: &[f64]) -> Vec<u64> {
    p.iter().map(|v| v.to_bits()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    /// Report sampled passes as `Inconclusive`.
    pub strict: bool,
    /// Sampled passes below this per-axis resolution are `Inconclusive`.
    pub resolution_floor: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            strict: false,
            resolution_floor: 4,
        }
    }
}

/// Tensor grid over `[0, r]` or `[0, q] \ {0}`, with corners, densified axial
/// segments and the point `q` added.
pub fn build_grid(model: &ModelSpec, domain: GridDomain, resolution: usize) -> Result<SampleGrid> {
    if resolution < 2 {
        return Err(CsxError::param("resolution", "must be at least 2"));
    }
    let n = model.dim();
    let count = (resolution as f64).powi(n as i32);
    if count > GRID_BUDGET {
        return Err(CsxError::BudgetExceeded {
            what: "sample grid",
            count,
            limit: GRID_BUDGET,
        });
    }
    let q = model.axial_point();
    let corner: Vec<f64> = match domain {
        GridDomain::BoxR => model.box_corner().to_vec(),
        GridDomain::BoxQ => q.clone()?,
    };

    let total = count as usize;
    let mut points = Vec::with_capacity(total + 4 * resolution * n + 1);
    let step = (resolution - 1) as f64;
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        points.push(
            (0..n)
                .map(|k| corner[k] * idx[k] as f64 / step)
                .collect::<Vec<_>>(),
        );
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < resolution {
                break;
            }
            *slot = 0;
        }
    }
    let base_points = points.len();

    let dense = 4 * resolution;
    let mut extra = Vec::new();
    for i in 0..n {
        for k in 0..dense {
            let mut p = vec![0.0; n];
            p[i] = corner[i] * k as f64 / (dense - 1) as f64;
            extra.push(p);
        }
    }
    if let Ok(q) = q {
        extra.push(q);
    }
    let mut grid = SampleGrid {
        points,
        resolution,
        domain,
        base_points,
    }
    .with_points(extra);
    if domain == GridDomain::BoxQ {
        grid.points.retain(|p| p.iter().any(|&v| v != 0.0));
        grid.base_points -= 1;
    }
    Ok(grid)
}

/// First grid point (in grid order) for which `probe` reports something.
fn first_hit<T, F>(points: &[Vec<f64>], probe: F) -> Option<(usize, T)>
where
    T: Send,
    F: Fn(&[f64]) -> Option<T> + Sync,
{
    points
        .par_iter()
        .enumerate()
        .find_map_first(|(k, p)| probe(p).map(|t| (k, t)))
}

/// Axial fixed points exist and satisfy `q ≪ r`.
pub fn check_axial(model: &ModelSpec) -> ConditionVerdict {
    let r = model.box_corner();
    let n = model.dim();
    for i in 0..n {
        match model.axial_fixed_point(i) {
            Ok(qi) if qi < r[i] => {}
            Ok(qi) => {
                let mut w = vec![0.0; n];
                w[i] = qi;
                return ConditionVerdict::failed(
                    w,
                    format!("q_{} = {} is not strictly below r_{} = {}", i + 1, qi, i + 1, r[i]),
                );
            }
            Err(_) => {
                let mut w = vec![0.0; n];
                w[i] = r[i];
                return ConditionVerdict::failed(
                    w,
                    format!("f_{}(s e_{}) = 1 has no root in (0, r_{}]", i + 1, i + 1, i + 1),
                );
            }
        }
    }
    let q = model.axial_point().expect("checked above");
    let analytic = model.family().is_builtin();
    ConditionVerdict {
        status: if analytic {
            VerdictStatus::VerifiedAnalytic
        } else {
            VerdictStatus::Verified
        },
        witness: None,
        detail: format!("q = {:?} << r", q),
    }
}

enum SignIssue {
    PositiveOffDiagonal(usize, usize, f64),
    Increasing(usize, f64),
    FlatDiagonal(usize, f64),
}

/// `∂f_i/∂x_j ≤ 0` everywhere and `f_i` strictly decreasing in `x_i`.
///
/// Sampled models are held to the stronger `∂f_i/∂x_i < 0` form; a vanishing
/// diagonal derivative is `Inconclusive`, not `Failed`.
pub fn check_signs(model: &ModelSpec, grid: &SampleGrid, cfg: &VerifyConfig) -> ConditionVerdict {
    if model.family().is_builtin() {
        return ConditionVerdict::analytic(
            "∂f_i/∂x_j = −σ_ij(x) a_ij with σ_ij > 0, a_ij >= 0 and a_ii > 0",
        );
    }
    let n = model.dim();
    let hit = first_hit(&grid.points, |x| {
        let df = model.eval_jacobian_growth(x);
        for i in 0..n {
            for j in 0..n {
                let v = df[(i, j)];
                if i != j && v > SIGN_MARGIN {
                    return Some(SignIssue::PositiveOffDiagonal(i, j, v));
                }
            }
            let d = df[(i, i)];
            if d > SIGN_MARGIN {
                return Some(SignIssue::Increasing(i, d));
            }
        }
        None
    });
    if let Some((k, issue)) = hit {
        let w = grid.points[k].clone();
        return match issue {
            SignIssue::PositiveOffDiagonal(i, j, v) => ConditionVerdict::failed(
                w,
                format!("∂f_{}/∂x_{} = {:e} > 0", i + 1, j + 1, v),
            ),
            SignIssue::Increasing(i, v) => ConditionVerdict::failed(
                w,
                format!("∂f_{}/∂x_{} = {:e} > 0", i + 1, i + 1, v),
            ),
            SignIssue::FlatDiagonal(..) => unreachable!(),
        };
    }
    let flat = first_hit(&grid.points, |x| {
        let df = model.eval_jacobian_growth(x);
        (0..n)
            .find(|&i| df[(i, i)] > -SIGN_MARGIN)
            .map(|i| SignIssue::FlatDiagonal(i, df[(i, i)]))
    });
    if let Some((k, SignIssue::FlatDiagonal(i, v))) = flat {
        return ConditionVerdict {
            status: VerdictStatus::Inconclusive,
            witness: Some(grid.points[k].clone()),
            detail: format!(
                "∂f_{}/∂x_{} = {:e} is not strictly negative; strict decrease not decidable by sampling",
                i + 1,
                i + 1,
                v
            ),
        };
    }
    ConditionVerdict::sampled_pass(
        cfg,
        format!("sign pattern holds at {} sampled points", grid.points.len()),
    )
}

/// Closed-form proof that `ρ(M) < 1` or `ρ(M̃) < 1` on all of `[0, q]`.
fn spectral_analytic(model: &ModelSpec) -> Option<&'static str> {
    match model.family() {
        Family::LeslieGower => Some("f_i + Σ_j x_j ∂f_i/∂x_j = c_i/(1+Σ_k a_ik x_k)² > 0, so ρ(M̃) < 1"),
        Family::AtkinsonAllenGeneral | Family::AtkinsonAllenStandard => Some(
            "f_i + Σ_j x_j ∂f_i/∂x_j = c_i + (1+u_i)(1−c_i)/(1+Σ_k a_ik x_k)² > 0, so ρ(M̃) < 1",
        ),
        Family::Ricker => {
            let a = model.interaction().expect("plane family");
            let u = model.u();
            let n = model.dim();
            let row_form = (0..n).all(|i| {
                let row: f64 = (0..n).map(|j| a[(i, j)]).sum();
                u[i] < a[(i, i)] / row
            });
            if row_form {
                return Some("u_i < a_ii / Σ_j a_ij for all i, so ρ(M) < 1 on [0, q]");
            }
            let scaled_form = (0..n).all(|i| {
                let s: f64 = (0..n).map(|j| a[(i, j)] / a[(j, j)]).sum();
                u[i] < 1.0 / s
            });
            scaled_form.then_some("u_i < 1 / Σ_j (a_ij / a_jj) for all i, so ρ(M̃) < 1 on [0, q]")
        }
        _ => None,
    }
}

/// `ρ(M(x)) < 1` or `ρ(M̃(x)) < 1` for every `x ∈ [0, q] \ {0}`.
pub fn check_spectral(model: &ModelSpec, grid: &SampleGrid, cfg: &VerifyConfig) -> ConditionVerdict {
    if let Some(reason) = spectral_analytic(model) {
        return ConditionVerdict::analytic(reason);
    }
    let n = model.dim();
    let radii = |x: &[f64]| {
        let mut f = vec![0.0; n];
        model.eval_growth(x, &mut f);
        let df = model.eval_jacobian_growth(x);
        let rm = spectral_radius(&assemble_m(x, &f, &df, MatrixKind::M));
        let rt = spectral_radius(&assemble_m(x, &f, &df, MatrixKind::Mtilde));
        (rm, rt)
    };
    let points: Vec<&Vec<f64>> = grid
        .points
        .iter()
        .filter(|p| p.iter().any(|&v| v != 0.0))
        .collect();
    let owned: Vec<Vec<f64>> = points.iter().map(|p| (*p).clone()).collect();
    if let Some((k, (rm, rt))) = first_hit(&owned, |x| {
        let (rm, rt) = radii(x);
        (rm >= 1.0 && rt >= 1.0).then_some((rm, rt))
    }) {
        return ConditionVerdict::failed(
            owned[k].clone(),
            format!("ρ(M) = {} and ρ(M̃) = {} are both >= 1", rm, rt),
        );
    }
    if let Some((k, (rm, rt))) = first_hit(&owned, |x| {
        let (rm, rt) = radii(x);
        (rm.min(rt) >= 1.0 - SPECTRAL_MARGIN).then_some((rm, rt))
    }) {
        return ConditionVerdict {
            status: VerdictStatus::Inconclusive,
            witness: Some(owned[k].clone()),
            detail: format!("min(ρ(M), ρ(M̃)) = {} is within the margin of 1", rm.min(rt)),
        };
    }
    if grid.resolution < cfg.resolution_floor {
        return ConditionVerdict::inconclusive(format!(
            "sampled radii pass but resolution {} is below the floor {}",
            grid.resolution, cfg.resolution_floor
        ));
    }
    ConditionVerdict::sampled_pass(
        cfg,
        format!("min(ρ(M), ρ(M̃)) < 1 at {} sampled points of [0, q]", owned.len()),
    )
}

/// `0 < f_i(x) < 1` whenever `x_i ≥ r_i`.
pub fn check_dissipativity(model: &ModelSpec) -> ConditionVerdict {
    let n = model.dim();
    let r = model.box_corner();
    if let Some(a) = model.interaction().filter(|_| model.family().is_builtin()) {
        for i in 0..n {
            let load = a[(i, i)] * r[i];
            let (bound, ok) = match model.family() {
                Family::LeslieGower => {
                    let b = model.c()[i] / (1.0 + load);
                    (b, b < 1.0)
                }
                Family::AtkinsonAllenGeneral | Family::AtkinsonAllenStandard => {
                    let c = model.c()[i];
                    let b = c + (1.0 + model.u()[i]) * (1.0 - c) / (1.0 + load);
                    (b, b < 1.0)
                }
                Family::Ricker => {
                    let b = (model.u()[i] * (1.0 - load)).exp();
                    (b, load > 1.0)
                }
                _ => unreachable!(),
            };
            if !ok {
                let mut w = vec![0.0; n];
                w[i] = r[i];
                return ConditionVerdict::failed(
                    w,
                    format!("f_{} reaches {} >= 1 on the face x_{} = r_{}", i + 1, bound, i + 1, i + 1),
                );
            }
        }
        return ConditionVerdict::analytic(
            "f_i is decreasing in every coordinate and f_i(r_i e_i) < 1 for all i",
        );
    }

    // Sample the faces {x_i = t r_i}, t = 1..10, with other coordinates in [0, 10 r].
    let per_axis = ((1e6_f64).powf(1.0 / (n - 1) as f64).floor() as usize).clamp(2, 6);
    let mut f = vec![0.0; n];
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        let mut idx = vec![0usize; others.len()];
        let total = per_axis.pow(others.len() as u32);
        for _ in 0..total {
            let mut x = vec![0.0; n];
            for (slot, &k) in others.iter().enumerate() {
                x[k] = 10.0 * r[k] * idx[slot] as f64 / (per_axis - 1) as f64;
            }
            let mut prev = f64::INFINITY;
            for t in 1..=10 {
                x[i] = t as f64 * r[i];
                model.eval_growth(&x, &mut f);
                if !(f[i] > 0.0 && f[i] < 1.0) {
                    return ConditionVerdict::failed(
                        x.clone(),
                        format!("f_{} = {} outside (0, 1) with x_{} >= r_{}", i + 1, f[i], i + 1, i + 1),
                    );
                }
                if f[i] > prev {
                    return ConditionVerdict {
                        status: VerdictStatus::Inconclusive,
                        witness: Some(x.clone()),
                        detail: format!(
                            "f_{} increases in x_{} beyond r_{}; sampled bound does not extend to all of C",
                            i + 1,
                            i + 1,
                            i + 1
                        ),
                    };
                }
                prev = f[i];
            }
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < per_axis {
                    break;
                }
                *slot = 0;
            }
        }
    }
    ConditionVerdict::inconclusive(
        "0 < f_i < 1 and non-increasing on sampled faces x_i in [r_i, 10 r_i]; no closed-form bound",
    )
}

/// `DT(x)` invertible with `(DT)⁻¹` having positive diagonal and nonnegative off-diagonal.
pub fn check_inverse_signs(model: &ModelSpec, grid: &SampleGrid, cfg: &VerifyConfig) -> ConditionVerdict {
    let n = model.dim();
    let hit = first_hit(&grid.points, |x| {
        let dt = match model.jacobian_map(x) {
            Ok(dt) => dt,
            Err(e) => return Some(format!("DT undefined: {}", e)),
        };
        match inverse_with_condition(&dt) {
            None => Some("DT(x) is singular".to_string()),
            Some((_, cond)) if !(cond < MAX_CONDITION) => {
                Some(format!("DT(x) is numerically singular (condition {:e})", cond))
            }
            Some((inv, _)) => {
                for i in 0..n {
                    for j in 0..n {
                        let v = inv[(i, j)];
                        if i == j && !(v > SIGN_MARGIN) {
                            return Some(format!("(DT⁻¹)_{}{} = {:e} is not positive", i + 1, j + 1, v));
                        }
                        if i != j && v < -INVERSE_SLACK {
                            return Some(format!("(DT⁻¹)_{}{} = {:e} is negative", i + 1, j + 1, v));
                        }
                    }
                }
                None
            }
        }
    });
    match hit {
        Some((k, detail)) => ConditionVerdict::failed(grid.points[k].clone(), detail),
        None => ConditionVerdict::sampled_pass(
            cfg,
            format!("(DT)⁻¹ sign pattern holds at {} sampled points", grid.points.len()),
        ),
    }
}

fn classical_flag(model: &ModelSpec, grid: &SampleGrid) -> bool {
    let n = model.dim();
    first_hit(&grid.points, |x| {
        let df = model.eval_jacobian_growth(x);
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .find(|&(i, j)| i != j && !(df[(i, j)] < -SIGN_MARGIN))
    })
    .is_none()
}

/// Runs every check with the default configuration.
pub fn verify_all(model: &ModelSpec, resolution: usize) -> Result<ConditionReport> {
    verify_with(model, resolution, &VerifyConfig::default())
}

pub fn verify_with(model: &ModelSpec, resolution: usize, cfg: &VerifyConfig) -> Result<ConditionReport> {
    run_checks(model, resolution, cfg, &[])
}

/// Re-runs the checks at a new resolution, re-testing the witnesses of `previous`
/// so that a failure found earlier cannot disappear on refinement.
pub fn verify_refined(
    model: &ModelSpec,
    previous: &ConditionReport,
    resolution: usize,
    cfg: &VerifyConfig,
) -> Result<ConditionReport> {
    let witnesses: Vec<Vec<f64>> = [
        &previous.signs,
        &previous.spectral,
        &previous.inverse_signs,
    ]
    .iter()
    .filter_map(|v| v.witness.clone())
    .collect();
    run_checks(model, resolution, cfg, &witnesses)
}

fn run_checks(
    model: &ModelSpec,
    resolution: usize,
    cfg: &VerifyConfig,
    extra: &[Vec<f64>],
) -> Result<ConditionReport> {
    let grid_r = build_grid(model, GridDomain::BoxR, resolution)?.with_points(extra.to_vec());
    let axial = check_axial(model);
    let signs = check_signs(model, &grid_r, cfg);
    let spectral = match build_grid(model, GridDomain::BoxQ, resolution) {
        Ok(grid_q) => {
            let q = model.axial_point().expect("grid built");
            let inside: Vec<Vec<f64>> = extra
                .iter()
                .filter(|p| p.iter().zip(&q).all(|(v, qi)| v <= qi) && p.iter().any(|&v| v > 0.0))
                .cloned()
                .collect();
            check_spectral(model, &grid_q.with_points(inside), cfg)
        }
        Err(CsxError::NoAxialFixedPoint { .. }) => match spectral_analytic(model) {
            Some(reason) => ConditionVerdict::analytic(reason),
            None => ConditionVerdict::inconclusive("[0, q] undefined: axial fixed points missing"),
        },
        Err(e) => return Err(e),
    };
    let dissipative = check_dissipativity(model);
    let inverse_signs = check_inverse_signs(model, &grid_r, cfg);
    let overall = if axial.status.passed() && signs.status.passed() && spectral.status.passed() {
        Overall::SimplexExists
    } else {
        Overall::NotEstablished
    };
    Ok(ConditionReport {
        classical_negative_jacobian: classical_flag(model, &grid_r),
        axial_point: model.axial_point().ok(),
        axial,
        signs,
        spectral,
        dissipative,
        inverse_signs,
        overall,
        resolution,
    })
}
