//! Relative position of nullclines `Γ_i = {f_i = 1}` inside the analysis box,
//! and the vanishing / dominance verdicts that follow from it.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{axial_state, fixed_point_record, FixedPointRecord};
use crate::error::{CsxError, Result};
use crate::model::{Family, ModelSpec};

/// Required gap for a strict relation.
pub const RELATION_MARGIN: f64 = 1e-9;
/// `∂f_i/∂x_i(Q_i)` must be below `−DERIVATIVE_MARGIN`.
pub const DERIVATIVE_MARGIN: f64 = 1e-12;
/// Largest dimension for exact vertex enumeration.
pub const MAX_PLANE_DIM: usize = 16;
/// Largest dimension for the exhaustive permutation search.
pub const MAX_EXHAUSTIVE_DIM: usize = 8;
pub const DEFAULT_SAMPLED_RESOLUTION: usize = 32;

/// `{x ∈ C : normal · x = level}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullclinePlane {
    pub species: usize,
    pub normal: Vec<f64>,
    pub level: f64,
}

pub fn nullcline_plane(model: &ModelSpec, i: usize) -> Result<NullclinePlane> {
    if i >= model.dim() {
        return Err(CsxError::param("i", "species index out of range"));
    }
    let a = model.interaction().ok_or(CsxError::NotPlanar(i + 1))?;
    let level = match model.family() {
        Family::LeslieGower => model.c()[i] - 1.0,
        Family::AtkinsonAllenGeneral | Family::AtkinsonAllenStandard | Family::PlaneNullclineCustom => {
            model.u()[i]
        }
        Family::Ricker => 1.0,
        Family::General => return Err(CsxError::NotPlanar(i + 1)),
    };
    if !(level > 0.0) {
        return Err(CsxError::param(
            format!("c_{}", i + 1),
            "nullcline level must be positive (c_i > 1)",
        ));
    }
    Ok(NullclinePlane {
        species: i,
        normal: a.row(i).iter().cloned().collect(),
        level,
    })
}

/// Coordinates pinned to zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct FaceRestriction {
    pub zeroed: Vec<usize>,
}

impl FaceRestriction {
    pub fn none() -> Self {
        FaceRestriction::default()
    }

    pub fn new(mut zeroed: Vec<usize>) -> Self {
        zeroed.sort_unstable();
        zeroed.dedup();
        FaceRestriction { zeroed }
    }

    pub fn contains(&self, k: usize) -> bool {
        self.zeroed.binary_search(&k).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    StrictlyBelow,
    StrictlyAbove,
    Neither,
    EmptyIntersection,
}

/// Position of `Γ_i` (restricted to box and face) relative to `Γ_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationVerdict {
    pub relation: Relation,
    /// For strict relations the binding point (smallest gap); otherwise a point
    /// on the wrong side or on `Γ_j`.
    pub witness: Option<Vec<f64>>,
    pub margin: f64,
    pub sampled: bool,
}

impl RelationVerdict {
    fn empty(sampled: bool) -> Self {
        RelationVerdict {
            relation: Relation::EmptyIntersection,
            witness: None,
            margin: 0.0,
            sampled,
        }
    }
}

/// Decides a relation from points of `Γ_i` and their signed gaps
/// (`> 0` means below `Γ_j`, i.e. `f_j > 1`).
fn decide(points: Vec<(Vec<f64>, f64)>, sampled: bool) -> RelationVerdict {
    if points.is_empty() {
        return RelationVerdict::empty(sampled);
    }
    let argmin = |key: &dyn Fn(f64) -> f64| {
        let mut best = 0;
        for k in 1..points.len() {
            if key(points[k].1) < key(points[best].1) {
                best = k;
            }
        }
        best
    };
    let lowest = argmin(&|g| g);
    let highest = argmin(&|g| -g);
    let min_gap = points[lowest].1;
    let max_gap = points[highest].1;
    if min_gap > RELATION_MARGIN {
        RelationVerdict {
            relation: Relation::StrictlyBelow,
            witness: Some(points[lowest].0.clone()),
            margin: min_gap,
            sampled,
        }
    } else if max_gap < -RELATION_MARGIN {
        RelationVerdict {
            relation: Relation::StrictlyAbove,
            witness: Some(points[highest].0.clone()),
            margin: -max_gap,
            sampled,
        }
    } else {
        // The side closer to zero is the one that breaks strictness.
        let (k, margin) = if min_gap.abs() <= max_gap.abs() {
            (lowest, min_gap)
        } else {
            (highest, -max_gap)
        };
        RelationVerdict {
            relation: Relation::Neither,
            witness: Some(points[k].0.clone()),
            margin: margin.min(0.0),
            sampled,
        }
    }
}

fn check_box(box_r: &[f64], n: usize) -> Result<()> {
    if box_r.len() != n || box_r.iter().any(|v| !(*v > 0.0)) {
        return Err(CsxError::param("r", "box corner must have n positive entries"));
    }
    Ok(())
}

/// Exact relation of two nullcline planes over `[0, r]` ∩ face, by enumerating
/// the vertices of `Γ_i ∩ [0, r] ∩ face` on the box edges.
pub fn plane_relation(
    p: &NullclinePlane,
    q: &NullclinePlane,
    box_r: &[f64],
    face: &FaceRestriction,
) -> Result<RelationVerdict> {
    let n = p.normal.len();
    if p.species == q.species {
        return Err(CsxError::Precondition("relation of a nullcline with itself".into()));
    }
    if q.normal.len() != n {
        return Err(CsxError::Precondition("planes of different dimension".into()));
    }
    check_box(box_r, n)?;
    if n > MAX_PLANE_DIM {
        return Err(CsxError::BudgetExceeded {
            what: "box edge enumeration",
            count: (n as f64) * 2f64.powi(n as i32 - 1),
            limit: MAX_PLANE_DIM as f64 * 2f64.powi(MAX_PLANE_DIM as i32 - 1),
        });
    }
    let free: Vec<usize> = (0..n).filter(|k| !face.contains(*k)).collect();
    let mut vertices: Vec<(Vec<f64>, f64)> = Vec::new();
    let gap = |x: &[f64]| q.level - dot(&q.normal, x);
    for (slot, &k) in free.iter().enumerate() {
        let others: Vec<usize> = free
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != slot)
            .map(|(_, &v)| v)
            .collect();
        for mask in 0..(1usize << others.len()) {
            let mut x = vec![0.0; n];
            for (b, &l) in others.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    x[l] = box_r[l];
                }
            }
            let rest = p.level - dot(&p.normal, &x);
            let a = p.normal[k];
            if a == 0.0 {
                if rest == 0.0 {
                    for end in [0.0, box_r[k]] {
                        x[k] = end;
                        let g = gap(&x);
                        vertices.push((x.clone(), g));
                    }
                }
                continue;
            }
            let t = rest / a;
            if (0.0..=box_r[k]).contains(&t) {
                x[k] = t;
                let g = gap(&x);
                vertices.push((x, g));
            }
        }
    }
    Ok(decide(vertices, false))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn growth_of(model: &ModelSpec, x: &[f64], k: usize, buf: &mut [f64]) -> f64 {
    model.eval_growth_component(x, k, buf)
}

/// Root of the decreasing function `t ↦ f_i(x with x_k = t) − 1` on `[0, hi]`.
fn bisect_level(model: &ModelSpec, x: &mut [f64], i: usize, k: usize, hi: f64, buf: &mut [f64]) -> Option<f64> {
    x[k] = 0.0;
    let g0 = growth_of(model, x, i, buf) - 1.0;
    x[k] = hi;
    let g1 = growth_of(model, x, i, buf) - 1.0;
    if !(g0 >= 0.0 && g1 <= 0.0) || (g0 == g1) {
        return None;
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + up);
        if mid <= lo || mid >= up {
            break;
        }
        x[k] = mid;
        if growth_of(model, x, i, buf) > 1.0 {
            lo = mid;
        } else {
            up = mid;
        }
    }
    let t = 0.5 * (lo + up);
    x[k] = t;
    Some(t)
}

/// Relation of `Γ_i` to `Γ_j` from samples of `Γ_i`: a grid over the non-`i`
/// coordinates with `x_i` solved by bisection, plus the crossings of `Γ_i`
/// with the box edges.
pub fn sampled_relation(
    model: &ModelSpec,
    i: usize,
    j: usize,
    box_r: &[f64],
    face: &FaceRestriction,
    resolution: usize,
) -> Result<RelationVerdict> {
    let n = model.dim();
    if i == j {
        return Err(CsxError::Precondition("relation of a nullcline with itself".into()));
    }
    if i >= n || j >= n {
        return Err(CsxError::param("i", "species index out of range"));
    }
    if resolution < 2 {
        return Err(CsxError::param("resolution", "must be at least 2"));
    }
    check_box(box_r, n)?;
    if face.contains(i) {
        return Ok(RelationVerdict::empty(true));
    }
    let others: Vec<usize> = (0..n).filter(|k| *k != i && !face.contains(*k)).collect();
    let count = (resolution as f64).powi(others.len() as i32);
    if count > 1e7 || others.len() > MAX_PLANE_DIM {
        return Err(CsxError::BudgetExceeded {
            what: "sampled relation grid",
            count,
            limit: 1e7,
        });
    }
    let cells = count as usize;
    let mut points: Vec<(Vec<f64>, f64)> = (0..cells)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, lin| {
                let mut x = vec![0.0; n];
                let mut rest = lin;
                for &k in &others {
                    x[k] = box_r[k] * (rest % resolution) as f64 / (resolution - 1) as f64;
                    rest /= resolution;
                }
                bisect_level(model, &mut x, i, i, box_r[i], buf)?;
                let g = growth_of(model, &x, j, buf) - 1.0;
                Some((x, g))
            },
        )
        .flatten()
        .collect();
    let mut buf = vec![0.0; n];
    let mut record = |x: &[f64], buf: &mut [f64]| {
        let g = growth_of(model, x, j, buf) - 1.0;
        points.push((x.to_vec(), g));
    };

    // Edges of the box where x_i sits at 0 or r_i and Γ_i crosses in x_k.
    for (slot, &k) in others.iter().enumerate() {
        let rest: Vec<usize> = others
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != slot)
            .map(|(_, &v)| v)
            .collect();
        for mask in 0..(1usize << rest.len()) {
            for xi in [0.0, box_r[i]] {
                let mut x = vec![0.0; n];
                x[i] = xi;
                for (b, &l) in rest.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        x[l] = box_r[l];
                    }
                }
                if bisect_level(model, &mut x, i, k, box_r[k], &mut buf).is_some() {
                    record(&x, &mut buf);
                }
            }
        }
    }
    Ok(decide(points, true))
}

/// Exact relation for plane families, sampled otherwise.
pub fn relation(
    model: &ModelSpec,
    i: usize,
    j: usize,
    box_r: &[f64],
    face: &FaceRestriction,
) -> Result<RelationVerdict> {
    match (nullcline_plane(model, i), nullcline_plane(model, j)) {
        (Ok(p), Ok(q)) => plane_relation(&p, &q, box_r, face),
        (Err(CsxError::NotPlanar(_)), _) | (_, Err(CsxError::NotPlanar(_))) => {
            sampled_relation(model, i, j, box_r, face, DEFAULT_SAMPLED_RESOLUTION)
        }
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub tag: String,
    /// 0-based species whose nullcline is restricted.
    pub i: usize,
    pub j: usize,
    pub face: Vec<usize>,
    pub verdict: RelationVerdict,
}

/// `∂f_i/∂x_i(Q_i) < 0`, or `None` when `Q_i` does not exist.
pub fn self_limiting_at_axis(model: &ModelSpec, i: usize) -> Option<f64> {
    let q = axial_state(model, i).ok()?;
    Some(model.eval_jacobian_growth(&q)[(i, i)])
}

fn self_limited(model: &ModelSpec, i: usize) -> bool {
    self_limiting_at_axis(model, i).is_some_and(|d| d < -DERIVATIVE_MARGIN)
}

/// Species `i` vanishes if `Γ_i ∩ [0, r]` is strictly below every other `Γ_j`.
pub fn thm31_vanishing(model: &ModelSpec, i: usize, box_r: &[f64]) -> Result<(bool, Vec<Evidence>)> {
    single_species(model, i, box_r, Relation::StrictlyBelow, "vanishing")
}

/// Species `i` dominates (and `Q_i` is globally attracting) if `Γ_i ∩ [0, r]`
/// is strictly above every other `Γ_j`. Evidence also lists the converse
/// relations `Γ_j` vs `Γ_i`.
pub fn thm31_dominant(model: &ModelSpec, i: usize, box_r: &[f64]) -> Result<(bool, Vec<Evidence>)> {
    let (ok, mut ev) = single_species(model, i, box_r, Relation::StrictlyAbove, "dominant")?;
    for j in 0..model.dim() {
        if j != i {
            ev.push(Evidence {
                tag: "dominant/converse".into(),
                i: j,
                j: i,
                face: Vec::new(),
                verdict: relation(model, j, i, box_r, &FaceRestriction::none())?,
            });
        }
    }
    Ok((ok, ev))
}

fn single_species(
    model: &ModelSpec,
    i: usize,
    box_r: &[f64],
    want: Relation,
    tag: &str,
) -> Result<(bool, Vec<Evidence>)> {
    if i >= model.dim() {
        return Err(CsxError::param("i", "species index out of range"));
    }
    let mut ok = self_limited(model, i);
    let mut ev = Vec::new();
    for j in 0..model.dim() {
        if j == i {
            continue;
        }
        let v = relation(model, i, j, box_r, &FaceRestriction::none())?;
        ok &= v.relation == want;
        ev.push(Evidence {
            tag: tag.to_string(),
            i,
            j,
            face: Vec::new(),
            verdict: v,
        });
    }
    Ok((ok, ev))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpeciesVerdict {
    Vanishing,
    Dominant,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceVerdict {
    pub per_species: Vec<SpeciesVerdict>,
    pub evidence: Vec<Evidence>,
    /// The globally attracting axial fixed point of the dominant species.
    pub gas_point: Option<FixedPointRecord>,
    /// Species order (0-based) under which a cascade was established.
    pub permutation: Option<Vec<usize>>,
}

impl DominanceVerdict {
    fn undetermined(n: usize) -> Self {
        DominanceVerdict {
            per_species: vec![SpeciesVerdict::Undetermined; n],
            evidence: Vec::new(),
            gas_point: None,
            permutation: None,
        }
    }

    pub fn dominant(&self) -> Option<usize> {
        self.per_species.iter().position(|v| *v == SpeciesVerdict::Dominant)
    }
}

type RelationCache = HashMap<(usize, usize, Vec<usize>), RelationVerdict>;

fn cached_relation(
    model: &ModelSpec,
    cache: &mut RelationCache,
    i: usize,
    j: usize,
    box_r: &[f64],
    face: &[usize],
) -> Result<RelationVerdict> {
    let key = (i, j, face.to_vec());
    if let Some(v) = cache.get(&key) {
        return Ok(v.clone());
    }
    let v = relation(model, i, j, box_r, &FaceRestriction::new(face.to_vec()))?;
    cache.insert(key, v.clone());
    Ok(v)
}

/// Cascade step for the species at position `pos` of `order`: its nullcline on
/// the face where all earlier species are zero must lie strictly below the
/// nullclines of all later species.
fn cascade_step(
    model: &ModelSpec,
    cache: &mut RelationCache,
    order: &[usize],
    pos: usize,
    box_r: &[f64],
    evidence: &mut Vec<Evidence>,
) -> Result<bool> {
    let i = order[pos];
    let mut face = order[..pos].to_vec();
    face.sort_unstable();
    let mut ok = self_limited(model, i);
    for &j in &order[pos + 1..] {
        let v = cached_relation(model, cache, i, j, box_r, &face)?;
        ok &= v.relation == Relation::StrictlyBelow;
        evidence.push(Evidence {
            tag: "cascade".into(),
            i,
            j,
            face: face.clone(),
            verdict: v,
        });
    }
    Ok(ok)
}

fn cascade_in_order(model: &ModelSpec, order: &[usize], k: usize, box_r: &[f64]) -> Result<DominanceVerdict> {
    let n = model.dim();
    if k < 1 || k > n - 1 {
        return Err(CsxError::param("k", format!("must lie in 1..={}", n - 1)));
    }
    let mut cache = RelationCache::new();
    let mut verdict = DominanceVerdict::undetermined(n);
    let mut all = true;
    for pos in 0..k {
        if !cascade_step(model, &mut cache, order, pos, box_r, &mut verdict.evidence)? {
            all = false;
            break;
        }
        verdict.per_species[order[pos]] = SpeciesVerdict::Vanishing;
    }
    if all && k == n - 1 {
        let last = order[n - 1];
        if self_limited(model, last) {
            verdict.per_species[last] = SpeciesVerdict::Dominant;
            verdict.gas_point = Some(fixed_point_record(model, &axial_state(model, last)?)?);
        }
    }
    verdict.permutation = Some(order.to_vec());
    Ok(verdict)
}

/// Cascade in the natural species order for the first `k` species; the longest
/// prefix satisfying the hypotheses is marked vanishing.
pub fn thm32_cascade(model: &ModelSpec, k: usize, box_r: &[f64]) -> Result<DominanceVerdict> {
    let order: Vec<usize> = (0..model.dim()).collect();
    cascade_in_order(model, &order, k, box_r)
}

/// First permutation (lexicographic, 0-based) under which the full cascade holds.
/// Exhaustive for `n ≤ 8`, a single greedy order otherwise.
pub fn cor31_search(model: &ModelSpec, box_r: &[f64]) -> Result<Option<(Vec<usize>, DominanceVerdict)>> {
    let n = model.dim();
    let mut cache = RelationCache::new();
    if n > MAX_EXHAUSTIVE_DIM {
        let mut above = vec![0usize; n];
        for (i, count) in above.iter_mut().enumerate() {
            for j in 0..n {
                if i != j
                    && cached_relation(model, &mut cache, i, j, box_r, &[])?.relation
                        == Relation::StrictlyAbove
                {
                    *count += 1;
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (above[i], i));
        let v = cascade_in_order(model, &order, n - 1, box_r)?;
        return Ok((v.dominant().is_some()).then_some((order, v)));
    }

    fn dfs(
        model: &ModelSpec,
        cache: &mut RelationCache,
        box_r: &[f64],
        order: &mut Vec<usize>,
        used: &mut Vec<bool>,
    ) -> Result<bool> {
        let n = model.dim();
        if order.len() == n - 1 {
            let last = (0..n).find(|k| !used[*k]).unwrap();
            order.push(last);
            if self_limited(model, last) {
                return Ok(true);
            }
            order.pop();
            return Ok(false);
        }
        for s in 0..n {
            if used[s] {
                continue;
            }
            order.push(s);
            used[s] = true;
            let mut full = order.clone();
            full.extend((0..n).filter(|k| !used[*k]));
            let mut scratch = Vec::new();
            if cascade_step(model, cache, &full, order.len() - 1, box_r, &mut scratch)?
                && dfs(model, cache, box_r, order, used)?
            {
                return Ok(true);
            }
            used[s] = false;
            order.pop();
        }
        Ok(false)
    }

    let mut order = Vec::with_capacity(n);
    let mut used = vec![false; n];
    if dfs(model, &mut cache, box_r, &mut order, &mut used)? {
        let v = cascade_in_order(model, &order, n - 1, box_r)?;
        Ok(Some((order, v)))
    } else {
        Ok(None)
    }
}

/// The finite inequality systems that imply the nullcline relations for the
/// built-in families. Species indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClosedForm {
    /// Leslie–Gower: species `i` vanishes.
    E20(usize),
    /// Leslie–Gower: species `i` dominates.
    E21(usize),
    /// Leslie–Gower: cascade in natural order, last species dominates.
    E23,
    /// Atkinson–Allen: species `i` vanishes.
    E25(usize),
    /// Atkinson–Allen: species `i` dominates.
    E26(usize),
    /// Atkinson–Allen: cascade.
    E27,
    /// Ricker: existence of the simplex.
    E30,
    /// Ricker: species `i` vanishes.
    E31(usize),
    /// Ricker: species `i` dominates.
    E32(usize),
    /// Ricker: cascade.
    E33,
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClosedForm::E20(i) => write!(f, "e20:{}", i + 1),
            ClosedForm::E21(i) => write!(f, "e21:{}", i + 1),
            ClosedForm::E23 => write!(f, "e23"),
            ClosedForm::E25(i) => write!(f, "e25:{}", i + 1),
            ClosedForm::E26(i) => write!(f, "e26:{}", i + 1),
            ClosedForm::E27 => write!(f, "e27"),
            ClosedForm::E30 => write!(f, "e30"),
            ClosedForm::E31(i) => write!(f, "e31:{}", i + 1),
            ClosedForm::E32(i) => write!(f, "e32:{}", i + 1),
            ClosedForm::E33 => write!(f, "e33"),
        }
    }
}

impl FromStr for ClosedForm {
    type Err = CsxError;

    /// `e21:1` style tags with 1-based species.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || CsxError::Format(format!("unknown closed-form tag `{}`", s));
        let (name, species) = match s.split_once(':') {
            Some((a, b)) => {
                let i: usize = b.trim().parse().map_err(|_| bad())?;
                if i == 0 {
                    return Err(bad());
                }
                (a.trim(), Some(i - 1))
            }
            None => (s.trim(), None),
        };
        let need = |i: Option<usize>| i.ok_or_else(bad);
        Ok(match name.to_ascii_lowercase().as_str() {
            "e20" => ClosedForm::E20(need(species)?),
            "e21" => ClosedForm::E21(need(species)?),
            "e23" => ClosedForm::E23,
            "e25" => ClosedForm::E25(need(species)?),
            "e26" => ClosedForm::E26(need(species)?),
            "e27" => ClosedForm::E27,
            "e30" => ClosedForm::E30,
            "e31" => ClosedForm::E31(need(species)?),
            "e32" => ClosedForm::E32(need(species)?),
            "e33" => ClosedForm::E33,
            _ => return Err(bad()),
        })
    }
}

impl ClosedForm {
    fn families(self) -> &'static [Family] {
        match self {
            ClosedForm::E20(_) | ClosedForm::E21(_) | ClosedForm::E23 => &[Family::LeslieGower],
            ClosedForm::E25(_) | ClosedForm::E26(_) | ClosedForm::E27 => {
                &[Family::AtkinsonAllenGeneral, Family::AtkinsonAllenStandard]
            }
            ClosedForm::E30 | ClosedForm::E31(_) | ClosedForm::E32(_) | ClosedForm::E33 => &[Family::Ricker],
        }
    }

    pub fn species(self) -> Option<usize> {
        match self {
            ClosedForm::E20(i)
            | ClosedForm::E21(i)
            | ClosedForm::E25(i)
            | ClosedForm::E26(i)
            | ClosedForm::E31(i)
            | ClosedForm::E32(i) => Some(i),
            _ => None,
        }
    }
}

/// Evaluates a closed-form inequality system exactly on the model parameters.
pub fn closed_form_check(model: &ModelSpec, tag: ClosedForm) -> Result<bool> {
    if !tag.families().contains(&model.family()) {
        return Err(CsxError::MismatchedTag {
            tag: tag.to_string(),
            family: model.family().to_string(),
        });
    }
    let n = model.dim();
    if let Some(i) = tag.species() {
        if i >= n {
            return Err(CsxError::param("i", "species index out of range"));
        }
    }
    let a = model.interaction().expect("plane family");
    // Nullcline levels: c_i − 1, u_i or 1.
    let lvl: Vec<f64> = match model.family() {
        Family::LeslieGower => model.c().iter().map(|c| c - 1.0).collect(),
        Family::Ricker => vec![1.0; n],
        _ => model.u().to_vec(),
    };
    let others = |i: usize| (0..n).filter(move |j| *j != i);
    let below = |i: usize| {
        others(i).all(|j| (0..n).all(|k| a[(j, k)] * lvl[i] < a[(i, k)] * lvl[j]))
    };
    let above = |i: usize| {
        others(i).all(|j| {
            (0..n).all(|k| {
                (a[(i, k)] == 0.0 && a[(j, k)] == 0.0) || a[(i, k)] * lvl[j] < a[(j, k)] * lvl[i]
            })
        })
    };
    let cascade = || {
        (0..n - 1).all(|i| {
            (i + 1..n).all(|j| {
                a[(j, i)] * lvl[i] < a[(i, i)] * lvl[j]
                    && (i + 1..n).all(|k| a[(i + 1, k)] * lvl[i] < a[(i, k)] * lvl[i + 1])
            })
        })
    };
    Ok(match tag {
        ClosedForm::E20(i) | ClosedForm::E25(i) | ClosedForm::E31(i) => below(i),
        ClosedForm::E21(i) | ClosedForm::E26(i) | ClosedForm::E32(i) => above(i),
        ClosedForm::E23 | ClosedForm::E27 | ClosedForm::E33 => cascade(),
        ClosedForm::E30 => {
            let u = model.u();
            let row = (0..n).all(|i| u[i] < a[(i, i)] / (0..n).map(|j| a[(i, j)]).sum::<f64>());
            let scaled =
                (0..n).all(|i| u[i] < 1.0 / (0..n).map(|j| a[(i, j)] / a[(j, j)]).sum::<f64>());
            row || scaled
        }
    })
}

/// Combines single-species criteria, the natural-order cascade and the
/// permutation search into one verdict.
pub fn analyze_dominance(model: &ModelSpec, box_r: &[f64]) -> Result<DominanceVerdict> {
    let n = model.dim();
    let mut verdict = DominanceVerdict::undetermined(n);

    for i in 0..n {
        let (ok, ev) = thm31_dominant(model, i, box_r)?;
        verdict.evidence.extend(ev);
        if ok {
            verdict.per_species = vec![SpeciesVerdict::Vanishing; n];
            verdict.per_species[i] = SpeciesVerdict::Dominant;
            verdict.gas_point = Some(fixed_point_record(model, &axial_state(model, i)?)?);
            return Ok(verdict);
        }
    }
    for i in 0..n {
        let (ok, ev) = thm31_vanishing(model, i, box_r)?;
        verdict.evidence.extend(ev);
        if ok {
            verdict.per_species[i] = SpeciesVerdict::Vanishing;
        }
    }
    let natural = thm32_cascade(model, n - 1, box_r)?;
    merge(&mut verdict, natural);
    if verdict.dominant().is_none() {
        if let Some((_, v)) = cor31_search(model, box_r)? {
            merge(&mut verdict, v);
        }
    }
    Ok(verdict)
}

fn merge(into: &mut DominanceVerdict, from: DominanceVerdict) {
    for (k, v) in from.per_species.iter().enumerate() {
        match v {
            SpeciesVerdict::Dominant => into.per_species[k] = SpeciesVerdict::Dominant,
            SpeciesVerdict::Vanishing if into.per_species[k] == SpeciesVerdict::Undetermined => {
                into.per_species[k] = SpeciesVerdict::Vanishing
            }
            _ => {}
        }
    }
    into.evidence.extend(from.evidence);
    if from.gas_point.is_some() {
        into.gas_point = from.gas_point;
        into.permutation = from.permutation;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Response;
    use nalgebra::DMatrix;

    fn e22() -> ModelSpec {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.25, 2.0, 1.0, 0.2, 2.0, 0.0, 1.0]);
        ModelSpec::leslie_gower(a, vec![2.0; 3], Some(vec![1.1; 3])).unwrap()
    }

    #[test]
    fn planes_per_family() {
        let p = nullcline_plane(&e22(), 2).unwrap();
        assert_eq!(p.normal, vec![2.0, 0.0, 1.0]);
        assert_eq!(p.level, 1.0);
        let r = ModelSpec::ricker(DMatrix::identity(2, 2), vec![0.3, 0.7], None).unwrap();
        assert_eq!(nullcline_plane(&r, 1).unwrap().level, 1.0);
        let aa = ModelSpec::atkinson_allen(DMatrix::identity(2, 2), vec![0.5, 0.5], vec![2.0, 3.0], None)
            .unwrap();
        assert_eq!(nullcline_plane(&aa, 1).unwrap().level, 3.0);
    }

    #[test]
    fn worked_example_relations() {
        let m = e22();
        let r = m.box_corner().to_vec();
        let face = FaceRestriction::none();
        let v13 = relation(&m, 0, 2, &r, &face).unwrap();
        assert_eq!(v13.relation, Relation::StrictlyAbove);
        let v12 = relation(&m, 0, 1, &r, &face).unwrap();
        assert_eq!(v12.relation, Relation::StrictlyAbove);
        let v21 = relation(&m, 1, 0, &r, &face).unwrap();
        assert_eq!(v21.relation, Relation::StrictlyBelow);
        let w = v21.witness.unwrap();
        assert!((w[0] - 0.39).abs() < 1e-15 && w[1] == 0.0 && w[2] == 1.1);
        let f1 = m.growth(&w).unwrap()[0];
        assert!((f1 - 2.0 / 1.665).abs() < 1e-12);
        let s31 = sampled_relation(&m, 2, 0, &r, &face, 32).unwrap();
        assert_eq!(s31.relation, Relation::StrictlyBelow);
        assert!(s31.sampled);
    }

    #[test]
    fn identical_planes_are_neither() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let m = ModelSpec::ricker(a, vec![0.2, 0.2], None).unwrap();
        let v = relation(&m, 0, 1, m.box_corner(), &FaceRestriction::none()).unwrap();
        assert_eq!(v.relation, Relation::Neither);
        assert!(v.witness.is_some());
        assert!(v.margin.abs() < 1e-15);
    }

    #[test]
    fn same_species_is_rejected() {
        let m = e22();
        assert!(sampled_relation(&m, 1, 1, m.box_corner(), &FaceRestriction::none(), 8).is_err());
    }

    #[test]
    fn worked_example_dominance() {
        let m = e22();
        let r = m.box_corner().to_vec();
        let (ok, ev) = thm31_dominant(&m, 0, &r).unwrap();
        assert!(ok);
        assert!(ev.iter().any(|e| e.verdict.witness.as_deref() == Some(&[0.39, 0.0, 1.1][..])
            || e.verdict.witness.as_ref().is_some_and(|w| (w[0] - 0.39).abs() < 1e-15 && w[2] == 1.1)));
        assert!(!thm31_dominant(&m, 1, &r).unwrap().0);
        let v = analyze_dominance(&m, &r).unwrap();
        assert_eq!(
            v.per_species,
            vec![SpeciesVerdict::Dominant, SpeciesVerdict::Vanishing, SpeciesVerdict::Vanishing]
        );
        assert_eq!(v.gas_point.unwrap().location, vec![1.0, 0.0, 0.0]);
        // Γ_2 and Γ_3 share (0.5, 0, 0), so no cascade order exists.
        assert!(cor31_search(&m, &r).unwrap().is_none());
    }

    #[test]
    fn symmetric_model_is_undetermined() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let m = ModelSpec::leslie_gower(a, vec![2.0, 2.0], None).unwrap();
        let r = m.box_corner().to_vec();
        assert!(!thm31_vanishing(&m, 0, &r).unwrap().0);
        let v = analyze_dominance(&m, &r).unwrap();
        assert!(v.per_species.iter().all(|s| *s == SpeciesVerdict::Undetermined));
        assert!(cor31_search(&m, &r).unwrap().is_none());
    }

    #[test]
    fn closed_form_examples() {
        let lg = ModelSpec::leslie_gower(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]),
            vec![2.0, 3.0],
            None,
        )
        .unwrap();
        assert!(!closed_form_check(&lg, ClosedForm::E20(0)).unwrap());
        let ricker = ModelSpec::ricker(DMatrix::identity(2, 2), vec![0.4, 0.4], None).unwrap();
        assert!(closed_form_check(&ricker, ClosedForm::E30).unwrap());
        assert!(matches!(
            closed_form_check(&ricker, ClosedForm::E21(0)),
            Err(CsxError::MismatchedTag { .. })
        ));
        // Zero column: k = 3 passes through the a_ik = a_jk = 0 branch.
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 2.0, 1.0, 0.0, 2.0, 1.0, 1.0]);
        let aa = ModelSpec::atkinson_allen(a, vec![0.5; 3], vec![1.0; 3], None).unwrap();
        assert!(closed_form_check(&aa, ClosedForm::E26(0)).unwrap());
        // a_12 = 0.5 is not below a_22 = 0.4.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 2.0, 0.4]);
        let aa = ModelSpec::atkinson_allen(a, vec![0.5; 2], vec![1.0; 2], None).unwrap();
        assert!(!closed_form_check(&aa, ClosedForm::E26(0)).unwrap());
        assert!("e21:2".parse::<ClosedForm>().unwrap() == ClosedForm::E21(1));
        assert!("e99".parse::<ClosedForm>().is_err());
    }

    #[test]
    fn ricker_cascade_gives_last_species() {
        // a_ji < a_ii and a_(i+1)k < a_ik for the later species.
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.5, 1.5, 1.0, 1.4, 1.2, 0.5, 0.6, 1.0]);
        let m = ModelSpec::ricker(a, vec![0.2; 3], None).unwrap();
        assert!(closed_form_check(&m, ClosedForm::E33).unwrap());
        let v = thm32_cascade(&m, 2, m.box_corner()).unwrap();
        assert_eq!(v.per_species[2], SpeciesVerdict::Dominant);
        let (perm, _) = cor31_search(&m, m.box_corner()).unwrap().unwrap();
        assert_eq!(perm, vec![0, 1, 2]);
    }

    #[test]
    fn flat_self_limitation_blocks_dominance() {
        // G_2 is flat on [0.9, 1.1], so ∂f_2/∂x_2 vanishes at Q_2.
        let flat = Response::callback(
            |s| 1.0 + (0.9 - s).max(0.0) - (s - 1.1).max(0.0),
            |s| if 1.0 + (0.9 - s).max(0.0) > 1.0 || s > 1.1 { -1.0 } else { 0.0 },
        );
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.5, 1.0]);
        let m = ModelSpec::plane_nullcline(
            a,
            vec![0.5, 1.0],
            vec![Response::Exponential { rate: 1.0 }, flat],
            None,
        )
        .unwrap();
        let v = thm32_cascade(&m, 1, m.box_corner()).unwrap();
        assert_eq!(v.per_species, vec![SpeciesVerdict::Vanishing, SpeciesVerdict::Undetermined]);
        assert!(v.gas_point.is_none());
    }
}
