//! Competitive Kolmogorov maps `T_i(x) = x_i f_i(x)` on the nonnegative orthant.
//!
//! A [`ModelSpec`] fixes one of the built-in growth families (Leslie–Gower,
//! generalised and standard Atkinson–Allen, Ricker), a plane-nullcline family
//! `f_i(x) = G_i((Ax)_i)` with user-supplied scalar responses, or a fully general
//! growth field. Everything here is a pure function of `(model, x)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CsxError, Result};

/// Components at or below this value count as zero when computing supports.
pub const ZERO_THRESHOLD: f64 = 1e-14;

/// Default analysis box corner as a multiple of the axial fixed points.
pub const DEFAULT_BOX_FACTOR: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LeslieGower,
    AtkinsonAllenGeneral,
    AtkinsonAllenStandard,
    Ricker,
    PlaneNullclineCustom,
    /// Arbitrary growth field supplied as callbacks; nullclines are not planes.
    General,
}

impl Family {
    /// Families whose nullclines `f_i = 1` are the planes `a_i · x = level_i`.
    pub fn has_plane_nullclines(self) -> bool {
        !matches!(self, Family::General)
    }

    pub fn is_builtin(self) -> bool {
        matches!(
            self,
            Family::LeslieGower
                | Family::AtkinsonAllenGeneral
                | Family::AtkinsonAllenStandard
                | Family::Ricker
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::LeslieGower => "leslie_gower",
            Family::AtkinsonAllenGeneral => "atkinson_allen_general",
            Family::AtkinsonAllenStandard => "atkinson_allen_standard",
            Family::Ricker => "ricker",
            Family::PlaneNullclineCustom => "plane_nullcline_custom",
            Family::General => "general",
        };
        f.write_str(name)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Scalar response `G_i` of the plane-nullcline family, evaluated at `s = (Ax)_i`.
///
/// The parametric shapes are normalised so that `G(u) = 1` at the declared level `u`.
#[derive(Clone)]
pub enum Response {
    /// `G(s) = exp(rate · (u − s))`
    Exponential { rate: f64 },
    /// `G(s) = ((1 + u) / (1 + s))^exponent`
    Power { exponent: f64 },
    /// User callbacks for `G` and `G'`.
    Callback { value: ScalarFn, derivative: ScalarFn },
}

impl Response {
    pub fn callback(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Response::Callback {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        }
    }

    #[inline]
    pub fn value(&self, s: f64, u: f64) -> f64 {
        match self {
            Response::Exponential { rate } => (rate * (u - s)).exp(),
            Response::Power { exponent } => ((1.0 + u) / (1.0 + s)).powf(*exponent),
            Response::Callback { value, .. } => value(s),
        }
    }

    #[inline]
    pub fn derivative(&self, s: f64, u: f64) -> f64 {
        match self {
            Response::Exponential { rate } => -rate * (rate * (u - s)).exp(),
            Response::Power { exponent } => {
                -exponent / (1.0 + s) * ((1.0 + u) / (1.0 + s)).powf(*exponent)
            }
            Response::Callback { derivative, .. } => derivative(s),
        }
    }

    fn tag(&self) -> String {
        match self {
            Response::Exponential { rate } => format!("exp:{:e}", rate),
            Response::Power { exponent } => format!("pow:{:e}", exponent),
            Response::Callback { .. } => "callback".to_string(),
        }
    }
}

impl fmt::Debug for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// A growth field `f` with its Jacobian `Df`, for models outside the plane families.
pub trait GrowthField: Send + Sync {
    fn dimension(&self) -> usize;
    fn growth(&self, x: &[f64], out: &mut [f64]);
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;
}

/// A growth field restricted to a coordinate face, embedded back into the full space.
struct FaceField {
    parent: Arc<dyn GrowthField>,
    keep: Vec<usize>,
}

impl FaceField {
    fn lift(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.parent.dimension()];
        for (&k, &v) in self.keep.iter().zip(x) {
            full[k] = v;
        }
        full
    }
}

impl GrowthField for FaceField {
    fn dimension(&self) -> usize {
        self.keep.len()
    }

    fn growth(&self, x: &[f64], out: &mut [f64]) {
        let full = self.lift(x);
        let mut f = vec![0.0; full.len()];
        self.parent.growth(&full, &mut f);
        for (o, &k) in out.iter_mut().zip(&self.keep) {
            *o = f[k];
        }
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let j = self.parent.jacobian(&self.lift(x));
        DMatrix::from_fn(self.keep.len(), self.keep.len(), |a, b| {
            j[(self.keep[a], self.keep[b])]
        })
    }
}

/// Which of the two competition matrices to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    /// `M_ij = −(x_i / f_i) ∂f_i/∂x_j`
    M,
    /// `M̃_ij = −(x_j / f_i) ∂f_i/∂x_j`
    Mtilde,
}

/// An immutable, validated competitive map together with its analysis box `[0, r]`.
#[derive(Clone)]
pub struct ModelSpec {
    family: Family,
    n: usize,
    a: DMatrix<f64>,
    c: Vec<f64>,
    u: Vec<f64>,
    r: Vec<f64>,
    r_defaulted: bool,
    responses: Vec<Response>,
    field: Option<Arc<dyn GrowthField>>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("family", &self.family)
            .field("n", &self.n)
            .field("a", &self.a)
            .field("c", &self.c)
            .field("u", &self.u)
            .field("r", &self.r)
            .field("responses", &self.responses)
            .finish()
    }
}

fn validate_interaction(a: &DMatrix<f64>) -> Result<usize> {
    let n = a.nrows();
    if n < 2 {
        return Err(CsxError::param("n", "at least two species are required"));
    }
    if a.ncols() != n {
        return Err(CsxError::param(
            "A",
            format!("expected a square matrix, got {}x{}", n, a.ncols()),
        ));
    }
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)];
            let name = format!("a_{}{}", i + 1, j + 1);
            if !v.is_finite() {
                return Err(CsxError::param(name, "must be finite"));
            }
            if i == j && v <= 0.0 {
                return Err(CsxError::param(name, "diagonal entries must be > 0"));
            }
            if v < 0.0 {
                return Err(CsxError::param(name, "entries must be >= 0"));
            }
        }
    }
    Ok(n)
}

fn check_len(field: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(CsxError::param(
            field,
            format!("expected {} entries, got {}", n, v.len()),
        ));
    }
    for (i, x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(CsxError::param(format!("{}_{}", field, i + 1), "must be finite"));
        }
    }
    Ok(())
}

impl ModelSpec {
    /// `f_i(x) = c_i / (1 + Σ_k a_ik x_k)`.
    ///
    /// `c_i > 0` is required for positivity; `c_i > 1` (existence of the axial
    /// fixed point) is left to the axial check so that it can be reported as a verdict.
    pub fn leslie_gower(a: DMatrix<f64>, c: Vec<f64>, r: Option<Vec<f64>>) -> Result<Self> {
        let n = validate_interaction(&a)?;
        check_len("c", &c, n)?;
        for (i, &ci) in c.iter().enumerate() {
            if ci <= 0.0 {
                return Err(CsxError::param(format!("c_{}", i + 1), "must be > 0"));
            }
        }
        Self::finish(Family::LeslieGower, a, c, vec![1.0; n], r, Vec::new(), None)
    }

    /// `f_i(x) = c_i + (1 + u_i)(1 − c_i) / (1 + Σ_k a_ik x_k)` with `0 < c_i < 1`, `u_i > 0`.
    pub fn atkinson_allen(
        a: DMatrix<f64>,
        c: Vec<f64>,
        u: Vec<f64>,
        r: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = validate_interaction(&a)?;
        check_len("c", &c, n)?;
        check_len("u", &u, n)?;
        for i in 0..n {
            if !(c[i] > 0.0 && c[i] < 1.0) {
                return Err(CsxError::param(format!("c_{}", i + 1), "must lie in (0, 1)"));
            }
            if u[i] <= 0.0 {
                return Err(CsxError::param(format!("u_{}", i + 1), "must be > 0"));
            }
        }
        Self::finish(Family::AtkinsonAllenGeneral, a, c, u, r, Vec::new(), None)
    }

    /// `f_i(x) = c + 2(1 − c) / (1 + Σ_k a_ik x_k)` with a common `0 < c < 1`.
    pub fn atkinson_allen_standard(a: DMatrix<f64>, c: f64, r: Option<Vec<f64>>) -> Result<Self> {
        let n = validate_interaction(&a)?;
        if !(c > 0.0 && c < 1.0) {
            return Err(CsxError::param("c", "must lie in (0, 1)"));
        }
        Self::finish(
            Family::AtkinsonAllenStandard,
            a,
            vec![c; n],
            vec![1.0; n],
            r,
            Vec::new(),
            None,
        )
    }

    /// `f_i(x) = exp(u_i (1 − Σ_k a_ik x_k))` with `u_i > 0`.
    pub fn ricker(a: DMatrix<f64>, u: Vec<f64>, r: Option<Vec<f64>>) -> Result<Self> {
        let n = validate_interaction(&a)?;
        check_len("u", &u, n)?;
        for (i, &ui) in u.iter().enumerate() {
            if ui <= 0.0 {
                return Err(CsxError::param(format!("u_{}", i + 1), "must be > 0"));
            }
        }
        Self::finish(Family::Ricker, a, vec![1.0; n], u, r, Vec::new(), None)
    }

    /// `f_i(x) = G_i((Ax)_i)` with `G_i(u_i) = 1`.
    pub fn plane_nullcline(
        a: DMatrix<f64>,
        u: Vec<f64>,
        responses: Vec<Response>,
        r: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = validate_interaction(&a)?;
        check_len("u", &u, n)?;
        if responses.len() != n {
            return Err(CsxError::param(
                "response",
                format!("expected {} responses, got {}", n, responses.len()),
            ));
        }
        for i in 0..n {
            if u[i] <= 0.0 {
                return Err(CsxError::param(format!("u_{}", i + 1), "must be > 0"));
            }
            let at_level = responses[i].value(u[i], u[i]);
            if !((at_level - 1.0).abs() <= 1e-10) {
                return Err(CsxError::param(
                    format!("response_{}", i + 1),
                    format!("G(u) must equal 1, got {}", at_level),
                ));
            }
            let at_zero = responses[i].value(0.0, u[i]);
            if !(at_zero > 0.0 && at_zero.is_finite()) {
                return Err(CsxError::param(
                    format!("response_{}", i + 1),
                    "G(0) must be positive and finite",
                ));
            }
        }
        Self::finish(
            Family::PlaneNullclineCustom,
            a,
            vec![1.0; n],
            u,
            r,
            responses,
            None,
        )
    }

    /// A model given by an arbitrary growth field. The analysis box must be explicit.
    pub fn general(field: Arc<dyn GrowthField>, r: Vec<f64>) -> Result<Self> {
        let n = field.dimension();
        if n < 2 {
            return Err(CsxError::param("n", "at least two species are required"));
        }
        check_len("r", &r, n)?;
        if r.iter().any(|&v| v <= 0.0) {
            return Err(CsxError::param("r", "box corner must be strictly positive"));
        }
        Ok(ModelSpec {
            family: Family::General,
            n,
            a: DMatrix::zeros(n, n),
            c: vec![1.0; n],
            u: vec![1.0; n],
            r,
            r_defaulted: false,
            responses: Vec::new(),
            field: Some(field),
        })
    }

    fn finish(
        family: Family,
        a: DMatrix<f64>,
        c: Vec<f64>,
        u: Vec<f64>,
        r: Option<Vec<f64>>,
        responses: Vec<Response>,
        field: Option<Arc<dyn GrowthField>>,
    ) -> Result<Self> {
        let n = a.nrows();
        let mut model = ModelSpec {
            family,
            n,
            a,
            c,
            u,
            r: vec![1.0; n],
            r_defaulted: r.is_none(),
            responses,
            field,
        };
        match r {
            Some(r) => {
                check_len("r", &r, n)?;
                if let Some(i) = r.iter().position(|&v| v <= 0.0) {
                    return Err(CsxError::param(
                        format!("r_{}", i + 1),
                        "box corner must be strictly positive",
                    ));
                }
                model.r = r;
            }
            None => model.r = model.default_box(),
        }
        Ok(model)
    }

    /// `1.1 · q` componentwise. Species without an axial fixed point get
    /// `1.1 · max_j q_j` (or 1.1 when no species has one).
    fn default_box(&self) -> Vec<f64> {
        let q: Vec<Option<f64>> = (0..self.n).map(|i| self.axial_root_unbounded(i)).collect();
        let fallback = q
            .iter()
            .flatten()
            .cloned()
            .reduce(f64::max)
            .unwrap_or(1.0);
        q.iter()
            .map(|qi| DEFAULT_BOX_FACTOR * qi.unwrap_or(fallback))
            .collect()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Interaction matrix `A`; `None` for general growth fields.
    pub fn interaction(&self) -> Option<&DMatrix<f64>> {
        match self.family {
            Family::General => None,
            _ => Some(&self.a),
        }
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn responses(&self) -> &[Response] {
        &self.responses
    }

    /// Upper corner `r` of the analysis box `[0, r]`.
    pub fn box_corner(&self) -> &[f64] {
        &self.r
    }

    pub fn box_defaulted(&self) -> bool {
        self.r_defaulted
    }

    /// Same model with a different analysis box.
    pub fn with_box(&self, r: Vec<f64>) -> Result<Self> {
        check_len("r", &r, self.n)?;
        if let Some(i) = r.iter().position(|&v| v <= 0.0) {
            return Err(CsxError::param(
                format!("r_{}", i + 1),
                "box corner must be strictly positive",
            ));
        }
        let mut m = self.clone();
        m.r = r;
        m.r_defaulted = false;
        Ok(m)
    }

    /// The sub-community on the face spanned by `keep` (indices into this model).
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        if keep.len() < 2 {
            return Err(CsxError::param("keep", "a sub-community needs at least two species"));
        }
        if keep.iter().any(|&k| k >= self.n) {
            return Err(CsxError::param("keep", "species index out of range"));
        }
        let m = keep.len();
        let a = DMatrix::from_fn(m, m, |i, j| self.a[(keep[i], keep[j])]);
        let pick = |v: &[f64]| keep.iter().map(|&k| v[k]).collect::<Vec<_>>();
        Ok(ModelSpec {
            family: self.family,
            n: m,
            a,
            c: pick(&self.c),
            u: pick(&self.u),
            r: pick(&self.r),
            r_defaulted: false,
            responses: keep
                .iter()
                .filter_map(|&k| self.responses.get(k).cloned())
                .collect(),
            field: self.field.as_ref().map(|f| {
                Arc::new(FaceField {
                    parent: f.clone(),
                    keep: keep.to_vec(),
                }) as Arc<dyn GrowthField>
            }),
        })
    }

    /// Stable identifier of the parameters, used to tag derived artefacts.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.family.to_string().as_bytes());
        h.update((self.n as u64).to_le_bytes());
        for v in self.a.iter().chain(&self.c).chain(&self.u).chain(&self.r) {
            h.update(v.to_bits().to_le_bytes());
        }
        for resp in &self.responses {
            h.update(resp.tag().as_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{:02x}", b)).collect()
    }

    #[inline]
    fn row_load(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.n {
            s += self.a[(i, k)] * x[k];
        }
        s
    }

    pub(crate) fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(CsxError::Domain(format!(
                "state has {} components, model has {}",
                x.len(),
                self.n
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(CsxError::Domain(format!("component {} is not finite", i + 1)));
        }
        if let Some(i) = x.iter().position(|&v| v < 0.0) {
            return Err(CsxError::Domain(format!(
                "component {} is negative ({})",
                i + 1,
                x[i]
            )));
        }
        Ok(())
    }

    /// Growth rates without input validation; `x` may leave the orthant slightly
    /// (finite-difference stencils) as long as the family formula is defined there.
    pub fn eval_growth(&self, x: &[f64], out: &mut [f64]) {
        match self.family {
            Family::LeslieGower => {
                for i in 0..self.n {
                    out[i] = self.c[i] / (1.0 + self.row_load(i, x));
                }
            }
            Family::AtkinsonAllenGeneral | Family::AtkinsonAllenStandard => {
                for i in 0..self.n {
                    let ci = self.c[i];
                    out[i] = ci + (1.0 + self.u[i]) * (1.0 - ci) / (1.0 + self.row_load(i, x));
                }
            }
            Family::Ricker => {
                for i in 0..self.n {
                    out[i] = (self.u[i] * (1.0 - self.row_load(i, x))).exp();
                }
            }
            Family::PlaneNullclineCustom => {
                for i in 0..self.n {
                    out[i] = self.responses[i].value(self.row_load(i, x), self.u[i]);
                }
            }
            Family::General => self.field.as_ref().expect("general field").growth(x, out),
        }
    }

    /// `f_i(x)` alone, without input validation; `buf` (length `n`) is only
    /// used by the general family, which evaluates the whole field.
    pub fn eval_growth_component(&self, x: &[f64], i: usize, buf: &mut [f64]) -> f64 {
        match self.family {
            Family::LeslieGower => self.c[i] / (1.0 + self.row_load(i, x)),
            Family::AtkinsonAllenGeneral | Family::AtkinsonAllenStandard => {
                let ci = self.c[i];
                ci + (1.0 + self.u[i]) * (1.0 - ci) / (1.0 + self.row_load(i, x))
            }
            Family::Ricker => (self.u[i] * (1.0 - self.row_load(i, x))).exp(),
            Family::PlaneNullclineCustom => self.responses[i].value(self.row_load(i, x), self.u[i]),
            Family::General => {
                self.eval_growth(x, buf);
                buf[i]
            }
        }
    }

    /// Analytic `Df(x)` without input validation.
    pub fn eval_jacobian_growth(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        match self.family {
            Family::LeslieGower => DMatrix::from_fn(n, n, |i, j| {
                let d = 1.0 + self.row_load(i, x);
                -self.c[i] * self.a[(i, j)] / (d * d)
            }),
            Family::AtkinsonAllenGeneral | Family::AtkinsonAllenStandard => {
                DMatrix::from_fn(n, n, |i, j| {
                    let d = 1.0 + self.row_load(i, x);
                    -(1.0 + self.u[i]) * (1.0 - self.c[i]) * self.a[(i, j)] / (d * d)
                })
            }
            Family::Ricker => {
                let mut f = vec![0.0; n];
                self.eval_growth(x, &mut f);
                DMatrix::from_fn(n, n, |i, j| -self.u[i] * self.a[(i, j)] * f[i])
            }
            Family::PlaneNullclineCustom => {
                let g: Vec<f64> = (0..n)
                    .map(|i| self.responses[i].derivative(self.row_load(i, x), self.u[i]))
                    .collect();
                DMatrix::from_fn(n, n, |i, j| self.a[(i, j)] * g[i])
            }
            Family::General => self.field.as_ref().expect("general field").jacobian(x),
        }
    }

    /// `f(x)`, the vector of per-capita growth rates.
    pub fn growth(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        let mut f = vec![0.0; self.n];
        self.eval_growth(x, &mut f);
        if let Some(i) = f.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(CsxError::Domain(format!(
                "growth rate f_{} = {} is not positive and finite",
                i + 1,
                f[i]
            )));
        }
        Ok(f)
    }

    /// `T(x)` with `T_i(x) = x_i f_i(x)`.
    pub fn apply_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let f = self.growth(x)?;
        Ok(x.iter().zip(&f).map(|(xi, fi)| xi * fi).collect())
    }

    /// `Df(x)` from the family's closed form.
    pub fn jacobian_growth(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_state(x)?;
        Ok(self.eval_jacobian_growth(x))
    }

    /// `M(x)` or `M̃(x)`.
    pub fn matrix_m(&self, x: &[f64], kind: MatrixKind) -> Result<DMatrix<f64>> {
        let f = self.growth(x)?;
        let df = self.eval_jacobian_growth(x);
        Ok(assemble_m(x, &f, &df, kind))
    }

    /// `DT(x) = diag(f(x)) (I − M(x))`.
    pub fn jacobian_map(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let f = self.growth(x)?;
        let m = assemble_m(x, &f, &self.eval_jacobian_growth(x), MatrixKind::M);
        let n = self.n;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            f[i] * (id - m[(i, j)])
        }))
    }

    /// Axial fixed point `q_i`: the root of `f_i(s e_i) = 1` on `(0, r_i]`.
    pub fn axial_fixed_point(&self, i: usize) -> Result<f64> {
        if i >= self.n {
            return Err(CsxError::param("i", "species index out of range"));
        }
        let upper = self.r[i];
        let fail = || CsxError::NoAxialFixedPoint {
            species: i + 1,
            upper,
        };
        let q = match self.family {
            Family::LeslieGower => (self.c[i] - 1.0) / self.a[(i, i)],
            Family::AtkinsonAllenGeneral | Family::AtkinsonAllenStandard => {
                self.u[i] / self.a[(i, i)]
            }
            Family::Ricker => 1.0 / self.a[(i, i)],
            Family::PlaneNullclineCustom | Family::General => {
                self.axial_bisect(i, upper).ok_or_else(fail)?
            }
        };
        if q > 0.0 && q <= upper {
            Ok(q)
        } else {
            Err(fail())
        }
    }

    /// All axial fixed points `q = (q_1, …, q_n)`.
    pub fn axial_point(&self) -> Result<Vec<f64>> {
        (0..self.n).map(|i| self.axial_fixed_point(i)).collect()
    }

    fn axial_growth(&self, i: usize, s: f64) -> f64 {
        let mut x = vec![0.0; self.n];
        x[i] = s;
        let mut f = vec![0.0; self.n];
        self.eval_growth(&x, &mut f);
        f[i]
    }

    fn axial_bisect(&self, i: usize, upper: f64) -> Option<f64> {
        let g = |s: f64| self.axial_growth(i, s) - 1.0;
        if !(g(0.0) > 0.0) || !(g(upper) <= 0.0) {
            return None;
        }
        let (mut lo, mut hi) = (0.0, upper);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    fn axial_root_unbounded(&self, i: usize) -> Option<f64> {
        match self.family {
            Family::LeslieGower => {
                let q = (self.c[i] - 1.0) / self.a[(i, i)];
                (q > 0.0).then_some(q)
            }
            Family::AtkinsonAllenGeneral | Family::AtkinsonAllenStandard => {
                Some(self.u[i] / self.a[(i, i)])
            }
            Family::Ricker => Some(1.0 / self.a[(i, i)]),
            Family::PlaneNullclineCustom | Family::General => {
                let mut upper = match self.family {
                    Family::PlaneNullclineCustom => self.u[i] / self.a[(i, i)],
                    _ => 1.0,
                };
                for _ in 0..64 {
                    if self.axial_growth(i, upper) <= 1.0 {
                        return self.axial_bisect(i, upper);
                    }
                    upper *= 2.0;
                }
                None
            }
        }
    }
}

pub(crate) fn assemble_m(x: &[f64], f: &[f64], df: &DMatrix<f64>, kind: MatrixKind) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let w = match kind {
            MatrixKind::M => x[i],
            MatrixKind::Mtilde => x[j],
        };
        if w == 0.0 {
            0.0
        } else {
            -(w / f[i]) * df[(i, j)]
        }
    })
}

/// Indices `i` with `x_i` above [`ZERO_THRESHOLD`].
pub fn support(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, &v)| v > ZERO_THRESHOLD)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn e22() -> ModelSpec {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.25, 2.0, 1.0, 0.2, 2.0, 0.0, 1.0]);
        ModelSpec::leslie_gower(a, vec![2.0; 3], Some(vec![1.1; 3])).unwrap()
    }

    #[test]
    fn worked_example_growth_at_half_axis() {
        let f = e22().growth(&[0.5, 0.0, 0.0]).unwrap();
        assert!((f[0] - 2.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn growth_at_origin_equals_c() {
        let m = e22();
        assert_eq!(m.growth(&[0.0; 3]).unwrap(), vec![2.0; 3]);
    }

    #[test]
    fn ricker_identity_axial_growth_is_one() {
        let m = ModelSpec::ricker(DMatrix::identity(3, 3), vec![1.0; 3], None).unwrap();
        for i in 0..3 {
            let mut x = vec![0.0; 3];
            x[i] = 1.0;
            assert_eq!(m.growth(&x).unwrap()[i], 1.0);
        }
    }

    #[test]
    fn origin_is_fixed_and_axial_points_are_fixed() {
        let m = e22();
        assert_eq!(m.apply_map(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        for i in 0..3 {
            let q = m.axial_fixed_point(i).unwrap();
            assert_eq!(q, 1.0);
            let mut x = vec![0.0; 3];
            x[i] = q;
            assert_eq!(m.apply_map(&x).unwrap(), x);
        }
    }

    #[test]
    fn worked_example_map_at_half() {
        // 0.5·2/1.625, 0.5·2/2.6, 0.5·2/2.5
        let t = e22().apply_map(&[0.5; 3]).unwrap();
        let expect = [8.0 / 13.0, 5.0 / 13.0, 0.4];
        for k in 0..3 {
            assert!((t[k] - expect[k]).abs() < 1e-15, "{k}: {}", t[k]);
        }
    }

    #[test]
    fn non_finite_or_negative_input_is_domain_error() {
        let m = e22();
        assert!(matches!(m.growth(&[f64::NAN, 0.0, 0.0]), Err(CsxError::Domain(_))));
        assert!(matches!(m.apply_map(&[-1.0, 0.0, 0.0]), Err(CsxError::Domain(_))));
        assert!(matches!(m.growth(&[1.0, 0.0]), Err(CsxError::Domain(_))));
    }

    #[test]
    fn zero_interaction_gives_zero_derivative() {
        let m = e22();
        let df = m.jacobian_growth(&[0.3, 0.4, 0.5]).unwrap();
        assert_eq!(df[(0, 1)], 0.0);
        assert_eq!(df[(2, 1)], 0.0);
        assert!(df[(0, 2)] < 0.0);
    }

    #[test]
    fn ricker_derivative_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.7, 2.0]);
        let m = ModelSpec::ricker(a.clone(), vec![0.3, 0.5], None).unwrap();
        let x = [0.2, 0.3];
        let f = m.growth(&x).unwrap();
        let df = m.jacobian_growth(&x).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = -m.u()[i] * a[(i, j)] * f[i];
                assert!((df[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jacobian_map_at_origin_is_diag_f() {
        let m = e22();
        let dt = m.jacobian_map(&[0.0; 3]).unwrap();
        assert_eq!(dt, DMatrix::from_diagonal_element(3, 3, 2.0));
    }

    #[test]
    fn m_and_mtilde_vanish_at_origin_and_are_related() {
        let m = e22();
        assert_eq!(m.matrix_m(&[0.0; 3], MatrixKind::M).unwrap(), DMatrix::zeros(3, 3));
        assert_eq!(m.matrix_m(&[0.0; 3], MatrixKind::Mtilde).unwrap(), DMatrix::zeros(3, 3));
        let x = [0.3, 0.7, 0.2];
        let mm = m.matrix_m(&x, MatrixKind::M).unwrap();
        let mt = m.matrix_m(&x, MatrixKind::Mtilde).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((mt[(i, j)] - x[j] / x[i] * mm[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn m_row_and_mtilde_column_vanish_on_faces() {
        let m = e22();
        let x = [0.3, 0.0, 0.2];
        let mm = m.matrix_m(&x, MatrixKind::M).unwrap();
        let mt = m.matrix_m(&x, MatrixKind::Mtilde).unwrap();
        for k in 0..3 {
            assert_eq!(mm[(1, k)], 0.0);
            assert_eq!(mt[(k, 1)], 0.0);
        }
    }

    #[test]
    fn axial_closed_forms() {
        let ricker = ModelSpec::ricker(
            DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 1.0]),
            vec![0.1, 0.1],
            None,
        )
        .unwrap();
        assert_eq!(ricker.axial_fixed_point(0).unwrap(), 0.25);
        let aa = ModelSpec::atkinson_allen(
            DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 1.0]),
            vec![0.5, 0.5],
            vec![2.0, 1.0],
            None,
        )
        .unwrap();
        assert_eq!(aa.axial_fixed_point(0).unwrap(), 0.5);
        assert!((aa.box_corner()[0] - 0.55).abs() < 1e-15);
    }

    #[test]
    fn axial_outside_box_is_an_error() {
        let m = e22().with_box(vec![0.9, 1.1, 1.1]).unwrap();
        assert!(matches!(
            m.axial_fixed_point(0),
            Err(CsxError::NoAxialFixedPoint { species: 1, .. })
        ));
        let lg = ModelSpec::leslie_gower(
            DMatrix::identity(2, 2),
            vec![0.9, 2.0],
            None,
        )
        .unwrap();
        assert!(lg.axial_fixed_point(0).is_err());
        assert!((lg.box_corner()[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn custom_axial_point_by_bisection() {
        let resp = vec![Response::Exponential { rate: 1.5 }, Response::Power { exponent: 2.0 }];
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.3, 1.0]);
        let m = ModelSpec::plane_nullcline(a, vec![1.0, 0.6], resp, None).unwrap();
        let q = m.axial_point().unwrap();
        assert!((q[0] - 0.5).abs() < 1e-12);
        assert!((q[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn construction_validates_parameters() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 1.0]);
        match ModelSpec::leslie_gower(bad, vec![2.0, 2.0], None) {
            Err(CsxError::InvalidParameter { field, .. }) => assert_eq!(field, "a_11"),
            other => panic!("{other:?}"),
        }
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, -0.1, 1.0, 1.0]);
        assert!(ModelSpec::ricker(neg, vec![1.0, 1.0], None).is_err());
        assert!(ModelSpec::atkinson_allen(
            DMatrix::identity(2, 2),
            vec![1.2, 0.5],
            vec![1.0, 1.0],
            None
        )
        .is_err());
        assert!(ModelSpec::atkinson_allen_standard(DMatrix::identity(2, 2), 0.0, None).is_err());
        let resp = vec![Response::callback(|s| 2.0 - s, |_| -1.0); 2];
        assert!(ModelSpec::plane_nullcline(DMatrix::identity(2, 2), vec![0.5, 0.5], resp, None)
            .is_err());
    }

    #[test]
    fn support_thresholds_tiny_components() {
        assert!(support(&[0.0, 0.0, 0.0]).is_empty());
        assert_eq!(support(&[0.0, 1.0, 0.0]), vec![1]);
        assert_eq!(support(&[0.5, 0.0, 1.1]), vec![0, 2]);
        assert_eq!(support(&[1e-15, 2e-14]), vec![1]);
    }

    #[test]
    fn restriction_matches_face_dynamics() {
        let m = e22();
        let sub = m.restrict(&[0, 2]).unwrap();
        let t_full = m.apply_map(&[0.4, 0.0, 0.7]).unwrap();
        let t_sub = sub.apply_map(&[0.4, 0.7]).unwrap();
        assert_eq!(t_full[0], t_sub[0]);
        assert_eq!(t_full[2], t_sub[1]);
        assert_eq!(sub.box_corner(), &[1.1, 1.1]);
    }

    #[test]
    fn fingerprint_is_parameter_sensitive() {
        let m = e22();
        assert_eq!(m.fingerprint(), e22().fingerprint());
        assert_ne!(m.fingerprint(), m.with_box(vec![1.2; 3]).unwrap().fingerprint());
    }
}
