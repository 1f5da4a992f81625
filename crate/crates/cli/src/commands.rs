use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use csx_core::dominance::{analyze_dominance, DominanceVerdict, Evidence, Relation, SpeciesVerdict};
use csx_core::dynamics::{
    classify_omega, find_axial_and_origin, find_interior_fixed_points, iterate, FixedPointRecord, OmegaKind,
    DEFAULT_TRANSIENT, DEFAULT_WINDOW,
};
use csx_core::model::ModelSpec;
use csx_core::simplex::{compute_surface_with_tol, export_surface, unordered_violations, ExportFormat, RadialSurface};
use csx_core::verify::{verify_with, ConditionReport, ConditionVerdict, Overall, VerifyConfig};
use serde::Serialize;

use crate::modelfile::{load_model, LoadedModel};
use crate::output::{fmt_f64, fmt_vec, to_json, write_atomic};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NOT_ESTABLISHED: u8 = 2;
pub const EXIT_GAPS: u8 = 3;
pub const EXIT_OVERFLOW: u8 = 4;

/// Surfaces with more than this fraction of undetermined directions fail.
pub const MAX_GAP_FRACTION: f64 = 0.01;

fn verdict_line(name: &str, v: &ConditionVerdict) -> String {
    let mut s = format!("{:<14} {:<17} {}", name, format!("{:?}", v.status), v.detail);
    if let Some(w) = &v.witness {
        let _ = write!(s, " [witness {}]", fmt_vec(w));
    }
    s
}

pub fn render_conditions(model: &ModelSpec, report: &ConditionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model          {} (n = {}, fingerprint {})", model.family(), model.dim(), model.fingerprint());
    let _ = writeln!(s, "box r          {}", fmt_vec(model.box_corner()));
    if let Some(q) = &report.axial_point {
        let _ = writeln!(s, "q              {}", fmt_vec(q));
    }
    let _ = writeln!(s, "resolution     {}", report.resolution);
    for (name, v) in [
        ("axial", &report.axial),
        ("signs", &report.signs),
        ("spectral", &report.spectral),
        ("dissipative", &report.dissipative),
        ("inverse_signs", &report.inverse_signs),
    ] {
        let _ = writeln!(s, "{}", verdict_line(name, v));
    }
    let _ = writeln!(
        s,
        "classical all-negative Jacobian: {}",
        if report.classical_negative_jacobian { "yes" } else { "no" }
    );
    let _ = writeln!(s, "overall        {:?}", report.overall);
    s
}

pub fn cmd_verify(path: &Path, resolution: Option<usize>, strict: bool, json: bool) -> anyhow::Result<u8> {
    let m = load_model(path)?;
    let cfg = VerifyConfig { strict, ..VerifyConfig::default() };
    let report = verify_with(&m.spec, resolution.unwrap_or(m.verify_resolution), &cfg)?;
    if json {
        print!("{}", to_json(&report)?);
    } else {
        print!("{}", render_conditions(&m.spec, &report));
    }
    Ok(match report.overall {
        Overall::SimplexExists => EXIT_OK,
        Overall::NotEstablished => EXIT_NOT_ESTABLISHED,
    })
}

pub struct SimplexArgs {
    pub resolution: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: String,
    pub force: bool,
}

pub fn cmd_simplex(path: &Path, args: SimplexArgs) -> anyhow::Result<u8> {
    let m = load_model(path)?;
    let format: ExportFormat = args.format.parse()?;
    if format == ExportFormat::Obj && m.spec.dim() != 3 {
        bail!(csx_core::CsxError::Format(format!(
            "obj export needs 3 species, model has {}",
            m.spec.dim()
        )));
    }
    let report = verify_with(&m.spec, m.verify_resolution, &VerifyConfig::default())?;
    if report.overall != Overall::SimplexExists {
        if !args.force {
            eprintln!("conditions not established; rerun with --force to compute anyway");
            eprint!("{}", render_conditions(&m.spec, &report));
            return Ok(EXIT_NOT_ESTABLISHED);
        }
        eprintln!("warning: conditions not established, surface computed under --force");
    }
    let surface = compute_surface_with_tol(
        &m.spec,
        args.resolution.unwrap_or(m.simplex_resolution),
        &m.basin,
        m.height_tol,
    )?;
    let bytes = export_surface(&surface, format)?;
    match &args.out {
        Some(p) => write_atomic(p, &bytes)?,
        None => print!("{}", String::from_utf8(bytes)?),
    }
    let summary = surface_text(&surface);
    if args.out.is_some() {
        print!("{}", summary);
    } else {
        eprint!("{}", summary);
    }
    for g in &surface.gaps {
        eprintln!("undetermined direction {}: {}", g.index, g.reason);
    }
    Ok(if surface.gap_fraction() > MAX_GAP_FRACTION { EXIT_GAPS } else { EXIT_OK })
}

fn surface_text(surface: &RadialSurface) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "directions     {}", surface.directions.len());
    match surface.residual {
        Some(r) => {
            let _ = writeln!(s, "residual       {}", fmt_f64(r));
        }
        None => {
            let _ = writeln!(s, "residual       unavailable");
        }
    }
    if let Some((lo, hi)) = surface.height_range() {
        let _ = writeln!(s, "height range   [{}, {}]", fmt_f64(lo), fmt_f64(hi));
    }
    let _ = writeln!(s, "gaps           {}", surface.gaps.len());
    s
}

fn relation_symbol(r: Relation) -> &'static str {
    match r {
        Relation::StrictlyBelow => "strictly below",
        Relation::StrictlyAbove => "strictly above",
        Relation::Neither => "neither",
        Relation::EmptyIntersection => "empty",
    }
}

fn evidence_line(model: &ModelSpec, e: &Evidence) -> String {
    let face = if e.face.is_empty() {
        String::new()
    } else {
        let idx: Vec<String> = e.face.iter().map(|k| (k + 1).to_string()).collect();
        format!(" on x_{{{}}} = 0", idx.join(","))
    };
    let mut s = format!(
        "{:<18} Γ{}{} {} Γ{}  margin {}",
        e.tag,
        e.i + 1,
        face,
        relation_symbol(e.verdict.relation),
        e.j + 1,
        fmt_f64(e.verdict.margin)
    );
    if e.verdict.sampled {
        s.push_str(" (sampled)");
    }
    if let Some(w) = &e.verdict.witness {
        let _ = write!(s, "  witness {}", fmt_vec(w));
        if let Ok(f) = model.growth(w) {
            let _ = write!(s, "  f_{} = {}  f_{} = {}", e.i + 1, fmt_f64(f[e.i]), e.j + 1, fmt_f64(f[e.j]));
        }
    }
    s
}

fn fixed_point_line(r: &FixedPointRecord) -> String {
    let ev: Vec<String> = r
        .eigenvalues
        .iter()
        .map(|e| {
            if e.im == 0.0 {
                fmt_f64(e.re)
            } else {
                format!("{}{:+.16e}i", fmt_f64(e.re), e.im)
            }
        })
        .collect();
    format!("{}  {:?}  eigenvalues [{}]", fmt_vec(&r.location), r.classification, ev.join(", "))
}

pub fn render_dominance(model: &ModelSpec, v: &DominanceVerdict) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "species  verdict");
    for (k, sv) in v.per_species.iter().enumerate() {
        let _ = writeln!(s, "{:<8} {:?}", k + 1, sv);
    }
    if let Some(g) = &v.gas_point {
        let _ = writeln!(s, "globally asymptotically stable: {}", fixed_point_line(g));
    }
    if let Some(p) = &v.permutation {
        if v.dominant().is_some() {
            let idx: Vec<String> = p.iter().map(|k| (k + 1).to_string()).collect();
            let _ = writeln!(s, "cascade order  {}", idx.join(" "));
        }
    }
    let _ = writeln!(s, "evidence");
    for e in &v.evidence {
        let _ = writeln!(s, "  {}", evidence_line(model, e));
    }
    s
}

pub fn cmd_dominance(path: &Path, json: bool) -> anyhow::Result<u8> {
    let m = load_model(path)?;
    let v = analyze_dominance(&m.spec, m.spec.box_corner())?;
    if json {
        print!("{}", to_json(&v)?);
    } else {
        print!("{}", render_dominance(&m.spec, &v));
    }
    Ok(EXIT_OK)
}

pub fn cmd_simulate(path: &Path, x0: &[f64], steps: usize, out: Option<&Path>) -> anyhow::Result<u8> {
    let m = load_model(path)?;
    let n = m.spec.dim();
    if x0.len() != n {
        bail!("--x0 has {} components, model has {}", x0.len(), n);
    }
    let traj = iterate(&m.spec, x0, steps)?;
    let mut csv = String::new();
    let head: Vec<String> = (1..=n).map(|i| format!("x_{}", i)).collect();
    let _ = writeln!(csv, "step,{}", head.join(","));
    for (k, s) in traj.states.iter().enumerate() {
        let row: Vec<String> = s.iter().map(|v| fmt_f64(*v)).collect();
        let _ = writeln!(csv, "{},{}", k, row.join(","));
    }
    let omega = if x0.iter().all(|v| *v == 0.0) {
        "origin (fixed point)".to_string()
    } else {
        let last = traj.states.last().unwrap();
        let w = classify_omega(&m.spec, last, DEFAULT_TRANSIENT, DEFAULT_WINDOW)?;
        match w.kind {
            OmegaKind::FixedPoint => format!("fixed point {}", fmt_vec(&w.representative[0])),
            OmegaKind::PeriodicOrbit => format!("periodic orbit of period {}", w.period.unwrap_or(0)),
            OmegaKind::Unclassified => "unclassified".to_string(),
        }
    };
    match out {
        Some(p) => {
            write_atomic(p, csv.as_bytes())?;
            println!("final state    {}", fmt_vec(traj.states.last().unwrap()));
            println!("omega limit    {}", omega);
        }
        None => {
            print!("{}", csv);
            eprintln!("omega limit    {}", omega);
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_fixed_points(path: &Path, seeds: usize, json: bool) -> anyhow::Result<u8> {
    let m = load_model(path)?;
    let mut all = find_axial_and_origin(&m.spec);
    all.extend(find_interior_fixed_points(&m.spec, seeds)?);
    if json {
        print!("{}", to_json(&all)?);
    } else {
        for r in &all {
            println!("{}", fixed_point_line(r));
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct ModelEcho {
    pub family: String,
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Option<Vec<Vec<f64>>>,
    pub c: Vec<f64>,
    pub u: Vec<f64>,
    pub r: Vec<f64>,
    pub r_defaulted: bool,
    pub fingerprint: String,
    pub description: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SurfaceSummary {
    pub resolution: usize,
    pub directions: usize,
    pub residual: Option<f64>,
    pub vertex_heights: Vec<Option<f64>>,
    pub height_range: Option<(f64, f64)>,
    pub gaps: usize,
    pub unordered_violations: usize,
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub verify_s: f64,
    pub dominance_s: f64,
    pub fixed_points_s: f64,
    pub surface_s: f64,
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub model: ModelEcho,
    pub conditions: ConditionReport,
    pub dominance: DominanceVerdict,
    pub fixed_points: Vec<FixedPointRecord>,
    pub surface: Option<SurfaceSummary>,
    pub caveats: Vec<String>,
    pub timings: Option<Timings>,
}

fn echo(m: &LoadedModel) -> ModelEcho {
    let spec = &m.spec;
    ModelEcho {
        family: spec.family().to_string(),
        n: spec.dim(),
        a: spec
            .interaction()
            .map(|a| a.row_iter().map(|r| r.iter().cloned().collect()).collect()),
        c: spec.c().to_vec(),
        u: spec.u().to_vec(),
        r: spec.box_corner().to_vec(),
        r_defaulted: spec.box_defaulted(),
        fingerprint: spec.fingerprint(),
        description: m.description.clone(),
    }
}

pub fn build_report(m: &LoadedModel, resolution: Option<usize>, force: bool, timings: bool) -> anyhow::Result<(AnalysisReport, u8)> {
    let spec = &m.spec;
    let mut caveats = Vec::new();
    let t0 = Instant::now();
    let conditions = verify_with(spec, m.verify_resolution, &VerifyConfig::default())?;
    let t1 = Instant::now();
    let dominance = analyze_dominance(spec, spec.box_corner())?;
    let t2 = Instant::now();
    let mut fixed_points = find_axial_and_origin(spec);
    fixed_points.extend(find_interior_fixed_points(spec, if spec.dim() <= 3 { 6 } else { 3 })?);
    let t3 = Instant::now();

    if !spec.family().is_builtin() {
        caveats.push(
            "nullclines of custom responses are assumed to split the cone into three parts; this is not checked"
                .to_string(),
        );
    }
    let established = conditions.overall == Overall::SimplexExists;
    let mut code = EXIT_OK;
    let surface = if established || force {
        if !established {
            caveats.push("surface computed under --force although the conditions were not established".into());
        }
        let s = compute_surface_with_tol(spec, resolution.unwrap_or(m.report_resolution), &m.basin, m.height_tol)?;
        if s.gap_fraction() > MAX_GAP_FRACTION {
            code = EXIT_GAPS;
        }
        Some(SurfaceSummary {
            resolution: s.resolution,
            directions: s.directions.len(),
            residual: s.residual,
            vertex_heights: s.vertex_heights(),
            height_range: s.height_range(),
            gaps: s.gaps.len(),
            unordered_violations: unordered_violations(&s).len(),
        })
    } else {
        caveats.push("surface not computed: conditions not established".into());
        None
    };
    let t4 = Instant::now();
    let report = AnalysisReport {
        tool: "csx",
        version: env!("CARGO_PKG_VERSION"),
        model: echo(m),
        conditions,
        dominance,
        fixed_points,
        surface,
        caveats,
        timings: timings.then(|| Timings {
            verify_s: (t1 - t0).as_secs_f64(),
            dominance_s: (t2 - t1).as_secs_f64(),
            fixed_points_s: (t3 - t2).as_secs_f64(),
            surface_s: (t4 - t3).as_secs_f64(),
        }),
    };
    Ok((report, code))
}

pub fn cmd_report(
    path: &Path,
    out: Option<&Path>,
    resolution: Option<usize>,
    force: bool,
    timings: bool,
) -> anyhow::Result<u8> {
    let m = load_model(path)?;
    let (report, code) = build_report(&m, resolution, force, timings)?;
    let text = to_json(&report)?;
    match out {
        Some(p) => {
            write_atomic(p, text.as_bytes()).with_context(|| format!("writing report {}", p.display()))?;
            println!("report written to {}", p.display());
        }
        None => print!("{}", text),
    }
    if let Some(d) = report.dominance.dominant() {
        eprintln!("species {} dominant", d + 1);
    }
    let vanishing = report
        .dominance
        .per_species
        .iter()
        .filter(|v| **v == SpeciesVerdict::Vanishing)
        .count();
    if vanishing > 0 {
        eprintln!("{} species vanishing", vanishing);
    }
    Ok(code)
}
