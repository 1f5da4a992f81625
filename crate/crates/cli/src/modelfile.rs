//! Model files: a JSON object naming the family and its parameters.
//!
//! ```json
//! {
//!   "family": "leslie_gower",
//!   "n": 3,
//!   "A": [[1, 0, 0.25], [2, 1, 0.2], [2, 0, 1]],
//!   "c": [2, 2, 2],
//!   "r": [1.1, 1.1, 1.1]
//! }
//! ```
//!
//! `A` may also be a flat row-major list of `n²` numbers. `c` is a single number
//! for `atkinson_allen_standard`. `responses` is required for
//! `plane_nullcline_custom`. Optional `tolerances` and `resolution` objects
//! override analysis defaults.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use csx_core::model::{Family, ModelSpec, Response};
use csx_core::simplex::{BasinTestConfig, DEFAULT_HEIGHT_TOL};
use nalgebra::DMatrix;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MatrixInput {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ResponseInput {
    Exponential { rate: f64 },
    Power { exponent: f64 },
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub zero_radius: Option<f64>,
    pub escape_margin: Option<f64>,
    pub max_backward_steps: Option<usize>,
    pub shrink_window: Option<usize>,
    pub height_tol: Option<f64>,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolutions {
    pub verify: Option<usize>,
    pub simplex: Option<usize>,
    pub report_surface: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    family: Family,
    n: Option<usize>,
    #[serde(rename = "A", alias = "a")]
    a: MatrixInput,
    c: Option<ScalarOrList>,
    u: Option<Vec<f64>>,
    r: Option<Vec<f64>>,
    responses: Option<Vec<ResponseInput>>,
    tolerances: Option<Tolerances>,
    resolution: Option<Resolutions>,
    description: Option<String>,
}

/// A parsed model with the analysis settings that came with it.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub spec: ModelSpec,
    pub basin: BasinTestConfig,
    pub height_tol: f64,
    pub verify_resolution: usize,
    pub simplex_resolution: usize,
    pub report_resolution: usize,
    pub description: Option<String>,
}

pub fn load_model(path: &Path) -> anyhow::Result<LoadedModel> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read model file {}", path.display()))?;
    parse_model(&text).with_context(|| format!("in model file {}", path.display()))
}

pub fn parse_model(text: &str) -> anyhow::Result<LoadedModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| {
        anyhow!(
            "line {}, column {}: {}",
            e.line(),
            e.column(),
            strip_position(&e.to_string())
        )
    })?;
    build(file)
}

fn strip_position(msg: &str) -> &str {
    msg.rfind(" at line ").map_or(msg, |k| &msg[..k])
}

fn matrix(input: MatrixInput, n: Option<usize>) -> anyhow::Result<DMatrix<f64>> {
    match input {
        MatrixInput::Nested(rows) => {
            let dim = rows.len();
            if let Some(n) = n {
                if n != dim {
                    bail!("invalid parameter `A`: {} rows but n = {}", dim, n);
                }
            }
            if let Some((k, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
                bail!("invalid parameter `A`: row {} has {} entries, expected {}", k + 1, row.len(), dim);
            }
            Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
        }
        MatrixInput::Flat(v) => {
            let n = n.ok_or_else(|| anyhow!("invalid parameter `n`: required when `A` is a flat list"))?;
            if v.len() != n * n {
                bail!("invalid parameter `A`: expected {} entries, got {}", n * n, v.len());
            }
            Ok(DMatrix::from_row_slice(n, n, &v))
        }
    }
}

fn build(file: ModelFile) -> anyhow::Result<LoadedModel> {
    let a = matrix(file.a, file.n)?;
    let n = a.nrows();
    let unused = |name: &str, present: bool| -> anyhow::Result<()> {
        if present {
            bail!("invalid parameter `{}`: not used by family {}", name, file.family);
        }
        Ok(())
    };
    let list = |name: &str, v: Option<ScalarOrList>| -> anyhow::Result<Vec<f64>> {
        match v {
            Some(ScalarOrList::List(v)) => Ok(v),
            Some(ScalarOrList::Scalar(_)) => bail!("invalid parameter `{}`: expected a list of {} numbers", name, n),
            None => bail!("invalid parameter `{}`: required for family {}", name, file.family),
        }
    };
    let need_u = |u: Option<Vec<f64>>| u.ok_or_else(|| anyhow!("invalid parameter `u`: required for family {}", file.family));

    let r = file.r;
    let spec = match file.family {
        Family::LeslieGower => {
            unused("u", file.u.is_some())?;
            unused("responses", file.responses.is_some())?;
            ModelSpec::leslie_gower(a, list("c", file.c)?, r)?
        }
        Family::AtkinsonAllenGeneral => {
            unused("responses", file.responses.is_some())?;
            ModelSpec::atkinson_allen(a, list("c", file.c)?, need_u(file.u)?, r)?
        }
        Family::AtkinsonAllenStandard => {
            unused("u", file.u.is_some())?;
            unused("responses", file.responses.is_some())?;
            let c = match file.c {
                Some(ScalarOrList::Scalar(c)) => c,
                Some(ScalarOrList::List(_)) => bail!("invalid parameter `c`: expected a single number"),
                None => bail!("invalid parameter `c`: required for family {}", file.family),
            };
            ModelSpec::atkinson_allen_standard(a, c, r)?
        }
        Family::Ricker => {
            unused("c", file.c.is_some())?;
            unused("responses", file.responses.is_some())?;
            ModelSpec::ricker(a, need_u(file.u)?, r)?
        }
        Family::PlaneNullclineCustom => {
            unused("c", file.c.is_some())?;
            let responses = file
                .responses
                .ok_or_else(|| anyhow!("invalid parameter `responses`: required for family {}", file.family))?
                .into_iter()
                .map(|resp| match resp {
                    ResponseInput::Exponential { rate } => Response::Exponential { rate },
                    ResponseInput::Power { exponent } => Response::Power { exponent },
                })
                .collect();
            ModelSpec::plane_nullcline(a, need_u(file.u)?, responses, r)?
        }
        Family::General => bail!("family `general` needs a growth field in code and cannot be read from a file"),
    };

    let tol = file.tolerances.unwrap_or_default();
    let defaults = BasinTestConfig::default();
    let basin = BasinTestConfig {
        max_backward_steps: tol.max_backward_steps.unwrap_or(defaults.max_backward_steps),
        zero_radius: tol.zero_radius.unwrap_or(defaults.zero_radius),
        escape_margin: tol.escape_margin.unwrap_or(defaults.escape_margin),
        newton_tol: tol.newton_tol.unwrap_or(defaults.newton_tol),
        newton_max_iter: tol.newton_max_iter.unwrap_or(defaults.newton_max_iter),
        shrink_window: tol.shrink_window.unwrap_or(defaults.shrink_window),
    };
    basin.validate()?;
    let height_tol = tol.height_tol.unwrap_or(DEFAULT_HEIGHT_TOL);
    if !(height_tol > 0.0 && height_tol < 1.0) {
        bail!("invalid parameter `height_tol`: must lie in (0, 1)");
    }
    let res = file.resolution.unwrap_or_default();
    let verify_resolution = res.verify.unwrap_or(16);
    let simplex_resolution = res.simplex.unwrap_or(16);
    let report_resolution = res.report_surface.unwrap_or(if n <= 3 { 8 } else { 4 });
    if verify_resolution < 2 {
        bail!("invalid parameter `resolution.verify`: must be at least 2");
    }
    if simplex_resolution < 1 || report_resolution < 1 {
        bail!("invalid parameter `resolution`: surface resolutions must be at least 1");
    }
    Ok(LoadedModel {
        spec,
        basin,
        height_tol,
        verify_resolution,
        simplex_resolution,
        report_resolution,
        description: file.description,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const E22: &str = r#"{
        "family": "leslie_gower",
        "n": 3,
        "A": [[1, 0, 0.25], [2, 1, 0.2], [2, 0, 1]],
        "c": [2, 2, 2],
        "r": [1.1, 1.1, 1.1]
    }"#;

    #[test]
    fn parses_nested_and_flat() {
        let m = parse_model(E22).unwrap();
        assert_eq!(m.spec.axial_point().unwrap(), vec![1.0, 1.0, 1.0]);
        let flat = r#"{"family": "ricker", "n": 2, "A": [1, 0.5, 0.5, 1], "u": [0.3, 0.3]}"#;
        let m = parse_model(flat).unwrap();
        assert_eq!(m.spec.interaction().unwrap()[(0, 1)], 0.5);
        assert!(m.spec.box_defaulted());
    }

    #[test]
    fn unknown_key_rejected() {
        let bad = E22.replace("\"n\": 3,", "\"n\": 3, \"foo\": 1,");
        let err = parse_model(&bad).unwrap_err().to_string();
        assert!(err.contains("foo"), "{err}");
    }

    #[test]
    fn syntax_error_has_line() {
        let bad = "{\n  \"family\": \"ricker\",\n  \"A\": [[1, 0], [0, 1]\n}";
        let err = parse_model(bad).unwrap_err().to_string();
        assert!(err.starts_with("line 4"), "{err}");
    }

    #[test]
    fn constraint_error_names_field() {
        let bad = E22.replace("[[1, 0, 0.25]", "[[0, 0, 0.25]");
        let err = format!("{:#}", parse_model(&bad).unwrap_err());
        assert!(err.contains("a_11"), "{err}");
    }

    #[test]
    fn family_specific_fields() {
        let aa = r#"{"family": "atkinson_allen_standard", "A": [[1, 0], [0, 1]], "c": 0.5}"#;
        assert!(parse_model(aa).is_ok());
        let aa_list = r#"{"family": "atkinson_allen_standard", "A": [[1, 0], [0, 1]], "c": [0.5, 0.5]}"#;
        assert!(parse_model(aa_list).is_err());
        let lg_u = r#"{"family": "leslie_gower", "A": [[1, 0], [0, 1]], "c": [2, 2], "u": [1, 1]}"#;
        assert!(parse_model(lg_u).is_err());
        let custom = r#"{"family": "plane_nullcline_custom", "A": [[1, 0.2], [0.1, 1]], "u": [1, 2],
            "responses": [{"kind": "exponential", "rate": 0.5}, {"kind": "power", "exponent": 1}]}"#;
        assert!(parse_model(custom).is_ok());
        let general = r#"{"family": "general", "A": [[1, 0], [0, 1]]}"#;
        assert!(parse_model(general).is_err());
    }

    #[test]
    fn overrides_apply() {
        let t = E22.replace(
            "\"n\": 3,",
            "\"n\": 3, \"tolerances\": {\"height_tol\": 1e-4, \"max_backward_steps\": 100}, \"resolution\": {\"simplex\": 5},",
        );
        let m = parse_model(&t).unwrap();
        assert_eq!(m.height_tol, 1e-4);
        assert_eq!(m.basin.max_backward_steps, 100);
        assert_eq!(m.simplex_resolution, 5);
    }
}
