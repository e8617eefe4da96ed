//! Problem-file schema.
//!
//! A file is either `{"problems": [ ... ]}` or a single problem object. Each
//! problem carries a `"family"` tag and an optional `"id"`. Scalars are
//! numbers or `[re, im]` pairs; matrices are arrays of rows, or
//! `{"mtx": "path"}` naming a real Matrix Market file resolved relative to
//! the problem file.
//!
//! | family           | fields                                                        |
//! |------------------|---------------------------------------------------------------|
//! | `linear_fixed_b` | `A`, `b`                                                      |
//! | `linear_general` | `A`, `b`                                                      |
//! | `eigen`          | `A`, `index` (1-based, default 1), `target` (`eigenvalue`/`eigenvector`) |
//! | `kernel`         | `A`, `rank`                                                   |
//! | `upoly`          | `coeffs` (ascending), `root` (optional), `metric` (`weyl`/`canonical`) |
//! | `hpoly_system`   | `nvars`, `equations`: `[{"degree", "terms": [{"exp", "coef"}]}]`, `root` or `start` |
//! | `map`            | `matrix` (real): a condition matrix given directly            |

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use condlab_core::numlin::{ComplexMatrix, ComplexVector, RealMatrix};
use condlab_core::problems::{
    refine_root, EigenTarget, HomogeneousPolynomial, HomogeneousSystem, LinearData, ProblemInstance, UPolyMetric,
};
use num_complex::Complex64;
use serde_json::Value;

use crate::mtx::read_matrix_market;

/// Newton iterations used to refine a user-supplied `start` point.
const START_REFINE_ITERS: usize = 50;

/// What a problem entry asks for.
#[derive(Debug, Clone)]
pub enum ProblemSpec {
    Instance(ProblemInstance),
    /// A condition matrix supplied directly.
    Map(RealMatrix),
    /// A univariate polynomial without a chosen root: every root is analyzed.
    UPolyAllRoots { coeffs: Vec<Complex64>, metric: UPolyMetric },
}

#[derive(Debug, Clone)]
pub struct ParsedProblem {
    pub id: String,
    pub spec: ProblemSpec,
}

pub const FAMILIES: [&str; 7] = [
    "linear_fixed_b",
    "linear_general",
    "eigen",
    "kernel",
    "upoly",
    "hpoly_system",
    "map",
];

/// Parses problem-file text. `base_dir` anchors relative Matrix Market paths.
pub fn parse_problem_file(text: &str, base_dir: Option<&Path>) -> Result<Vec<ParsedProblem>> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| anyhow!("JSON parse error at line {}, column {}: {e}", e.line(), e.column()))?;
    let ctx = Ctx { base_dir };
    match doc.get("problems") {
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, item)| ctx.problem(item, &format!("problems[{i}]"), i))
            .collect(),
        Some(_) => bail!("'problems' must be an array"),
        None if doc.get("family").is_some() => Ok(vec![ctx.problem(&doc, "$", 0)?]),
        None => bail!("expected an object with a 'problems' array or a 'family' field"),
    }
}

struct Ctx<'a> {
    base_dir: Option<&'a Path>,
}

fn field<'v>(obj: &'v Value, key: &str, path: &str) -> Result<&'v Value> {
    obj.get(key).ok_or_else(|| anyhow!("{path}: missing field '{key}'"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    let x = v.as_f64().ok_or_else(|| anyhow!("{path}: expected a number"))?;
    if !x.is_finite() {
        bail!("{path}: non-finite number");
    }
    Ok(x)
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| anyhow!("{path}: expected a non-negative integer"))
}

fn as_array<'v>(v: &'v Value, path: &str) -> Result<&'v Vec<Value>> {
    v.as_array().ok_or_else(|| anyhow!("{path}: expected an array"))
}

/// A scalar and whether it was written in complex form.
fn scalar(v: &Value, path: &str) -> Result<(Complex64, bool)> {
    match v {
        Value::Array(pair) if pair.len() == 2 => Ok((
            Complex64::new(as_f64(&pair[0], &format!("{path}[0]"))?, as_f64(&pair[1], &format!("{path}[1]"))?),
            true,
        )),
        Value::Array(_) => bail!("{path}: complex scalar must be [re, im]"),
        _ => Ok((Complex64::new(as_f64(v, path)?, 0.0), false)),
    }
}

fn vector(v: &Value, path: &str) -> Result<(Vec<Complex64>, bool)> {
    let items = as_array(v, path)?;
    let mut complex = false;
    let mut out = Vec::with_capacity(items.len());
    for (i, x) in items.iter().enumerate() {
        let (z, c) = scalar(x, &format!("{path}[{i}]"))?;
        complex |= c;
        out.push(z);
    }
    Ok((out, complex))
}

fn string_field<'v>(obj: &'v Value, key: &str, path: &str) -> Result<Option<&'v str>> {
    match obj.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => bail!("{path}.{key}: expected a string"),
    }
}

impl Ctx<'_> {
    fn matrix(&self, v: &Value, path: &str) -> Result<(ComplexMatrix, bool)> {
        if let Some(file) = v.get("mtx") {
            let name = file.as_str().ok_or_else(|| anyhow!("{path}.mtx: expected a path string"))?;
            let full = self.base_dir.map_or_else(|| Path::new(name).to_path_buf(), |d| d.join(name));
            let text = std::fs::read_to_string(&full).with_context(|| format!("{path}: reading {}", full.display()))?;
            let m = read_matrix_market(&text).with_context(|| format!("{path}: {}", full.display()))?;
            return Ok((m.map(|x| Complex64::new(x, 0.0)), false));
        }
        let rows = as_array(v, path)?;
        if rows.is_empty() {
            bail!("{path}: matrix has no rows");
        }
        let mut complex = false;
        let mut data: Vec<Vec<Complex64>> = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let (r, c) = vector(row, &format!("{path}[{i}]"))?;
            if let Some(first) = data.first() {
                if r.len() != first.len() {
                    bail!("{path}[{i}]: row has {} entries, expected {}", r.len(), first.len());
                }
            }
            complex |= c;
            data.push(r);
        }
        let cols = data[0].len();
        if cols == 0 {
            bail!("{path}: matrix has no columns");
        }
        Ok((ComplexMatrix::from_fn(rows.len(), cols, |i, j| data[i][j]), complex))
    }

    fn problem(&self, obj: &Value, path: &str, position: usize) -> Result<ParsedProblem> {
        if !obj.is_object() {
            bail!("{path}: expected an object");
        }
        let id = match obj.get("id") {
            None => format!("p{}", position + 1),
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(_) => bail!("{path}.id: expected a string or number"),
        };
        let family = string_field(obj, "family", path)?.ok_or_else(|| anyhow!("{path}: missing field 'family'"))?;
        let spec = match family {
            "linear_fixed_b" | "linear_general" => {
                let (a, ca) = self.matrix(field(obj, "A", path)?, &format!("{path}.A"))?;
                let (b, cb) = vector(field(obj, "b", path)?, &format!("{path}.b"))?;
                if a.nrows() != a.ncols() || b.len() != a.nrows() {
                    bail!(
                        "{path}: dimension mismatch: A is {}x{}, b has length {}",
                        a.nrows(),
                        a.ncols(),
                        b.len()
                    );
                }
                let b = ComplexVector::from_vec(b);
                let data = if ca || cb {
                    LinearData::Complex { a, b }
                } else {
                    LinearData::Real {
                        a: a.map(|z| z.re),
                        b: b.map(|z| z.re),
                    }
                };
                ProblemSpec::Instance(if family == "linear_fixed_b" {
                    ProblemInstance::LinearFixedB(data)
                } else {
                    ProblemInstance::LinearGeneral(data)
                })
            }
            "eigen" => {
                let (a, _) = self.matrix(field(obj, "A", path)?, &format!("{path}.A"))?;
                if a.nrows() != a.ncols() {
                    bail!("{path}: dimension mismatch: A is {}x{}, expected square", a.nrows(), a.ncols());
                }
                let index = match obj.get("index") {
                    None => 1,
                    Some(v) => as_usize(v, &format!("{path}.index"))?,
                };
                if index == 0 || index > a.nrows() {
                    bail!("{path}.index: {index} outside 1..={}", a.nrows());
                }
                let target = match string_field(obj, "target", path)? {
                    None | Some("eigenvalue") => EigenTarget::Eigenvalue,
                    Some("eigenvector") => EigenTarget::Eigenvector,
                    Some(other) => bail!("{path}.target: unknown target '{other}'"),
                };
                ProblemSpec::Instance(ProblemInstance::Eigen {
                    a,
                    index: index - 1,
                    target,
                })
            }
            "kernel" => {
                let (a, _) = self.matrix(field(obj, "A", path)?, &format!("{path}.A"))?;
                let rank = as_usize(field(obj, "rank", path)?, &format!("{path}.rank"))?;
                ProblemSpec::Instance(ProblemInstance::Kernel { a, rank })
            }
            "upoly" => {
                let (coeffs, _) = vector(field(obj, "coeffs", path)?, &format!("{path}.coeffs"))?;
                if coeffs.len() < 2 {
                    bail!("{path}.coeffs: need at least 2 coefficients");
                }
                let metric = match string_field(obj, "metric", path)? {
                    None | Some("weyl") => UPolyMetric::Weyl,
                    Some("canonical") => UPolyMetric::Canonical,
                    Some(other) => bail!("{path}.metric: unknown metric '{other}'"),
                };
                match obj.get("root") {
                    Some(v) => {
                        let (root, _) = scalar(v, &format!("{path}.root"))?;
                        ProblemSpec::Instance(ProblemInstance::UPoly { coeffs, root, metric })
                    }
                    None => ProblemSpec::UPolyAllRoots { coeffs, metric },
                }
            }
            "hpoly_system" => self.hpoly(obj, path)?,
            "map" => {
                let (m, complex) = self.matrix(field(obj, "matrix", path)?, &format!("{path}.matrix"))?;
                if complex {
                    bail!("{path}.matrix: a condition matrix must be real");
                }
                ProblemSpec::Map(m.map(|z| z.re))
            }
            other => bail!("{path}: unknown family '{other}' (expected one of {})", FAMILIES.join(", ")),
        };
        Ok(ParsedProblem { id, spec })
    }

    fn hpoly(&self, obj: &Value, path: &str) -> Result<ProblemSpec> {
        let nvars = as_usize(field(obj, "nvars", path)?, &format!("{path}.nvars"))?;
        let eqs = as_array(field(obj, "equations", path)?, &format!("{path}.equations"))?;
        let mut polys = Vec::with_capacity(eqs.len());
        for (i, eq) in eqs.iter().enumerate() {
            let epath = format!("{path}.equations[{i}]");
            let degree = as_usize(field(eq, "degree", &epath)?, &format!("{epath}.degree"))? as u32;
            let terms = as_array(field(eq, "terms", &epath)?, &format!("{epath}.terms"))?;
            let mut parsed = Vec::with_capacity(terms.len());
            for (k, t) in terms.iter().enumerate() {
                let tpath = format!("{epath}.terms[{k}]");
                let exp = as_array(field(t, "exp", &tpath)?, &format!("{tpath}.exp"))?
                    .iter()
                    .enumerate()
                    .map(|(j, e)| as_usize(e, &format!("{tpath}.exp[{j}]")).map(|x| x as u32))
                    .collect::<Result<Vec<u32>>>()?;
                let (coef, _) = scalar(field(t, "coef", &tpath)?, &format!("{tpath}.coef"))?;
                parsed.push((exp, coef));
            }
            polys.push(HomogeneousPolynomial::from_terms(nvars, degree, &parsed).with_context(|| epath.clone())?);
        }
        let system = HomogeneousSystem::new(polys).with_context(|| path.to_string())?;
        let point = |key: &str| -> Result<Option<ComplexVector>> {
            obj.get(key)
                .map(|v| {
                    let (x, _) = vector(v, &format!("{path}.{key}"))?;
                    if x.len() != nvars {
                        bail!("{path}.{key}: length {} but nvars is {nvars}", x.len());
                    }
                    Ok(ComplexVector::from_vec(x))
                })
                .transpose()
        };
        let root = match (point("root")?, point("start")?) {
            (Some(r), _) => r,
            (None, Some(s)) => refine_root(&system, &s, START_REFINE_ITERS).with_context(|| format!("{path}.start"))?,
            (None, None) => bail!("{path}: hpoly_system needs 'root' or 'start'"),
        };
        Ok(ProblemSpec::Instance(ProblemInstance::HPolySystem { system, root }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_object_and_list() {
        let one = parse_problem_file(r#"{"family":"linear_fixed_b","A":[[2,0],[0,2]],"b":[2,0]}"#, None).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].id, "p1");
        assert!(matches!(
            one[0].spec,
            ProblemSpec::Instance(ProblemInstance::LinearFixedB(LinearData::Real { .. }))
        ));
        let many = parse_problem_file(
            r#"{"problems":[{"id":"a","family":"map","matrix":[[3,0],[0,4]]},
                {"family":"linear_general","A":[[[1,1],0],[0,1]],"b":[1,0]}]}"#,
            None,
        )
        .unwrap();
        assert_eq!(many[0].id, "a");
        assert_eq!(many[1].id, "p2");
        assert!(matches!(
            many[1].spec,
            ProblemSpec::Instance(ProblemInstance::LinearGeneral(LinearData::Complex { .. }))
        ));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_problem_file("{\n  \"family\": ,\n}", None).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let err = parse_problem_file(r#"{"family":"linear_fixed_b","A":[[1,0],[0,1]],"b":[1]}"#, None)
            .unwrap_err()
            .to_string();
        assert!(err.contains("dimension mismatch"), "{err}");
        assert!(parse_problem_file(r#"{"family":"map","matrix":[[1,0],[1]]}"#, None).is_err());
        assert!(parse_problem_file(r#"{"family":"nope"}"#, None).is_err());
    }

    #[test]
    fn hpoly_with_start_is_refined() {
        let text = r#"{"family":"hpoly_system","nvars":2,
            "equations":[{"degree":2,"terms":[{"exp":[1,1],"coef":1},{"exp":[0,2],"coef":[0.5,0]}]}],
            "start":[1, 0.01]}"#;
        let p = parse_problem_file(text, None).unwrap();
        let ProblemSpec::Instance(ProblemInstance::HPolySystem { root, .. }) = &p[0].spec else {
            panic!("wrong spec");
        };
        assert!(root[1].norm() < 1e-9 * root[0].norm());
    }
}
