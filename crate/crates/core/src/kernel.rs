//! Compactly supported kernels `Lambda` on `R^N`.

use serde_json::{json, Value};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::C64;

/// One-dimensional tent: 1 on `[1/4, 3/4]`, linear ramps on `[0,1/4)` and
/// `(3/4, 1]`, zero elsewhere.
pub fn tent_1d(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        0.0
    } else if x < 0.25 {
        4.0 * x
    } else if x <= 0.75 {
        1.0
    } else {
        4.0 * (1.0 - x)
    }
}

/// `b(xi) = prod_i b_i(xi_i)`.
pub fn tent_b(xi: &[f64]) -> f64 {
    xi.iter().map(|&x| tent_1d(x)).product()
}

/// `prod_i max(1 - |xi_i|, 0)`.
pub fn triangle_kernel(xi: &[f64]) -> f64 {
    xi.iter().map(|&x| (1.0 - x.abs()).max(0.0)).product()
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelForm {
    TentB,
    Triangle,
    /// Indicator of the half-open box `prod [lo_i, hi_i)`.
    Indicator { lo: Vec<f64>, hi: Vec<f64> },
    /// `xi -> base(matrix * (xi - shift))`.
    Affine {
        base: Box<KernelSpec>,
        matrix: Vec<Vec<f64>>,
        shift: Vec<f64>,
    },
    /// Samples on `origin + step * i`, evaluated by nearest sample inside the
    /// sample extent.
    Table {
        origin: Vec<f64>,
        step: Vec<f64>,
        shape: Vec<usize>,
        values: Vec<C64>,
    },
}

/// A kernel with a declared compact support box. Evaluation is exactly zero
/// outside the box.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    dim: usize,
    support: Vec<(f64, f64)>,
    form: KernelForm,
}

fn check_box(support: &[(f64, f64)]) -> Result<()> {
    for &(a, b) in support {
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::Support(format!("invalid support interval [{a}, {b}]")));
        }
    }
    Ok(())
}

fn box_contains(outer: &[(f64, f64)], inner: &[(f64, f64)]) -> bool {
    outer
        .iter()
        .zip(inner)
        .all(|(&(a, b), &(c, d))| a <= c && d <= b)
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Inverse of a small dense matrix by Gauss-Jordan elimination.
pub(crate) fn invert_matrix(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .ok_or(Error::SingularMatrix)?;
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::SingularMatrix);
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Ok(inv)
}

impl KernelSpec {
    pub fn tent_b(dim: usize) -> Self {
        Self {
            dim,
            support: vec![(0.0, 1.0); dim],
            form: KernelForm::TentB,
        }
    }

    pub fn triangle(dim: usize) -> Self {
        Self {
            dim,
            support: vec![(-1.0, 1.0); dim],
            form: KernelForm::Triangle,
        }
    }

    pub fn indicator(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Invalid("indicator bounds must have equal, positive length".into()));
        }
        let support: Vec<(f64, f64)> = lo.iter().copied().zip(hi.iter().copied()).collect();
        check_box(&support)?;
        Ok(Self {
            dim: lo.len(),
            support,
            form: KernelForm::Indicator { lo, hi },
        })
    }

    /// `xi -> base(matrix * (xi - shift))`. The support box is the bounding box
    /// of the preimage of the base box.
    pub fn affine(base: KernelSpec, matrix: Vec<Vec<f64>>, shift: Vec<f64>) -> Result<Self> {
        let dim = base.dim;
        if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) || shift.len() != dim {
            return Err(Error::Invalid("affine map has wrong shape".into()));
        }
        if matrix.iter().flatten().chain(&shift).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("affine map has non-finite entries".into()));
        }
        let diagonal = (0..dim).all(|i| (0..dim).all(|j| i == j || matrix[i][j] == 0.0));
        if diagonal {
            if (0..dim).any(|i| matrix[i][i] == 0.0) {
                return Err(Error::SingularMatrix);
            }
            let support = (0..dim)
                .map(|i| {
                    let (a, b) = base.support[i];
                    let s = matrix[i][i];
                    let (x, y) = (a / s + shift[i], b / s + shift[i]);
                    (x.min(y), x.max(y))
                })
                .collect();
            return Ok(Self {
                dim,
                support,
                form: KernelForm::Affine {
                    base: Box::new(base),
                    matrix,
                    shift,
                },
            });
        }
        let inv = invert_matrix(&matrix)?;
        let mut support = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
        for corner in 0..(1usize << dim) {
            let y: Vec<f64> = (0..dim)
                .map(|i| {
                    let (a, b) = base.support[i];
                    if corner >> i & 1 == 0 {
                        a
                    } else {
                        b
                    }
                })
                .collect();
            let x = mat_vec(&inv, &y);
            for i in 0..dim {
                let xi = x[i] + shift[i];
                support[i].0 = support[i].0.min(xi);
                support[i].1 = support[i].1.max(xi);
            }
        }
        // rounding in the inverse must not clip the true support
        for s in &mut support {
            let pad = 1e-12 * (1.0 + s.0.abs().max(s.1.abs()));
            s.0 -= pad;
            s.1 += pad;
        }
        Ok(Self {
            dim,
            support,
            form: KernelForm::Affine {
                base: Box::new(base),
                matrix,
                shift,
            },
        })
    }

    /// Per-axis `xi -> base(scale * (xi - shift))`.
    pub fn scaled(base: KernelSpec, scale: f64, shift: Vec<f64>) -> Result<Self> {
        let dim = base.dim;
        let matrix = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { scale } else { 0.0 }).collect())
            .collect();
        Self::affine(base, matrix, shift)
    }

    pub fn table(
        origin: Vec<f64>,
        step: Vec<f64>,
        shape: Vec<usize>,
        values: Vec<C64>,
    ) -> Result<Self> {
        let dim = origin.len();
        if dim == 0 || step.len() != dim || shape.len() != dim {
            return Err(Error::Invalid("table origin/step/shape lengths differ".into()));
        }
        if step.iter().any(|&s| !(s.is_finite() && s > 0.0)) || shape.contains(&0) {
            return Err(Error::Invalid("table steps must be positive and shape non-empty".into()));
        }
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        if let Some(i) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite(i));
        }
        let support = (0..dim)
            .map(|i| (origin[i], origin[i] + (shape[i] - 1) as f64 * step[i]))
            .collect();
        Ok(Self {
            dim,
            support,
            form: KernelForm::Table {
                origin,
                step,
                shape,
                values,
            },
        })
    }

    /// The zero kernel, represented as a one-sample table.
    pub fn zero(dim: usize) -> Self {
        Self::table(vec![0.0; dim], vec![1.0; dim], vec![1; dim], vec![C64::new(0.0, 0.0)])
            .expect("zero table is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    /// Replaces the support box with a larger declared one.
    pub fn with_support(mut self, support: Vec<(f64, f64)>) -> Result<Self> {
        if support.len() != self.dim {
            return Err(Error::Invalid("support box has wrong dimension".into()));
        }
        check_box(&support)?;
        if !box_contains(&support, &self.support) {
            return Err(Error::Support(format!(
                "declared support {support:?} does not contain the kernel's support {:?}",
                self.support
            )));
        }
        self.support = support;
        Ok(self)
    }

    pub fn support_within(&self, bounds: &[(f64, f64)]) -> bool {
        box_contains(bounds, &self.support)
    }

    pub fn evaluate(&self, xi: &[f64]) -> C64 {
        let inside = xi
            .iter()
            .zip(&self.support)
            .all(|(&x, &(a, b))| a <= x && x <= b);
        if !inside {
            return C64::new(0.0, 0.0);
        }
        match &self.form {
            KernelForm::TentB => C64::new(tent_b(xi), 0.0),
            KernelForm::Triangle => C64::new(triangle_kernel(xi), 0.0),
            KernelForm::Indicator { lo, hi } => {
                let hit = xi
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(&x, (&a, &b))| a <= x && x < b);
                C64::new(if hit { 1.0 } else { 0.0 }, 0.0)
            }
            KernelForm::Affine {
                base,
                matrix,
                shift,
            } => {
                let d: Vec<f64> = xi.iter().zip(shift).map(|(x, c)| x - c).collect();
                base.evaluate(&mat_vec(matrix, &d))
            }
            KernelForm::Table {
                origin,
                step,
                shape,
                values,
            } => {
                let mut flat = 0usize;
                for i in 0..self.dim {
                    let k = ((xi[i] - origin[i]) / step[i]).round();
                    if k < 0.0 || k >= shape[i] as f64 {
                        return C64::new(0.0, 0.0);
                    }
                    flat = flat * shape[i] + k as usize;
                }
                values[flat]
            }
        }
    }

    pub fn evaluate_real(&self, xi: f64) -> C64 {
        self.evaluate(&[xi])
    }

    pub fn to_value(&self) -> Value {
        let support: Vec<[f64; 2]> = self.support.iter().map(|&(a, b)| [a, b]).collect();
        let (ty, params) = match &self.form {
            KernelForm::TentB => ("tent_b", json!({ "dim": self.dim })),
            KernelForm::Triangle => ("triangle", json!({ "dim": self.dim })),
            KernelForm::Indicator { lo, hi } => ("indicator", json!({ "lo": lo, "hi": hi })),
            KernelForm::Affine {
                base,
                matrix,
                shift,
            } => (
                "affine",
                json!({ "base": base.to_value(), "matrix": matrix, "shift": shift }),
            ),
            KernelForm::Table {
                origin,
                step,
                shape,
                values,
            } => (
                "table",
                json!({
                    "origin": origin,
                    "step": step,
                    "shape": shape,
                    "re": values.iter().map(|v| v.re).collect::<Vec<_>>(),
                    "im": values.iter().map(|v| v.im).collect::<Vec<_>>(),
                    "interpolation": "nearest",
                }),
            ),
        };
        json!({ "type": ty, "params": params, "support": support })
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let ty = v
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Invalid("kernel needs a string \"type\"".into()))?;
        let params = v.get("params").cloned().unwrap_or_else(|| json!({}));
        let field = |name: &str| -> Result<Value> {
            params
                .get(name)
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("kernel params missing \"{name}\"")))
        };
        let support_decl: Option<Vec<[f64; 2]>> = match v.get("support") {
            Some(s) => Some(serde_json::from_value(s.clone())?),
            None => None,
        };
        let dim_hint = support_decl.as_ref().map(Vec::len);
        let dim_of = || -> Result<usize> {
            match params.get("dim") {
                Some(d) => serde_json::from_value(d.clone()).map_err(Error::from),
                None => dim_hint.ok_or_else(|| Error::Invalid("kernel dimension unknown".into())),
            }
        };
        let kernel = match ty {
            "tent_b" => Self::tent_b(dim_of()?),
            "triangle" => Self::triangle(dim_of()?),
            "indicator" => Self::indicator(
                serde_json::from_value(field("lo")?)?,
                serde_json::from_value(field("hi")?)?,
            )?,
            "affine" => {
                let base = Self::from_value(&field("base")?)?;
                let shift: Vec<f64> = serde_json::from_value(field("shift")?)?;
                if let Some(m) = params.get("matrix") {
                    Self::affine(base, serde_json::from_value(m.clone())?, shift)?
                } else {
                    let scale: f64 = serde_json::from_value(field("scale")?)?;
                    Self::scaled(base, scale, shift)?
                }
            }
            "table" => {
                let re: Vec<f64> = serde_json::from_value(field("re")?)?;
                let im: Vec<f64> = match params.get("im") {
                    Some(i) => serde_json::from_value(i.clone())?,
                    None => vec![0.0; re.len()],
                };
                if re.len() != im.len() {
                    return Err(Error::LengthMismatch {
                        expected: re.len(),
                        actual: im.len(),
                    });
                }
                Self::table(
                    serde_json::from_value(field("origin")?)?,
                    serde_json::from_value(field("step")?)?,
                    serde_json::from_value(field("shape")?)?,
                    re.iter().zip(&im).map(|(&r, &i)| C64::new(r, i)).collect(),
                )?
            }
            other => return Err(Error::Invalid(format!("unknown kernel type \"{other}\""))),
        };
        match support_decl {
            Some(s) => kernel.with_support(s.iter().map(|b| (b[0], b[1])).collect()),
            None => Ok(kernel),
        }
    }

    pub fn to_json(&self) -> String {
        self.to_value().to_string()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(&serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tent_values() {
        assert_eq!(tent_b(&[0.5]), 1.0);
        assert_eq!(tent_b(&[0.125]), 0.5);
        assert!((tent_b(&[0.9]) - 0.4).abs() < 1e-15);
        assert_eq!(tent_b(&[1.1]), 0.0);
        assert_eq!(tent_b(&[-0.1]), 0.0);
        assert_eq!(tent_b(&[0.5, 0.125]), 0.5);
    }

    #[test]
    fn triangle_values() {
        assert_eq!(triangle_kernel(&[0.0]), 1.0);
        assert_eq!(triangle_kernel(&[0.5]), 0.5);
        assert_eq!(triangle_kernel(&[1.0]), 0.0);
        assert_eq!(triangle_kernel(&[0.5, 0.5]), 0.25);
    }

    #[test]
    fn zero_outside_support() {
        let k = KernelSpec::triangle(1);
        assert_eq!(k.evaluate(&[1.5]), C64::new(0.0, 0.0));
        let ind = KernelSpec::indicator(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(ind.evaluate(&[0.0]).re, 1.0);
        assert_eq!(ind.evaluate(&[1.0]).re, 0.0);
    }

    #[test]
    fn affine_support_box() {
        let t = KernelSpec::scaled(KernelSpec::triangle(1), 1.0, vec![0.5]).unwrap();
        let (a, b) = t.support()[0];
        assert_eq!((a, b), (-0.5, 1.5));
        let r = KernelSpec::scaled(KernelSpec::triangle(1), 4.0, vec![0.5]).unwrap();
        assert_eq!(r.support()[0], (0.25, 0.75));
        assert_eq!(t.evaluate(&[0.5]).re, 1.0);
        assert!(KernelSpec::affine(KernelSpec::triangle(2), vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn table_nearest_sample() {
        let t = KernelSpec::table(
            vec![0.0],
            vec![0.5],
            vec![3],
            vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0)],
        )
        .unwrap();
        assert_eq!(t.evaluate(&[0.5]).re, 2.0);
        assert_eq!(t.evaluate(&[0.9]).re, 3.0);
        assert_eq!(t.evaluate(&[1.3]).re, 0.0);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let k = KernelSpec::scaled(KernelSpec::triangle(1), 4.0, vec![0.5]).unwrap();
        let back = KernelSpec::from_json(&k.to_json()).unwrap();
        for x in [0.2, 0.3, 0.5, 0.7] {
            assert_eq!(back.evaluate(&[x]), k.evaluate(&[x]));
        }
        let tri = KernelSpec::from_json(r#"{"type":"triangle","params":{},"support":[[-1,1]]}"#).unwrap();
        assert_eq!(tri.evaluate(&[0.5]).re, 0.5);
        // declared support must contain the natural one
        assert!(KernelSpec::from_json(r#"{"type":"triangle","params":{},"support":[[-0.5,1]]}"#).is_err());
        assert!(KernelSpec::from_json(r#"{"type":"mystery","params":{}}"#).is_err());
    }
}
