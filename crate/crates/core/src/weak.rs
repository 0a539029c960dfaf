//! Distribution functions, the weak-`L^p` quasi-norm, the equivalent Lorentz
//! norm, and empirical operator-norm estimation over a function corpus.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::grid::{Domain, GridFunction};

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// `lambda_f(t) = cell_volume * #{x : |f(x)| > t}`.
pub fn distribution_function(f: &GridFunction, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeThreshold(t));
    }
    let count = f.values().iter().filter(|v| v.norm() > t).count();
    Ok(count as f64 * f.domain().spatial_weight())
}

/// `sup_t t * lambda_f(t)^{1/p}`, exact on the grid.
///
/// For `t` just below a magnitude level `a`, the superlevel set is every
/// sample with `|f| >= a`; the supremum is the largest `a * (vol * count)^{1/p}`.
pub fn weak_quasinorm(f: &GridFunction, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let vol = f.domain().spatial_weight();
    Ok(f.sorted_magnitudes()
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(i, &a)| a * (vol * (i + 1) as f64).powf(1.0 / p))
        .fold(0.0, f64::max))
}

/// `sup_E |E|^{1/p - 1} * sum_{x in E} |f(x)| * vol` over superlevel sets of
/// `|f|`; satisfies `weak <= star <= p/(p-1) * weak`.
pub fn weak_star_norm(f: &GridFunction, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let vol = f.domain().spatial_weight();
    let mut partial = 0.0;
    let mut best: f64 = 0.0;
    for (i, a) in f.sorted_magnitudes().into_iter().enumerate() {
        if a == 0.0 {
            break;
        }
        partial += a;
        let measure = vol * (i + 1) as f64;
        best = best.max(measure.powf(1.0 / p - 1.0) * partial * vol);
    }
    Ok(best)
}

/// `(sum |f|^p vol)^{1/p}`.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    Ok(f.lp_norm(p))
}

/// A linear operator acting on grid functions of one domain.
pub trait Operator: Sync {
    fn domain(&self) -> &Domain;
    fn apply(&self, f: &GridFunction) -> Result<GridFunction>;
}

/// `f -> c f`.
#[derive(Clone, Debug)]
pub struct ScalarOperator {
    pub domain: Domain,
    pub factor: crate::grid::C64,
}

impl ScalarOperator {
    pub fn identity(domain: Domain) -> Self {
        Self {
            domain,
            factor: crate::grid::C64::new(1.0, 0.0),
        }
    }
}

impl Operator for ScalarOperator {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        Ok(f.scale(self.factor))
    }
}

/// Adapter turning a closure into an [`Operator`].
pub struct FnOperator<F> {
    domain: Domain,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&GridFunction) -> Result<GridFunction> + Sync,
{
    pub fn new(domain: Domain, f: F) -> Self {
        Self { domain, f }
    }
}

impl<F> Operator for FnOperator<F>
where
    F: Fn(&GridFunction) -> Result<GridFunction> + Sync,
{
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        (self.f)(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `||Tf||_{p,inf} / ||f||_p`.
    Weak,
    /// `||Tf||_p / ||f||_p`.
    Strong,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionRatio {
    pub label: String,
    pub input_norm: f64,
    pub output_norm: f64,
    pub ratio: f64,
}

/// Empirical operator norm over a corpus. The estimate is a lower bound on the
/// true norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakNormReport {
    pub kind: NormKind,
    pub estimate: f64,
    pub p: f64,
    pub corpus_id: String,
    pub seed: u64,
    pub lower_bound: bool,
    pub per_function: Vec<FunctionRatio>,
    pub t_grid_note: String,
}

impl WeakNormReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows `label, ||f||_p, norm of Tf, ratio`, followed by a footer.
    pub fn to_csv(&self) -> String {
        let norm_col = match self.kind {
            NormKind::Weak => "weak_quasinorm_Tf",
            NormKind::Strong => "lp_norm_Tf",
        };
        let mut out = format!("label,lp_norm_f,{norm_col},ratio\n");
        for r in &self.per_function {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e}\n",
                r.label, r.input_norm, r.output_norm, r.ratio
            ));
        }
        out.push_str(&format!(
            "# estimate={:.17e},corpus_id={},seed={},p={},lower_bound=true\n",
            self.estimate, self.corpus_id, self.seed, self.p
        ));
        out
    }
}

fn estimate_norm(
    op: &dyn Operator,
    p: f64,
    corpus: &Corpus,
    kind: NormKind,
) -> Result<WeakNormReport> {
    check_exponent(p)?;
    if corpus.functions.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    if &corpus.domain != op.domain() {
        return Err(Error::DomainMismatch(format!(
            "corpus lives on {}, operator on {}",
            corpus.domain.describe(),
            op.domain().describe()
        )));
    }
    let rows: Vec<FunctionRatio> = corpus
        .functions
        .par_iter()
        .map(|(label, f)| -> Result<FunctionRatio> {
            let tf = op.apply(f)?;
            let input_norm = f.lp_norm(p);
            let output_norm = match kind {
                NormKind::Weak => weak_quasinorm(&tf, p)?,
                NormKind::Strong => tf.lp_norm(p),
            };
            let ratio = if input_norm > 0.0 {
                output_norm / input_norm
            } else {
                0.0
            };
            Ok(FunctionRatio {
                label: label.clone(),
                input_norm,
                output_norm,
                ratio,
            })
        })
        .collect::<Result<_>>()?;
    let estimate = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let t_grid_note = match kind {
        NormKind::Weak => "exact supremum over all distinct magnitude levels of |Tf|".into(),
        NormKind::Strong => "no thresholds; L^p norm of Tf".into(),
    };
    Ok(WeakNormReport {
        kind,
        estimate,
        p,
        corpus_id: corpus.id.clone(),
        seed: corpus.seed,
        lower_bound: true,
        per_function: rows,
        t_grid_note,
    })
}

/// Largest `||Tf||_{p,inf} / ||f||_p` over the corpus.
pub fn estimate_operator_weak_norm(
    op: &dyn Operator,
    p: f64,
    corpus: &Corpus,
) -> Result<WeakNormReport> {
    estimate_norm(op, p, corpus, NormKind::Weak)
}

/// Largest `||Tf||_p / ||f||_p` over the corpus.
pub fn estimate_operator_strong_norm(
    op: &dyn Operator,
    p: f64,
    corpus: &Corpus,
) -> Result<WeakNormReport> {
    estimate_norm(op, p, corpus, NormKind::Strong)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CorpusSpec;
    use crate::grid::{TorusGrid, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn torus(dim: usize, m: usize) -> Domain {
        TorusGrid::new(dim, m).unwrap().into()
    }

    fn random_fn(d: &Domain, rng: &mut ChaCha8Rng) -> GridFunction {
        let v = (0..d.len())
            .map(|_| C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
            .collect();
        GridFunction::new(d.clone(), v).unwrap()
    }

    fn indicator(d: &Domain, cells: &[usize], c: f64) -> GridFunction {
        let mut v = vec![C64::new(0.0, 0.0); d.len()];
        for &i in cells {
            v[i] = C64::new(c, 0.0);
        }
        GridFunction::new(d.clone(), v).unwrap()
    }

    #[test]
    fn distribution_of_indicator() {
        let d = torus(1, 8);
        let f = indicator(&d, &[1, 5], 1.0);
        assert_eq!(distribution_function(&f, 0.5).unwrap(), 0.25);
        assert_eq!(distribution_function(&f, 1.5).unwrap(), 0.0);
        assert!(distribution_function(&f, -1.0).is_err());
    }

    #[test]
    fn distribution_matches_sorted_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = torus(2, 10);
        let f = random_fn(&d, &mut rng);
        let mut mags: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
        mags.sort_by(f64::total_cmp);
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let t = 3.0 * k as f64 / 19.0;
            // number of entries above t = len - (first index with value > t)
            let first = mags.partition_point(|&m| m <= t);
            let expect = (mags.len() - first) as f64 * d.spatial_weight();
            let got = distribution_function(&f, t).unwrap();
            assert_eq!(got, expect);
            assert!(got <= prev);
            prev = got;
        }
    }

    #[test]
    fn quasinorm_examples() {
        let d = torus(1, 8);
        let f = indicator(&d, &[0, 3], 3.0);
        let q = weak_quasinorm(&f, 2.0).unwrap();
        assert!((q - 3.0 * 0.25f64.sqrt()).abs() < 1e-15);

        let v = (0..8)
            .map(|i| C64::new(if i < 4 { 1.0 } else { 2.0 }, 0.0))
            .collect();
        let g = GridFunction::new(d.clone(), v).unwrap();
        assert!((weak_quasinorm(&g, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);

        assert!(weak_quasinorm(&g, 1.0).is_err());
        assert!(weak_star_norm(&g, f64::INFINITY).is_err());
    }

    #[test]
    fn star_norm_of_flat_function() {
        let d = torus(1, 16);
        let f = indicator(&d, &[0, 1, 2, 9], 1.0);
        for p in [4.0 / 3.0, 2.0, 4.0] {
            let expect = 0.25f64.powf(1.0 / p);
            assert!((weak_star_norm(&f, p).unwrap() - expect).abs() < 1e-14);
            assert!((weak_quasinorm(&f, p).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn chebyshev_and_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = torus(1, 64);
        for _ in 0..100 {
            let f = random_fn(&d, &mut rng);
            for p in [4.0 / 3.0, 2.0, 4.0] {
                let w = weak_quasinorm(&f, p).unwrap();
                assert!(w <= f.lp_norm(p) * (1.0 + 1e-14));
                let c = C64::new(-1.5, 2.0);
                let wc = weak_quasinorm(&f.scale(c), p).unwrap();
                assert!((wc - c.norm() * w).abs() <= 1e-13 * wc);
            }
        }
    }

    #[test]
    fn sandwich_and_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = torus(1, 48);
        for _ in 0..100 {
            let f = random_fn(&d, &mut rng);
            let g = random_fn(&d, &mut rng);
            for p in [4.0 / 3.0, 2.0, 4.0] {
                let w = weak_quasinorm(&f, p).unwrap();
                let s = weak_star_norm(&f, p).unwrap();
                assert!(w <= s && s <= p / (p - 1.0) * w);
                let sum = weak_star_norm(&f.add(&g).unwrap(), p).unwrap();
                assert!(sum <= s + weak_star_norm(&g, p).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn operator_norm_estimates() {
        let d = torus(1, 32);
        let corpus = CorpusSpec::standard(17).generate(&d).unwrap();
        let id = ScalarOperator::identity(d.clone());
        let r = estimate_operator_weak_norm(&id, 2.0, &corpus).unwrap();
        assert!((r.estimate - 1.0).abs() < 1e-12);
        assert!(r.lower_bound);
        assert_eq!(r.per_function.len(), corpus.functions.len());
        let s = estimate_operator_strong_norm(&id, 2.0, &corpus).unwrap();
        assert!((s.estimate - 1.0).abs() < 1e-12);

        let zero = ScalarOperator {
            domain: d.clone(),
            factor: C64::new(0.0, 0.0),
        };
        assert_eq!(estimate_operator_weak_norm(&zero, 2.0, &corpus).unwrap().estimate, 0.0);
        assert_eq!(estimate_operator_strong_norm(&zero, 2.0, &corpus).unwrap().estimate, 0.0);

        let c = ScalarOperator {
            domain: d.clone(),
            factor: C64::new(0.6, -0.8) * 2.5,
        };
        let rc = estimate_operator_weak_norm(&c, 4.0, &corpus).unwrap();
        assert!((rc.estimate - 2.5).abs() < 1e-12);

        for (a, b) in r.per_function.iter().zip(&s.per_function) {
            assert!(a.ratio <= b.ratio + 1e-12);
        }
        let csv = r.to_csv();
        assert!(csv.starts_with("label,lp_norm_f,weak_quasinorm_Tf,ratio\n"));
        assert!(csv.contains(&r.corpus_id));
    }

    #[test]
    fn estimate_rejects_bad_input() {
        let d = torus(1, 16);
        let other = torus(1, 8);
        let corpus = CorpusSpec::standard(1).generate(&d).unwrap();
        let op = ScalarOperator::identity(other);
        assert!(matches!(
            estimate_operator_weak_norm(&op, 2.0, &corpus),
            Err(Error::DomainMismatch(_))
        ));
        let empty = Corpus {
            id: "empty".into(),
            seed: 0,
            domain: d.clone(),
            functions: vec![],
        };
        assert!(matches!(
            estimate_operator_weak_norm(&ScalarOperator::identity(d), 2.0, &empty),
            Err(Error::Empty(_))
        ));
    }
}
