//! Fejér truncation of symbols, staircase extensions `psi_eps(xi) =
//! phi_eps(floor(xi/eps))` on the line, and a convergence monitor comparing
//! empirical weak norms along a sequence of symbols.

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fourier::{convolve_periodic, fejer_kernel, fejer_weight};
use crate::grid::{DiscreteSymbol, Domain, LineModel, TorusGrid, C64};
use crate::kernel::KernelSpec;
use crate::multiplier::{apply_discrete_symbol, DiscreteMultiplier, KernelMultiplier};
use crate::weak::{check_exponent, estimate_operator_weak_norm, weak_quasinorm, Operator};

/// `phi_j(n) = prod_i max(1 - |n_i|/(j+1), 0) phi(n)` on the window cut to
/// `[-j, j]^N`.
pub fn fejer_truncate_symbol(phi: &DiscreteSymbol, j: usize) -> Result<DiscreteSymbol> {
    let r = j as i64;
    let window: Vec<(i64, i64)> = phi.window().iter().map(|&(a, b)| (a.max(-r), b.min(r))).collect();
    if window.iter().any(|&(a, b)| a > b) {
        return DiscreteSymbol::new(vec![(0, 0); phi.dim()], vec![C64::new(0.0, 0.0)]);
    }
    DiscreteSymbol::from_fn(window, |n| phi.get(n) * fejer_weight(j, n))
}

/// Outcome of comparing `T_{phi_j}` with `T_phi` composed with `k_j *`.
#[derive(Clone, Debug, Serialize)]
pub struct FejerCheck {
    pub j: usize,
    pub p: f64,
    /// `max ||T_{phi_j} f - T_phi(k_j * f)||_inf / ||f||_inf`.
    pub identity_error: f64,
    /// `max ||k_j * f||_p / ||f||_p`.
    pub contraction: f64,
    /// `max` over `f` of the weak ratio of `phi_j` at `f` minus that of `phi`
    /// at `k_j * f`.
    pub ratio_excess: f64,
}

pub fn fejer_check(phi: &DiscreteSymbol, j: usize, grid: &TorusGrid, corpus: &Corpus, p: f64) -> Result<FejerCheck> {
    check_exponent(p)?;
    let d: Domain = grid.clone().into();
    if corpus.domain != d {
        return Err(Error::DomainMismatch("corpus and grid differ".into()));
    }
    let phi_j = fejer_truncate_symbol(phi, j)?;
    let kj = fejer_kernel(j, grid)?;
    let rows: Vec<(f64, f64, f64)> = corpus
        .functions
        .par_iter()
        .map(|(_, f)| -> Result<(f64, f64, f64)> {
            let g = convolve_periodic(&kj, f)?;
            let lhs = apply_discrete_symbol(&phi_j, f)?;
            let rhs = apply_discrete_symbol(phi, &g)?;
            let err = lhs.max_abs_diff(&rhs)? / f.sup_norm().max(f64::MIN_POSITIVE);
            let (fp, gp) = (f.lp_norm(p), g.lp_norm(p));
            let r_j = weak_quasinorm(&lhs, p)? / fp;
            let r = if gp > 0.0 { weak_quasinorm(&rhs, p)? / gp } else { r_j };
            Ok((err, gp / fp, r_j - r))
        })
        .collect::<Result<_>>()?;
    Ok(FejerCheck {
        j,
        p,
        identity_error: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        contraction: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        ratio_excess: rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// `phi_eps(n) = phi(eps n)` for `n` in `window`.
pub fn sample_symbol(kernel: &KernelSpec, eps: f64, window: (i64, i64)) -> Result<DiscreteSymbol> {
    if kernel.dim() != 1 {
        return Err(Error::DomainMismatch("staircase symbols are one-dimensional".into()));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    DiscreteSymbol::from_fn(vec![window], |n| kernel.evaluate(&[eps * n[0] as f64]))
}

/// Indices `floor(xi/eps)` reached from the band of `line`.
pub fn staircase_window(eps: f64, line: &LineModel) -> (i64, i64) {
    let d: Domain = line.clone().into();
    let (lo, hi) = d.freq_index_range();
    let step = d.freq_step();
    (
        (lo as f64 * step / eps).floor() as i64,
        (hi as f64 * step / eps).floor() as i64,
    )
}

/// `psi_eps(xi) = phi_eps(floor(xi/eps))` tabulated on the frequency grid.
pub fn staircase_extension(phi_eps: &DiscreteSymbol, eps: f64, line: &LineModel) -> Result<KernelSpec> {
    if phi_eps.dim() != 1 || line.dim() != 1 {
        return Err(Error::DomainMismatch("staircase extension is one-dimensional".into()));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    let (need_lo, need_hi) = staircase_window(eps, line);
    let (a, b) = phi_eps.window()[0];
    if a > need_lo || b < need_hi {
        return Err(Error::Resolution(format!(
            "window [{a}, {b}] does not cover floor(band/eps) = [{need_lo}, {need_hi}]"
        )));
    }
    let d: Domain = line.clone().into();
    let values = (0..d.len())
        .map(|i| phi_eps.get(&[(d.frequency(i)[0] / eps).floor() as i64]))
        .collect();
    KernelSpec::table(
        vec![-line.freq_halfwidth()],
        vec![line.freq_resolution()],
        vec![line.samples_per_period()],
        values,
    )
}

/// `psi_eps` built from `phi_eps(n) = phi(eps n)` over the whole band.
pub fn staircase_from_kernel(kernel: &KernelSpec, eps: f64, line: &LineModel) -> Result<KernelSpec> {
    let phi_eps = sample_symbol(kernel, eps, staircase_window(eps, line))?;
    staircase_extension(&phi_eps, eps, line)
}

/// `sup |a - b|` over the frequency grid of `domain`.
fn grid_deviation(a: &MonitoredSymbol, b: &MonitoredSymbol, domain: &Domain) -> f64 {
    (0..domain.len())
        .map(|i| (a.value_at(domain, i) - b.value_at(domain, i)).norm())
        .fold(0.0, f64::max)
}

/// Largest deviation of each staircase `psi_eps` from `phi` on the grid.
pub fn staircase_deviations(kernel: &KernelSpec, eps: &[f64], line: &LineModel) -> Result<Vec<f64>> {
    let d: Domain = line.clone().into();
    let base = MonitoredSymbol::Kernel(kernel.clone());
    eps.iter()
        .map(|&e| {
            let s = MonitoredSymbol::Kernel(staircase_from_kernel(kernel, e, line)?);
            Ok(grid_deviation(&s, &base, &d))
        })
        .collect()
}

/// A symbol in a monitored sequence: discrete on a torus grid or a kernel on a
/// line model.
#[derive(Clone, Debug)]
pub enum MonitoredSymbol {
    Discrete(DiscreteSymbol),
    Kernel(KernelSpec),
}

impl MonitoredSymbol {
    fn value_at(&self, domain: &Domain, i: usize) -> C64 {
        match self {
            MonitoredSymbol::Discrete(phi) => phi.get(&domain.freq_index(i)),
            MonitoredSymbol::Kernel(k) => k.evaluate(&domain.frequency(i)),
        }
    }

    fn sup_norm(&self, domain: &Domain) -> f64 {
        match self {
            MonitoredSymbol::Discrete(phi) => phi.sup_norm(),
            MonitoredSymbol::Kernel(_) => (0..domain.len())
                .map(|i| self.value_at(domain, i).norm())
                .fold(0.0, f64::max),
        }
    }

    fn operator(&self, domain: &Domain) -> Result<Box<dyn Operator>> {
        match (self, domain) {
            (MonitoredSymbol::Discrete(phi), Domain::Torus(g)) => {
                Ok(Box::new(DiscreteMultiplier::new(phi.clone(), g.clone())?))
            }
            (MonitoredSymbol::Kernel(k), Domain::Line(l)) => {
                Ok(Box::new(KernelMultiplier::new(k.clone(), l.clone())?))
            }
            _ => Err(Error::DomainMismatch(
                "discrete symbols need a torus grid, kernels a line model".into(),
            )),
        }
    }
}

/// Sequence diagnostics. The liminf of the empirical norms is proxied by the
/// minimum over the tail half of the supplied sequence.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub p: f64,
    pub corpus_id: String,
    pub seed: u64,
    pub len: usize,
    pub sup_norms: Vec<f64>,
    pub max_sup_norm: f64,
    /// `sup |phi_j - phi_last|` on the frequency grid.
    pub deviations: Vec<f64>,
    pub estimates: Vec<f64>,
    pub sup_estimate: f64,
    pub tail_start: usize,
    pub liminf_proxy: f64,
    pub last_estimate: f64,
    pub tolerance: f64,
    /// `last_estimate <= liminf_proxy + tolerance`.
    pub flag: bool,
    pub proxy_note: String,
}

pub fn convergence_monitor(
    symbols: &[MonitoredSymbol],
    domain: &Domain,
    p: f64,
    corpus: &Corpus,
    tolerance: f64,
) -> Result<ConvergenceReport> {
    check_exponent(p)?;
    let last = symbols.last().ok_or(Error::Empty("symbol sequence"))?;
    if &corpus.domain != domain {
        return Err(Error::DomainMismatch("corpus and monitor domain differ".into()));
    }
    let sup_norms: Vec<f64> = symbols.iter().map(|s| s.sup_norm(domain)).collect();
    let deviations: Vec<f64> = symbols.iter().map(|s| grid_deviation(s, last, domain)).collect();
    let estimates: Vec<f64> = symbols
        .iter()
        .map(|s| Ok(estimate_operator_weak_norm(&*s.operator(domain)?, p, corpus)?.estimate))
        .collect::<Result<_>>()?;
    let tail_start = symbols.len() / 2;
    let liminf_proxy = estimates[tail_start..].iter().copied().fold(f64::INFINITY, f64::min);
    let last_estimate = *estimates.last().expect("non-empty");
    Ok(ConvergenceReport {
        p,
        corpus_id: corpus.id.clone(),
        seed: corpus.seed,
        len: symbols.len(),
        max_sup_norm: sup_norms.iter().copied().fold(0.0, f64::max),
        sup_norms,
        deviations,
        sup_estimate: estimates.iter().copied().fold(0.0, f64::max),
        estimates,
        tail_start,
        liminf_proxy,
        last_estimate,
        tolerance,
        flag: last_estimate <= liminf_proxy + tolerance,
        proxy_note: format!(
            "liminf proxied by the minimum over entries {tail_start}..{} of the supplied sequence",
            symbols.len()
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CorpusSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fejer_truncation_examples() {
        let ones = DiscreteSymbol::constant(1, 5, C64::new(1.0, 0.0));
        let t = fejer_truncate_symbol(&ones, 1).unwrap();
        assert_eq!(t.window(), &[(-1, 1)]);
        assert_eq!(t.values(), &[C64::new(0.5, 0.0), C64::new(1.0, 0.0), C64::new(0.5, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = DiscreteSymbol::from_fn(vec![(-4, 4)], |_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).unwrap();
        let mut prev = f64::INFINITY;
        for j in [4, 16, 64, 256, 1024] {
            let dev = phi
                .iter()
                .map(|(n, v)| (fejer_truncate_symbol(&phi, j).unwrap().get(&n) - v).norm())
                .fold(0.0, f64::max);
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 5e-3);
    }

    #[test]
    fn fejer_identity_and_contraction() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let d: Domain = grid.clone().into();
        let corpus = CorpusSpec::standard(3).generate(&d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi = DiscreteSymbol::from_fn(vec![(-10, 10)], |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap();
        for j in [0, 3, 12] {
            for p in [4.0 / 3.0, 2.0, 4.0] {
                let r = fejer_check(&phi, j, &grid, &corpus, p).unwrap();
                assert!(r.identity_error < 1e-12, "{r:?}");
                assert!(r.contraction <= 1.0 + 1e-12, "{r:?}");
                assert!(r.ratio_excess <= 1e-12, "{r:?}");
            }
        }
    }

    #[test]
    fn staircase_examples() {
        let line = LineModel::new(1, 64, 256).unwrap();
        let d: Domain = line.clone().into();
        let delta = DiscreteSymbol::from_fn(vec![staircase_window(0.5, &line)], |n| C64::new(if n[0] == 0 { 1.0 } else { 0.0 }, 0.0)).unwrap();
        let s = staircase_extension(&delta, 0.5, &line).unwrap();
        for i in 0..d.len() {
            let xi = d.frequency(i)[0];
            let expect = if (0.0..0.5).contains(&xi) { 1.0 } else { 0.0 };
            assert_eq!(s.evaluate(&[xi]).re, expect);
        }
        let wide = DiscreteSymbol::from_fn(vec![staircase_window(1.0, &line)], |n| C64::new(if n[0] == 0 { 1.0 } else { 0.0 }, 0.0)).unwrap();
        let s = staircase_extension(&wide, 1.0, &line).unwrap();
        for i in 0..d.len() {
            let xi = d.frequency(i)[0];
            assert_eq!(s.evaluate(&[xi]).re, if (0.0..1.0).contains(&xi) { 1.0 } else { 0.0 });
        }
        assert!(matches!(staircase_extension(&DiscreteSymbol::delta(1), 0.5, &line), Err(Error::Resolution(_))));
    }

    #[test]
    fn staircase_converges_at_first_order() {
        let line = LineModel::new(1, 4096, 16384).unwrap();
        let eps: Vec<f64> = (1..=6).map(|k| 0.5f64.powi(k)).collect();
        let dev = staircase_deviations(&KernelSpec::triangle(1), &eps, &line).unwrap();
        for (e, v) in eps.iter().zip(&dev) {
            assert!(*v <= *e);
        }
        for w in dev.windows(2) {
            let r = w[1] / w[0];
            assert!((0.4..=0.6).contains(&r), "ratio {r}");
        }
        let tri = KernelSpec::triangle(1);
        let s = staircase_from_kernel(&tri, 0.125, &line).unwrap();
        let d: Domain = line.into();
        for i in 0..d.len() {
            assert!(s.evaluate(&d.frequency(i)).norm() <= 1.0);
        }
    }

    #[test]
    fn monitor_constant_sequence() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let d: Domain = grid.into();
        let corpus = CorpusSpec::standard(4).generate(&d).unwrap();
        let phi = DiscreteSymbol::constant(1, 3, C64::new(1.0, 0.0));
        let seq = vec![MonitoredSymbol::Discrete(phi); 4];
        let r = convergence_monitor(&seq, &d, 2.0, &corpus, 1e-12).unwrap();
        assert!(r.deviations.iter().all(|&v| v == 0.0));
        assert!(r.flag);
        assert_eq!(r.tail_start, 2);
        assert!(convergence_monitor(&[], &d, 2.0, &corpus, 0.0).is_err());
    }

    #[test]
    fn monitor_fejer_sequence() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let d: Domain = grid.into();
        let corpus = CorpusSpec::standard(5).generate(&d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let phi = DiscreteSymbol::from_fn(vec![(-6, 6)], |_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).unwrap();
        let mut seq: Vec<MonitoredSymbol> = (1..=8).map(|j| MonitoredSymbol::Discrete(fejer_truncate_symbol(&phi, 4 * j).unwrap())).collect();
        seq.push(MonitoredSymbol::Discrete(phi.clone()));
        let r = convergence_monitor(&seq, &d, 2.0, &corpus, 1e-9).unwrap();
        assert!(r.max_sup_norm <= phi.sup_norm() + 1e-15);
        assert!(r.deviations.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert_eq!(*r.deviations.last().unwrap(), 0.0);
    }
}
