//! Norm-ratio tables `N(W_{phi,Lambda}) / (N(phi) ||Lambda||_{M_p})` built
//! from empirical estimates.

use rand::Rng;
use serde::Serialize;

use crate::corpus::{rng_for, CorpusSpec};
use crate::error::{Error, Result};
use crate::grid::{DiscreteSymbol, Domain, LineModel, TorusGrid, C64};
use crate::kernel::KernelSpec;
use crate::multiplier::{DiscreteMultiplier, KernelMultiplier};
use crate::transfer::periodize_on_line;
use crate::weak::{check_exponent, estimate_operator_strong_norm, estimate_operator_weak_norm};

#[derive(Clone, Debug)]
pub struct NormReportConfig {
    pub p: Vec<f64>,
    /// Points per axis of the torus grid carrying `T_phi`.
    pub grid: usize,
    pub period: usize,
    pub samples_per_period: usize,
    pub seed: u64,
}

impl Default for NormReportConfig {
    fn default() -> Self {
        Self {
            p: vec![2.0],
            grid: 64,
            period: 16,
            samples_per_period: 512,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormRow {
    pub symbol: String,
    pub kernel: String,
    pub p: f64,
    /// Weak estimate for `T_phi` on the torus grid.
    pub phi_weak: f64,
    /// Strong estimate for `T_Lambda` on the line model.
    pub kernel_strong: f64,
    /// Weak estimate for `T_{W_{phi,Lambda}}` on the line model.
    pub periodized_weak: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub seed: u64,
    pub rows: Vec<NormRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub note: String,
}

impl NormReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("symbol,kernel,p,phi_weak,kernel_strong,periodized_weak,ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.symbol, r.kernel, r.p, r.phi_weak, r.kernel_strong, r.periodized_weak, r.ratio
            ));
        }
        out.push_str(&format!(
            "# seed={},min_ratio={:.17e},max_ratio={:.17e}\n",
            self.seed, self.min_ratio, self.max_ratio
        ));
        out
    }
}

/// `count` symbols with uniform complex values on `[-radius, radius]^dim`.
pub fn random_symbols(count: usize, dim: usize, radius: i64, seed: u64) -> Result<Vec<(String, DiscreteSymbol)>> {
    let mut rng = rng_for(seed, "symbols");
    (0..count)
        .map(|i| {
            let phi = DiscreteSymbol::from_fn(vec![(-radius, radius); dim], |_| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })?;
            Ok((format!("random-{i}"), phi))
        })
        .collect()
}

pub fn run_norm_report(
    symbols: &[(String, DiscreteSymbol)],
    kernels: &[(String, KernelSpec)],
    cfg: &NormReportConfig,
) -> Result<NormReport> {
    if symbols.is_empty() {
        return Err(Error::Empty("symbol list"));
    }
    if kernels.is_empty() {
        return Err(Error::Empty("kernel list"));
    }
    for &p in &cfg.p {
        check_exponent(p)?;
    }
    let mut rows = Vec::new();
    for (klabel, kernel) in kernels {
        let dim = kernel.dim();
        let grid = TorusGrid::new(dim, cfg.grid)?;
        let line = LineModel::new(dim, cfg.period, cfg.samples_per_period)?;
        let td: Domain = grid.clone().into();
        let ld: Domain = line.clone().into();
        let tcorpus = CorpusSpec::standard(crate::corpus::derive_seed(cfg.seed, "torus")).generate(&td)?;
        let lcorpus = CorpusSpec::standard(crate::corpus::derive_seed(cfg.seed, "line")).generate(&ld)?;
        let t_lambda = KernelMultiplier::new(kernel.clone(), line.clone())?;
        for (slabel, phi) in symbols {
            if phi.dim() != dim {
                return Err(Error::DomainMismatch(format!(
                    "symbol {slabel} has dimension {}, kernel {klabel} has {dim}",
                    phi.dim()
                )));
            }
            let t_phi = DiscreteMultiplier::new(phi.clone(), grid.clone())?;
            let t_w = KernelMultiplier::new(periodize_on_line(phi, kernel, &line)?, line.clone())?;
            for &p in &cfg.p {
                let phi_weak = estimate_operator_weak_norm(&t_phi, p, &tcorpus)?.estimate;
                let kernel_strong = estimate_operator_strong_norm(&t_lambda, p, &lcorpus)?.estimate;
                let periodized_weak = estimate_operator_weak_norm(&t_w, p, &lcorpus)?.estimate;
                let denom = phi_weak * kernel_strong;
                rows.push(NormRow {
                    symbol: slabel.clone(),
                    kernel: klabel.clone(),
                    p,
                    phi_weak,
                    kernel_strong,
                    periodized_weak,
                    ratio: if denom > 0.0 { periodized_weak / denom } else { 0.0 },
                });
            }
        }
    }
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(NormReport {
        seed: cfg.seed,
        rows,
        min_ratio,
        max_ratio,
        note: "all norms are corpus lower-bound estimates; ratios are monitored, not asserted".into(),
    })
}
