//! Periodization `W_{phi,Lambda}`, the transference couple `(S, T)` on the
//! line model, the closed-form inverse transform of the tent with its summable
//! majorant, and the transferred operator `H_k`.
//!
//! With `supp Lambda` inside `[1/4, 3/4]^N` the tent `b` equals 1 on every
//! translate `supp Lambda + n`, so `S_v T_u = T_{u+v}` holds exactly on the
//! frequency grid.

use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fourier::{apply_multiplier, forward_transform};
use crate::grid::{DiscreteSymbol, Domain, GridFunction, LineModel, TorusGrid, WindowIter, C64};
use crate::kernel::KernelSpec;
use crate::weak::{check_exponent, Operator};

pub use crate::kernel::{tent_b, triangle_kernel};

/// Integer translates `n` (per axis, inclusive) with `xi - n` in the box.
fn translate_range(xi: f64, support: (f64, f64)) -> (i64, i64) {
    ((xi - support.1).ceil() as i64, (xi - support.0).floor() as i64)
}

/// `W_{phi,Lambda}(xi) = sum_n phi(n) Lambda(xi - n)`; only the finitely many
/// `n` with `xi - n` in the support box are visited.
pub fn periodize_at(phi: &DiscreteSymbol, kernel: &KernelSpec, xi: &[f64]) -> C64 {
    let window: Vec<(i64, i64)> = xi
        .iter()
        .zip(kernel.support())
        .zip(phi.window())
        .map(|((&x, &s), &(lo, hi))| {
            let (a, b) = translate_range(x, s);
            (a.max(lo), b.min(hi))
        })
        .collect();
    if window.iter().any(|&(a, b)| a > b) {
        return C64::new(0.0, 0.0);
    }
    let mut shifted = vec![0.0; xi.len()];
    WindowIter::new(&window)
        .map(|n| {
            for i in 0..xi.len() {
                shifted[i] = xi[i] - n[i] as f64;
            }
            phi.get(&n) * kernel.evaluate(&shifted)
        })
        .sum()
}

/// Periodization sampled at each point of `points`.
pub fn periodize(phi: &DiscreteSymbol, kernel: &KernelSpec, points: &[Vec<f64>]) -> Result<Vec<C64>> {
    if phi.dim() != kernel.dim() {
        return Err(Error::DomainMismatch(format!(
            "symbol dimension {} vs kernel dimension {}",
            phi.dim(),
            kernel.dim()
        )));
    }
    if let Some(p) = points.iter().find(|p| p.len() != kernel.dim()) {
        return Err(Error::DomainMismatch(format!("point {p:?} has wrong dimension")));
    }
    Ok(points.iter().map(|xi| periodize_at(phi, kernel, xi)).collect())
}

/// Periodization tabulated on the frequency grid of `line`, as a table kernel.
pub fn periodize_on_line(phi: &DiscreteSymbol, kernel: &KernelSpec, line: &LineModel) -> Result<KernelSpec> {
    let d: Domain = line.clone().into();
    let points: Vec<Vec<f64>> = (0..d.len()).map(|i| d.frequency(i)).collect();
    let values = periodize(phi, kernel, &points)?;
    let f = line.freq_halfwidth();
    KernelSpec::table(
        vec![-f; line.dim()],
        vec![line.freq_resolution(); line.dim()],
        vec![line.samples_per_period(); line.dim()],
        values,
    )
}

/// `sum_n Lambda(xi - n) e^{2 pi i u.n}` over all integer `n`.
pub fn modulated_periodization(kernel: &KernelSpec, u: &[f64], xi: &[f64]) -> C64 {
    let window: Vec<(i64, i64)> = xi
        .iter()
        .zip(kernel.support())
        .map(|(&x, &s)| translate_range(x, s))
        .collect();
    if window.iter().any(|&(a, b)| a > b) {
        return C64::new(0.0, 0.0);
    }
    let mut shifted = vec![0.0; xi.len()];
    WindowIter::new(&window)
        .map(|n| {
            let mut phase = 0.0;
            for i in 0..xi.len() {
                shifted[i] = xi[i] - n[i] as f64;
                phase += u[i] * n[i] as f64;
            }
            let v = kernel.evaluate(&shifted);
            if v.re == 0.0 && v.im == 0.0 {
                v
            } else {
                v * C64::from_polar(1.0, 2.0 * PI * phase)
            }
        })
        .sum()
}

/// The kernel `Lambda`, the line model it acts on, the quadrature grid for `u`
/// and the exponent `p`.
#[derive(Clone, Debug)]
pub struct TransferCoupleConfig {
    kernel: KernelSpec,
    tent: KernelSpec,
    line: LineModel,
    u_grid: TorusGrid,
    p: f64,
}

impl TransferCoupleConfig {
    pub fn new(kernel: KernelSpec, line: LineModel, u_grid: TorusGrid, p: f64) -> Result<Self> {
        check_exponent(p)?;
        let dim = kernel.dim();
        if line.dim() != dim || u_grid.dim() != dim {
            return Err(Error::DomainMismatch(format!(
                "kernel dim {dim}, line dim {}, u-grid dim {}",
                line.dim(),
                u_grid.dim()
            )));
        }
        if !kernel.support_within(&vec![(0.25, 0.75); dim]) {
            return Err(Error::Support(format!(
                "kernel support {:?} is not inside [1/4, 3/4]^{dim}",
                kernel.support()
            )));
        }
        Ok(Self {
            tent: KernelSpec::tent_b(dim),
            kernel,
            line,
            u_grid,
            p,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn line(&self) -> &LineModel {
        &self.line
    }

    pub fn u_grid(&self) -> &TorusGrid {
        &self.u_grid
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    fn check_input(&self, u: &[f64], f: &GridFunction) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DomainMismatch(format!("u has {} components", u.len())));
        }
        if f.domain() != &Domain::Line(self.line.clone()) {
            return Err(Error::DomainMismatch(format!(
                "function lives on {}, couple on {}",
                f.domain().describe(),
                Domain::Line(self.line.clone()).describe()
            )));
        }
        Ok(())
    }
}

/// `(T_u f)^(xi) = sum_n Lambda(xi - n) e^{2 pi i u.n} f^(xi)`.
pub fn transfer_family_t(cfg: &TransferCoupleConfig, u: &[f64], f: &GridFunction) -> Result<GridFunction> {
    cfg.check_input(u, f)?;
    Ok(apply_multiplier(f, |_, xi| modulated_periodization(&cfg.kernel, u, xi)))
}

/// `(S_u f)^(xi) = sum_n b(xi - n) e^{2 pi i u.n} f^(xi)`.
pub fn transfer_family_s(cfg: &TransferCoupleConfig, u: &[f64], f: &GridFunction) -> Result<GridFunction> {
    cfg.check_input(u, f)?;
    Ok(apply_multiplier(f, |_, xi| modulated_periodization(&cfg.tent, u, xi)))
}

/// `2 (cos(pi y/2) - cos(pi y)) / (pi^2 y^2)`, the inverse transform of the
/// tent recentred at the origin, evaluated as
/// `4 sin(3 pi y/4) sin(pi y/4) / (pi^2 y^2)`; `3/4 - 5 pi^2 y^2 / 64` near 0.
fn centred_tent_transform(y: f64) -> f64 {
    if y.abs() < 1e-6 {
        0.75 - 5.0 * PI * PI * y * y / 64.0
    } else {
        4.0 * (0.75 * PI * y).sin() * (0.25 * PI * y).sin() / (PI * PI * y * y)
    }
}

/// `b_i^vee(y) = int b_i(xi) e^{2 pi i xi y} dxi = e^{i pi y} * centred part`.
pub fn tent_inverse_transform_1d(y: f64) -> C64 {
    C64::from_polar(centred_tent_transform(y), PI * y)
}

/// Inverse Fourier transform of `beta_u(xi) = b(xi) e^{2 pi i xi.u}` at the
/// integer point `l`, i.e. `prod_i b_i^vee(l_i + u_i)`.
pub fn beta_check(u: &[f64], l: &[i64]) -> C64 {
    u.iter()
        .zip(l)
        .map(|(&ui, &li)| tent_inverse_transform_1d(li as f64 + ui))
        .product()
}

/// One-dimensional majorant: `1/(l-1)^2` for `l >= 2`, `1/(l+1)^2` for
/// `l <= -2`, and `||b_i||_1 = 3/4` on `{-1, 0, 1}`.
pub fn beta_majorant_1d(l: i64) -> f64 {
    if l >= 2 {
        1.0 / ((l - 1) as f64).powi(2)
    } else if l <= -2 {
        1.0 / ((l + 1) as f64).powi(2)
    } else {
        0.75
    }
}

pub fn beta_majorant(l: &[i64]) -> f64 {
    l.iter().map(|&li| beta_majorant_1d(li)).product()
}

/// `sum_{l in Z} beta_1(l) = 9/4 + pi^2/3`.
pub fn beta_majorant_total_1d() -> f64 {
    2.25 + PI * PI / 3.0
}

/// Coefficient of `f(x + u - l)` in the spatial form of `S_u`:
/// `prod_i b_i^vee(l_i - u_i)`.
pub fn spatial_s_coefficient(u: &[f64], l: &[i64]) -> C64 {
    let neg: Vec<f64> = u.iter().map(|v| -v).collect();
    beta_check(&neg, l)
}

/// `S_u f(x) = sum_{||l||_inf <= L} c_u(l) f(x + u - l)` with `u` snapped to
/// the spatial grid. Differs from [`transfer_family_s`] by at most
/// `||f||_inf * sum_{||l||_inf > L} beta(l)`.
pub fn apply_s_spatial(line: &LineModel, u: &[f64], f: &GridFunction, truncation: usize) -> Result<GridFunction> {
    if truncation < 1 {
        return Err(Error::Invalid("truncation L must be at least 1".into()));
    }
    let d: Domain = line.clone().into();
    if f.domain() != &d {
        return Err(Error::DomainMismatch(format!(
            "function lives on {}, expected {}",
            f.domain().describe(),
            d.describe()
        )));
    }
    if u.len() != line.dim() {
        return Err(Error::DomainMismatch(format!("u has {} components", u.len())));
    }
    if !line.samples_per_period().is_multiple_of(line.period()) {
        return Err(Error::Resolution(format!(
            "integer shifts need P | M_R (P = {}, M_R = {})",
            line.period(),
            line.samples_per_period()
        )));
    }
    let per_unit = (line.samples_per_period() / line.period()) as i64;
    let h = line.spacing();
    let u_steps: Vec<i64> = u.iter().map(|&v| (v / h).round() as i64).collect();
    let u_snapped: Vec<f64> = u_steps.iter().map(|&s| s as f64 * h).collect();
    let l_box = vec![(-(truncation as i64), truncation as i64); line.dim()];
    let terms: Vec<(Vec<i64>, C64)> = WindowIter::new(&l_box)
        .map(|l| {
            let c = spatial_s_coefficient(&u_snapped, &l);
            let shift: Vec<i64> = l
                .iter()
                .zip(&u_steps)
                .map(|(&li, &us)| us - li * per_unit)
                .collect();
            (shift, c)
        })
        .collect();
    let values: Vec<C64> = (0..d.len())
        .into_par_iter()
        .map(|i| {
            let x = d.spatial_index(i);
            let mut idx = vec![0i64; x.len()];
            let mut acc = C64::new(0.0, 0.0);
            for (shift, c) in &terms {
                for a in 0..x.len() {
                    idx[a] = x[a] + shift[a];
                }
                acc += c * f.values()[d.spatial_flat_wrapped(&idx)];
            }
            acc
        })
        .collect();
    GridFunction::new(d, values)
}

/// Largest per-axis frequency index carried by a trigonometric polynomial
/// sampled on its torus grid.
pub fn trig_degree(k: &GridFunction) -> usize {
    let c = forward_transform(k);
    let max = c.coefficients().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    let d = c.domain();
    c.coefficients()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > 1e-12 * max)
        .flat_map(|(i, _)| d.freq_index(i))
        .map(|n| n.unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
}

/// `H_k f = int_{T^N} k(u) T_{-u} f du`, realized by the rectangle rule on the
/// couple's `u`-grid. The multiplier of the quadrature sum is built once.
#[derive(Clone, Debug)]
pub struct TransferredOperator {
    domain: Domain,
    multiplier: Vec<C64>,
}

impl TransferredOperator {
    /// Refuses grids on which the rectangle rule would alias: for every
    /// translate `n` reachable from the band and every `|m| <= R`, `n - m`
    /// must not be a non-zero multiple of `M_u`.
    pub fn new(cfg: &TransferCoupleConfig, k: &GridFunction) -> Result<Self> {
        let ug: Domain = cfg.u_grid.clone().into();
        if k.domain() != &ug {
            return Err(Error::DomainMismatch(format!(
                "k lives on {}, quadrature grid is {}",
                k.domain().describe(),
                ug.describe()
            )));
        }
        let degree = trig_degree(k) as i64;
        let m_u = cfg.u_grid.points_per_dim() as i64;
        let line: Domain = cfg.line.clone().into();
        let (klo, khi) = line.freq_index_range();
        let step = line.freq_step();
        for &(slo, shi) in cfg.kernel.support() {
            let n_lo = (klo as f64 * step - shi).ceil() as i64;
            let n_hi = (khi as f64 * step - slo).floor() as i64;
            let need = (n_hi + degree).max(degree - n_lo) + 1;
            if m_u < need {
                return Err(Error::Resolution(format!(
                    "u-grid with M_u = {m_u} aliases: translates reach n in [{n_lo}, {n_hi}], \
                     k has degree {degree}; need M_u >= {need}"
                )));
            }
        }
        let weight = cfg.u_grid.cell_volume();
        let nodes: Vec<(Vec<f64>, C64)> = (0..ug.len())
            .filter(|&j| k.values()[j] != C64::new(0.0, 0.0))
            .map(|j| {
                let u: Vec<f64> = ug.spatial_point(j).iter().map(|v| -v).collect();
                (u, k.values()[j] * weight)
            })
            .collect();
        let multiplier = (0..line.len())
            .into_par_iter()
            .map(|i| {
                let xi = line.frequency(i);
                nodes
                    .iter()
                    .map(|(u, w)| w * modulated_periodization(&cfg.kernel, u, &xi))
                    .sum()
            })
            .collect();
        Ok(Self {
            domain: line,
            multiplier,
        })
    }

    /// Multiplier values on the frequency grid, row-major.
    pub fn multiplier(&self) -> &[C64] {
        &self.multiplier
    }
}

impl Operator for TransferredOperator {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.domain() != &self.domain {
            return Err(Error::DomainMismatch(format!(
                "function lives on {}, operator on {}",
                f.domain().describe(),
                self.domain.describe()
            )));
        }
        let mut c = forward_transform(f);
        for (a, m) in c.coefficients_mut().iter_mut().zip(&self.multiplier) {
            *a *= m;
        }
        Ok(crate::fourier::inverse_transform(&c))
    }
}

/// One-shot `H_k f`.
pub fn transferred_operator_hk(cfg: &TransferCoupleConfig, k: &GridFunction, f: &GridFunction) -> Result<GridFunction> {
    TransferredOperator::new(cfg, k)?.apply(f)
}

/// Smallest quadrature size that makes `H_k` exact for a symbol of reach
/// `degree` under `cfg`'s kernel and band, never below `4R + 4`.
pub fn exact_u_grid_size(kernel: &KernelSpec, line: &LineModel, degree: usize) -> usize {
    let d: Domain = line.clone().into();
    let (klo, khi) = d.freq_index_range();
    let step = d.freq_step();
    let r = degree as i64;
    let need = kernel
        .support()
        .iter()
        .map(|&(slo, shi)| {
            let n_lo = (klo as f64 * step - shi).ceil() as i64;
            let n_hi = (khi as f64 * step - slo).floor() as i64;
            (n_hi + r).max(r - n_lo) + 1
        })
        .max()
        .unwrap_or(1);
    (need as usize).max(4 * degree + 4)
}
