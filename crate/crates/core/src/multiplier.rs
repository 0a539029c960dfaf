//! Multiplier operators: discrete symbols on torus grids and kernel symbols on
//! line models.

use crate::error::{Error, Result};
use crate::fourier::apply_multiplier;
use crate::grid::{DiscreteSymbol, Domain, GridFunction, LineModel, TorusGrid, C64};
use crate::kernel::KernelSpec;
use crate::weak::Operator;

fn torus_of(f: &GridFunction) -> Result<&TorusGrid> {
    match f.domain() {
        Domain::Torus(g) => Ok(g),
        Domain::Line(_) => Err(Error::DomainMismatch(
            "discrete symbols act on torus grids".into(),
        )),
    }
}

fn line_of(f: &GridFunction) -> Result<&LineModel> {
    match f.domain() {
        Domain::Line(l) => Ok(l),
        Domain::Torus(_) => Err(Error::DomainMismatch(
            "kernel symbols act on line models".into(),
        )),
    }
}

/// Checks that the symbol window lies inside the grid's frequency band.
pub fn check_symbol_fits(phi: &DiscreteSymbol, grid: &TorusGrid) -> Result<()> {
    if phi.dim() != grid.dim() {
        return Err(Error::DomainMismatch(format!(
            "symbol dimension {} vs grid dimension {}",
            phi.dim(),
            grid.dim()
        )));
    }
    let d: Domain = grid.clone().into();
    let (lo, hi) = d.freq_index_range();
    if let Some(&(a, b)) = phi.window().iter().find(|&&(a, b)| a < lo || b > hi) {
        return Err(Error::Resolution(format!(
            "symbol window [{a}, {b}] exceeds frequency band [{lo}, {hi}] of M = {}",
            grid.points_per_dim()
        )));
    }
    Ok(())
}

/// `(T_phi f)^(n) = phi(n) f^(n)`.
pub fn apply_discrete_symbol(phi: &DiscreteSymbol, f: &GridFunction) -> Result<GridFunction> {
    check_symbol_fits(phi, torus_of(f)?)?;
    Ok(apply_multiplier(f, |n, _| phi.get(n)))
}

/// Checks that `supp Lambda` lies in the closed band `[-F, F]^N`.
pub fn check_kernel_fits(kernel: &KernelSpec, line: &LineModel) -> Result<()> {
    if kernel.dim() != line.dim() {
        return Err(Error::DomainMismatch(format!(
            "kernel dimension {} vs line dimension {}",
            kernel.dim(),
            line.dim()
        )));
    }
    let f = line.freq_halfwidth();
    if !kernel.support_within(&vec![(-f, f); line.dim()]) {
        return Err(Error::Support(format!(
            "kernel support {:?} exceeds the frequency band [-{f}, {f}]",
            kernel.support()
        )));
    }
    Ok(())
}

/// `(T_Lambda f)^(xi) = Lambda(xi) f^(xi)` on the frequency grid.
pub fn apply_kernel_symbol(kernel: &KernelSpec, f: &GridFunction) -> Result<GridFunction> {
    check_kernel_fits(kernel, line_of(f)?)?;
    Ok(apply_multiplier(f, |_, xi| kernel.evaluate(xi)))
}

/// `Lambda(. - c)`.
pub fn translate_symbol(kernel: &KernelSpec, shift: &[f64]) -> Result<KernelSpec> {
    if shift.len() != kernel.dim() || shift.iter().any(|c| !c.is_finite()) {
        return Err(Error::Invalid(format!("bad translation vector {shift:?}")));
    }
    if shift.iter().all(|&c| c == 0.0) {
        return Ok(kernel.clone());
    }
    KernelSpec::scaled(kernel.clone(), 1.0, shift.to_vec())
}

/// `f -> e^{2 pi i c.x} f` on a line model.
pub fn modulate(f: &GridFunction, c: &[f64]) -> GridFunction {
    let d = f.domain();
    let v = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let ph: f64 = d.spatial_point(i).iter().zip(c).map(|(x, a)| x * a).sum();
            v * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * ph)
        })
        .collect();
    GridFunction::new(d.clone(), v).expect("modulation keeps values finite")
}

/// `T_phi` as an [`Operator`] on a torus grid.
#[derive(Clone, Debug)]
pub struct DiscreteMultiplier {
    domain: Domain,
    symbol: DiscreteSymbol,
}

impl DiscreteMultiplier {
    pub fn new(symbol: DiscreteSymbol, grid: TorusGrid) -> Result<Self> {
        check_symbol_fits(&symbol, &grid)?;
        Ok(Self {
            domain: grid.into(),
            symbol,
        })
    }

    pub fn symbol(&self) -> &DiscreteSymbol {
        &self.symbol
    }
}

impl Operator for DiscreteMultiplier {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        apply_discrete_symbol(&self.symbol, f)
    }
}

/// `T_Lambda` as an [`Operator`] on a line model.
#[derive(Clone, Debug)]
pub struct KernelMultiplier {
    domain: Domain,
    kernel: KernelSpec,
}

impl KernelMultiplier {
    pub fn new(kernel: KernelSpec, line: LineModel) -> Result<Self> {
        check_kernel_fits(&kernel, &line)?;
        Ok(Self {
            domain: line.into(),
            kernel,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }
}

impl Operator for KernelMultiplier {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        apply_kernel_symbol(&self.kernel, f)
    }
}
