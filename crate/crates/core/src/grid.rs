//! Discretized domains and the containers every other module consumes.
//!
//! Two domains are modeled. A [`TorusGrid`] samples `T^N = [0,1)^N` at the
//! points `m/M`; its frequencies are the integers in the symmetric half-open
//! range `{-M/2, ..., M/2-1}`. A [`LineModel`] stands in for `R^N`: a torus of
//! period `P` sampled with spacing `h = P/M_R`, with spatial grid
//! `h * {-M_R/2, ..., M_R/2-1}` and frequency grid `(1/P) * {-M_R/2, ..., M_R/2-1}`.
//!
//! All containers store values in row-major order (last axis fastest).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Uniform grid on the torus `[0,1)^N` with `M` points per axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    points_per_dim: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, points_per_dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if points_per_dim < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points per axis, got {points_per_dim}"
            )));
        }
        Ok(Self { dim, points_per_dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn len(&self) -> usize {
        self.points_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `M^{-N}`.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }
}

/// Period-`P` model of `R^N` with `M_R` samples per period and axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineModel {
    dim: usize,
    period: usize,
    samples_per_period: usize,
}

impl LineModel {
    pub fn new(dim: usize, period: usize, samples_per_period: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if period < 2 || !period.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "period must be a positive even integer >= 2, got {period}"
            )));
        }
        if samples_per_period < 2 * period {
            return Err(Error::InvalidGrid(format!(
                "frequency band too small: M_R = {samples_per_period} < 2P = {}",
                2 * period
            )));
        }
        Ok(Self {
            dim,
            period,
            samples_per_period,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn samples_per_period(&self) -> usize {
        self.samples_per_period
    }

    pub fn len(&self) -> usize {
        self.samples_per_period.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spatial spacing `h = P / M_R`.
    pub fn spacing(&self) -> f64 {
        self.period as f64 / self.samples_per_period as f64
    }

    /// Frequency spacing `1 / P`.
    pub fn freq_resolution(&self) -> f64 {
        1.0 / self.period as f64
    }

    /// `F = M_R / (2P)`; the frequency grid covers `[-F, F)`.
    pub fn freq_halfwidth(&self) -> f64 {
        self.samples_per_period as f64 / (2.0 * self.period as f64)
    }
}

/// Either of the two discretized domains.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Torus(TorusGrid),
    Line(LineModel),
}

impl From<TorusGrid> for Domain {
    fn from(g: TorusGrid) -> Self {
        Domain::Torus(g)
    }
}

impl From<LineModel> for Domain {
    fn from(l: LineModel) -> Self {
        Domain::Line(l)
    }
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Torus(g) => g.dim,
            Domain::Line(l) => l.dim,
        }
    }

    /// Number of samples per axis.
    pub fn side(&self) -> usize {
        match self {
            Domain::Torus(g) => g.points_per_dim,
            Domain::Line(l) => l.samples_per_period,
        }
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Domain::Torus(_))
    }

    /// Riemann weight of one spatial cell (`M^{-N}` or `h^N`).
    pub fn spatial_weight(&self) -> f64 {
        match self {
            Domain::Torus(g) => g.cell_volume(),
            Domain::Line(l) => l.spacing().powi(l.dim as i32),
        }
    }

    /// Weight of one frequency cell (`1` or `P^{-N}`).
    pub fn spectral_weight(&self) -> f64 {
        match self {
            Domain::Torus(_) => 1.0,
            Domain::Line(l) => l.freq_resolution().powi(l.dim as i32),
        }
    }

    pub fn spatial_step(&self) -> f64 {
        match self {
            Domain::Torus(g) => 1.0 / g.points_per_dim as f64,
            Domain::Line(l) => l.spacing(),
        }
    }

    pub fn freq_step(&self) -> f64 {
        match self {
            Domain::Torus(_) => 1.0,
            Domain::Line(l) => l.freq_resolution(),
        }
    }

    /// Integer index of the first spatial sample along each axis.
    pub fn spatial_offset(&self) -> i64 {
        match self {
            Domain::Torus(_) => 0,
            Domain::Line(l) => -((l.samples_per_period / 2) as i64),
        }
    }

    /// Integer index of the first frequency along each axis.
    pub fn freq_offset(&self) -> i64 {
        -((self.side() / 2) as i64)
    }

    /// Inclusive range of frequency indices along one axis.
    pub fn freq_index_range(&self) -> (i64, i64) {
        let lo = self.freq_offset();
        (lo, lo + self.side() as i64 - 1)
    }

    /// Per-axis positions `0..side` for a flat row-major index.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let side = self.side();
        let dim = self.dim();
        let mut out = vec![0; dim];
        for a in (0..dim).rev() {
            out[a] = flat % side;
            flat /= side;
        }
        out
    }

    pub fn flatten(&self, pos: &[usize]) -> usize {
        let side = self.side();
        pos.iter().fold(0, |acc, &p| acc * side + p)
    }

    /// Integer spatial index (`m` with point `m * step`) of a flat index.
    pub fn spatial_index(&self, flat: usize) -> Vec<i64> {
        let off = self.spatial_offset();
        self.unflatten(flat)
            .into_iter()
            .map(|p| p as i64 + off)
            .collect()
    }

    pub fn spatial_point(&self, flat: usize) -> Vec<f64> {
        let step = self.spatial_step();
        self.spatial_index(flat)
            .into_iter()
            .map(|m| m as f64 * step)
            .collect()
    }

    /// Integer frequency index `k` of a flat index; the frequency is `k * freq_step`.
    pub fn freq_index(&self, flat: usize) -> Vec<i64> {
        let off = self.freq_offset();
        self.unflatten(flat)
            .into_iter()
            .map(|p| p as i64 + off)
            .collect()
    }

    pub fn frequency(&self, flat: usize) -> Vec<f64> {
        let step = self.freq_step();
        self.freq_index(flat)
            .into_iter()
            .map(|k| k as f64 * step)
            .collect()
    }

    /// Flat position of an integer frequency index, if it lies in the band.
    pub fn freq_flat(&self, index: &[i64]) -> Option<usize> {
        let (lo, hi) = self.freq_index_range();
        let side = self.side();
        let mut flat = 0usize;
        for &k in index {
            if k < lo || k > hi {
                return None;
            }
            flat = flat * side + (k - lo) as usize;
        }
        Some(flat)
    }

    /// Flat position of an integer spatial index, reduced periodically.
    pub fn spatial_flat_wrapped(&self, index: &[i64]) -> usize {
        let side = self.side() as i64;
        let off = self.spatial_offset();
        index
            .iter()
            .fold(0usize, |acc, &m| {
                acc * side as usize + (m - off).rem_euclid(side) as usize
            })
    }

    pub fn describe(&self) -> String {
        match self {
            Domain::Torus(g) => format!("torus(N={}, M={})", g.dim, g.points_per_dim),
            Domain::Line(l) => format!(
                "line(N={}, P={}, M_R={})",
                l.dim, l.period, l.samples_per_period
            ),
        }
    }
}

fn check_finite(values: &[C64]) -> Result<()> {
    match values
        .iter()
        .position(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Sampled function on a [`Domain`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    domain: Domain,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn new(domain: Domain, values: Vec<C64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::LengthMismatch {
                expected: domain.len(),
                actual: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: Domain) -> Self {
        let n = domain.len();
        Self {
            domain,
            values: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// Samples `f` at every spatial grid point.
    pub fn from_fn(domain: Domain, f: impl Fn(&[f64]) -> C64) -> Result<Self> {
        let values = (0..domain.len())
            .map(|i| f(&domain.spatial_point(i)))
            .collect();
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `(sum |f|^p * weight)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let w = self.domain.spatial_weight();
        let s: f64 = self.values.iter().map(|v| v.norm().powf(p)).sum();
        (s * w).powf(1.0 / p)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_domain(other)?;
        Ok(Self {
            domain: self.domain.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// `max |f - g|` over the grid.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_domain(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn same_domain(&self, other: &Self) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch(format!(
                "{} vs {}",
                self.domain.describe(),
                other.domain.describe()
            )));
        }
        Ok(())
    }

    /// Magnitudes sorted in descending order.
    pub fn sorted_magnitudes(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.values.iter().map(|v| v.norm()).collect();
        m.sort_by(|a, b| b.total_cmp(a));
        m
    }
}

/// Fourier coefficients indexed by a domain's frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    domain: Domain,
    coefficients: Vec<C64>,
}

impl Spectrum {
    pub fn new(domain: Domain, coefficients: Vec<C64>) -> Result<Self> {
        if coefficients.len() != domain.len() {
            return Err(Error::LengthMismatch {
                expected: domain.len(),
                actual: coefficients.len(),
            });
        }
        check_finite(&coefficients)?;
        Ok(Self {
            domain,
            coefficients,
        })
    }

    pub fn zeros(domain: Domain) -> Self {
        let n = domain.len();
        Self {
            domain,
            coefficients: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// Builds coefficients from integer frequency indices.
    pub fn from_index_fn(domain: Domain, f: impl Fn(&[i64]) -> C64) -> Result<Self> {
        let c = (0..domain.len())
            .map(|i| f(&domain.freq_index(i)))
            .collect();
        Self::new(domain, c)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [C64] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<C64> {
        self.coefficients
    }

    /// Coefficient at an integer frequency index; zero outside the band.
    pub fn at(&self, index: &[i64]) -> C64 {
        self.domain
            .freq_flat(index)
            .map(|i| self.coefficients[i])
            .unwrap_or_default()
    }

    /// Pointwise multiplication by `m(k, xi)` with `k` the integer index and
    /// `xi` the frequency.
    pub fn multiply_by(&self, m: impl Fn(&[i64], &[f64]) -> C64) -> Self {
        let step = self.domain.freq_step();
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = self.domain.freq_index(i);
                let xi: Vec<f64> = k.iter().map(|&v| v as f64 * step).collect();
                c * m(&k, &xi)
            })
            .collect();
        Self {
            domain: self.domain.clone(),
            coefficients,
        }
    }

    /// Evaluates the trigonometric series `sum_k c(k) e^{2 pi i k.x}` scaled by
    /// the spectral weight at an arbitrary point `x` (torus coordinates for a
    /// torus, physical coordinates for a line model).
    pub fn evaluate_at(&self, x: &[f64]) -> C64 {
        let step = self.domain.freq_step();
        let w = self.domain.spectral_weight();
        let mut acc = C64::new(0.0, 0.0);
        for (i, c) in self.coefficients.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let phase: f64 = self
                .domain
                .freq_index(i)
                .iter()
                .zip(x)
                .map(|(&k, &xv)| k as f64 * step * xv)
                .sum();
            acc += c * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase);
        }
        acc * w
    }
}

/// Finitely windowed complex function on `Z^N`, zero outside its window.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSymbol {
    window: Vec<(i64, i64)>,
    values: Vec<C64>,
}

impl DiscreteSymbol {
    pub fn new(window: Vec<(i64, i64)>, values: Vec<C64>) -> Result<Self> {
        if window.is_empty() {
            return Err(Error::Invalid("symbol window needs at least one axis".into()));
        }
        if window.iter().any(|&(lo, hi)| lo > hi) {
            return Err(Error::Invalid(format!("empty symbol window {window:?}")));
        }
        let expected = window_len(&window);
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { window, values })
    }

    pub fn from_fn(window: Vec<(i64, i64)>, mut f: impl FnMut(&[i64]) -> C64) -> Result<Self> {
        let values = WindowIter::new(&window).map(|n| f(&n)).collect();
        Self::new(window, values)
    }

    /// The unit mass at the origin.
    pub fn delta(dim: usize) -> Self {
        Self {
            window: vec![(0, 0); dim],
            values: vec![C64::new(1.0, 0.0)],
        }
    }

    /// `phi = c` on the cube `[-r, r]^N`.
    pub fn constant(dim: usize, radius: i64, c: C64) -> Self {
        let window = vec![(-radius, radius); dim];
        let n = window_len(&window);
        Self {
            window,
            values: vec![c; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.window.len()
    }

    pub fn window(&self) -> &[(i64, i64)] {
        &self.window
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn get(&self, n: &[i64]) -> C64 {
        let mut flat = 0usize;
        for (&k, &(lo, hi)) in n.iter().zip(&self.window) {
            if k < lo || k > hi {
                return C64::new(0.0, 0.0);
            }
            flat = flat * (hi - lo + 1) as usize + (k - lo) as usize;
        }
        self.values[flat]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest `|n_i|` over the window.
    pub fn max_abs_coord(&self) -> i64 {
        self.window
            .iter()
            .map(|&(lo, hi)| lo.abs().max(hi.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Window points with their values.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, C64)> + '_ {
        WindowIter::new(&self.window).zip(self.values.iter().copied())
    }

    pub fn map(&self, f: impl Fn(&[i64], C64) -> C64) -> Self {
        let values = self.iter().map(|(n, v)| f(&n, v)).collect();
        Self {
            window: self.window.clone(),
            values,
        }
    }

    pub fn to_file(&self) -> SymbolFile {
        SymbolFile {
            dim: self.dim(),
            window: self.window.iter().map(|&(a, b)| [a, b]).collect(),
            re: self.values.iter().map(|v| v.re).collect(),
            im: self.values.iter().map(|v| v.im).collect(),
        }
    }

    pub fn from_file(file: SymbolFile) -> Result<Self> {
        if file.window.len() != file.dim {
            return Err(Error::Invalid(format!(
                "window has {} axes but dim = {}",
                file.window.len(),
                file.dim
            )));
        }
        if file.re.len() != file.im.len() {
            return Err(Error::LengthMismatch {
                expected: file.re.len(),
                actual: file.im.len(),
            });
        }
        let values = file
            .re
            .iter()
            .zip(&file.im)
            .map(|(&r, &i)| C64::new(r, i))
            .collect();
        Self::new(file.window.iter().map(|w| (w[0], w[1])).collect(), values)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// On-disk layout of a [`DiscreteSymbol`]; values are flattened row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolFile {
    pub dim: usize,
    pub window: Vec<[i64; 2]>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

pub(crate) fn window_len(window: &[(i64, i64)]) -> usize {
    window
        .iter()
        .map(|&(lo, hi)| (hi - lo + 1).max(0) as usize)
        .product()
}

/// Row-major iterator over the integer points of a box.
#[derive(Clone, Debug)]
pub struct WindowIter {
    window: Vec<(i64, i64)>,
    next: Option<Vec<i64>>,
}

impl WindowIter {
    pub fn new(window: &[(i64, i64)]) -> Self {
        let next = if window.iter().all(|&(lo, hi)| lo <= hi) {
            Some(window.iter().map(|&(lo, _)| lo).collect())
        } else {
            None
        };
        Self {
            window: window.to_vec(),
            next,
        }
    }
}

impl Iterator for WindowIter {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut axis = succ.len();
        loop {
            if axis == 0 {
                self.next = None;
                break;
            }
            axis -= 1;
            if succ[axis] < self.window[axis].1 {
                succ[axis] += 1;
                self.next = Some(succ);
                break;
            }
            succ[axis] = self.window[axis].0;
        }
        Some(current)
    }
}
