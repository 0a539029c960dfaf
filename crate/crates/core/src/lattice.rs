//! Lattice-preserving transforms `A`: cosets of `Z^N / A Z^N`, the fundamental
//! domain `Q`, symbol resampling `psi(n) = phi(Bn)` and `eta(Bn) = phi(n)`,
//! the dilation `S` and averaging `W` operators, and periodization under
//! `Lambda o B` and `Lambda o B^{-1}`, where `B = A^t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

use crate::corpus::random_trig_poly;
use crate::error::{Error, Result};
use crate::fourier::{forward_transform, inverse_transform};
use crate::grid::{DiscreteSymbol, Domain, GridFunction, Spectrum, TorusGrid, WindowIter, C64};
use crate::kernel::KernelSpec;
use crate::multiplier::apply_discrete_symbol;
use crate::transfer::periodize_at;

pub type IntMatrix = Vec<Vec<i64>>;

/// Parses `"a,b;c,d"` (rows separated by `;`).
pub fn parse_matrix(text: &str) -> Result<IntMatrix> {
    let rows: Vec<Vec<i64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<i64>()
                        .map_err(|e| Error::Invalid(format!("matrix entry {v:?}: {e}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    check_square(&rows)?;
    Ok(rows)
}

fn check_square(a: &[Vec<i64>]) -> Result<()> {
    let n = a.len();
    if n == 0 || a.iter().any(|r| r.len() != n) {
        return Err(Error::Invalid(format!("matrix must be square and non-empty, got {a:?}")));
    }
    Ok(())
}

fn minor(a: &[Vec<i64>], row: usize, col: usize) -> IntMatrix {
    a.iter()
        .enumerate()
        .filter(|&(i, _)| i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|&(j, _)| j != col)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}

/// Exact determinant by cofactor expansion.
pub fn int_det(a: &[Vec<i64>]) -> i128 {
    match a.len() {
        0 => 1,
        1 => a[0][0] as i128,
        2 => a[0][0] as i128 * a[1][1] as i128 - a[0][1] as i128 * a[1][0] as i128,
        n => (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1 } else { -1 };
                sign * a[0][j] as i128 * int_det(&minor(a, 0, j))
            })
            .sum(),
    }
}

/// Exact adjugate, so that `adj(A) A = det(A) I`.
pub fn int_adjugate(a: &[Vec<i64>]) -> IntMatrix {
    let n = a.len();
    if n == 1 {
        return vec![vec![1]];
    }
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                    (sign * int_det(&minor(a, j, i))) as i64
                })
                .collect()
        })
        .collect()
}

fn transpose(a: &[Vec<i64>]) -> IntMatrix {
    (0..a.len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn mat_vec(a: &[Vec<i64>], v: &[i64]) -> Vec<i64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn mat_vec_f(a: &[Vec<i64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(v).map(|(&x, y)| x as f64 * y).sum())
        .collect()
}

/// Integer matrix `A` with `det A != 0`, its transpose `B`, `q = |det A|` and
/// lexicographically first representatives of `Z^N / A Z^N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeTransform {
    a: IntMatrix,
    b: IntMatrix,
    det: i64,
    q: u64,
    adj_a: IntMatrix,
    adj_b: IntMatrix,
    cosets: Vec<Vec<i64>>,
}

/// Scans `[0, q)^N` in lexicographic order, keeping the first member of each
/// class of `Z^N / A Z^N`.
pub fn coset_representatives(a: &[Vec<i64>]) -> Result<LatticeTransform> {
    check_square(a)?;
    let det = int_det(a);
    if det == 0 {
        return Err(Error::SingularMatrix);
    }
    let det = i64::try_from(det).map_err(|_| Error::Invalid("determinant overflows i64".into()))?;
    let q = det.unsigned_abs();
    let adj_a = int_adjugate(a);
    let b = transpose(a);
    let adj_b = int_adjugate(&b);
    let n = a.len();
    let mut cosets: Vec<Vec<i64>> = Vec::with_capacity(q as usize);
    let in_image = |v: &[i64]| mat_vec(&adj_a, v).iter().all(|x| x % det == 0);
    for v in WindowIter::new(&vec![(0, q as i64 - 1); n]) {
        let fresh = cosets.iter().all(|r| {
            let d: Vec<i64> = v.iter().zip(r).map(|(x, y)| x - y).collect();
            !in_image(&d)
        });
        if fresh {
            cosets.push(v);
            if cosets.len() == q as usize {
                break;
            }
        }
    }
    if cosets.len() != q as usize {
        return Err(Error::Invalid(format!(
            "residue scan found {} classes, expected {q}",
            cosets.len()
        )));
    }
    Ok(LatticeTransform {
        a: a.to_vec(),
        b,
        det,
        q,
        adj_a,
        adj_b,
        cosets,
    })
}

impl LatticeTransform {
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &IntMatrix {
        &self.a
    }

    pub fn b(&self) -> &IntMatrix {
        &self.b
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn det(&self) -> i64 {
        self.det
    }

    pub fn cosets(&self) -> &[Vec<i64>] {
        &self.cosets
    }

    /// Whether `v` lies in `A Z^N`.
    pub fn in_image(&self, v: &[i64]) -> bool {
        mat_vec(&self.adj_a, v).iter().all(|x| x % self.det == 0)
    }

    pub fn congruent(&self, u: &[i64], v: &[i64]) -> bool {
        let d: Vec<i64> = u.iter().zip(v).map(|(x, y)| x - y).collect();
        self.in_image(&d)
    }

    /// Index of the coset containing `v`.
    pub fn class_of(&self, v: &[i64]) -> usize {
        self.cosets
            .iter()
            .position(|r| self.congruent(v, r))
            .expect("cosets cover Z^N")
    }

    pub fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        mat_vec_f(&self.a, x)
    }

    pub fn apply_b(&self, x: &[f64]) -> Vec<f64> {
        mat_vec_f(&self.b, x)
    }

    pub fn apply_a_inv(&self, x: &[f64]) -> Vec<f64> {
        mat_vec_f(&self.adj_a, x).iter().map(|v| v / self.det as f64).collect()
    }

    pub fn apply_b_inv(&self, x: &[f64]) -> Vec<f64> {
        mat_vec_f(&self.adj_b, x).iter().map(|v| v / self.det as f64).collect()
    }

    /// `B^{-1} m` when it is an integer vector.
    pub fn b_preimage(&self, m: &[i64]) -> Option<Vec<i64>> {
        let v = mat_vec(&self.adj_b, m);
        if v.iter().all(|x| x % self.det == 0) {
            Some(v.iter().map(|x| x / self.det).collect())
        } else {
            None
        }
    }

    pub fn b_int(&self, n: &[i64]) -> Vec<i64> {
        mat_vec(&self.b, n)
    }

    /// Indices `i` with `Ax - k_i` in `[0,1)^N`, each piece tested separately.
    pub fn pieces_containing(&self, x: &[f64]) -> Vec<usize> {
        let ax = self.apply_a(x);
        self.cosets
            .iter()
            .enumerate()
            .filter(|(_, k)| ax.iter().zip(k.iter()).all(|(&y, &ki)| {
                let t = y - ki as f64;
                (0.0..1.0).contains(&t)
            }))
            .map(|(i, _)| i)
            .collect()
    }

    /// Membership in `Q = union_i A^{-1}(Q_0 + k_i)`.
    pub fn in_fundamental_domain(&self, x: &[f64]) -> bool {
        !self.pieces_containing(x).is_empty()
    }

    /// Integer box `[lo, hi)` per axis containing `Q`.
    pub fn fundamental_domain_box(&self) -> Vec<(i64, i64)> {
        let n = self.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for k in &self.cosets {
            for corner in WindowIter::new(&vec![(0, 1); n]) {
                let p: Vec<f64> = corner.iter().zip(k).map(|(&c, &ki)| (c + ki) as f64).collect();
                for (i, v) in self.apply_a_inv(&p).into_iter().enumerate() {
                    lo[i] = lo[i].min(v);
                    hi[i] = hi[i].max(v);
                }
            }
        }
        lo.iter()
            .zip(&hi)
            .map(|(&l, &h)| (l.floor() as i64, h.ceil() as i64))
            .collect()
    }

    /// Lebesgue measure of `Q` from midpoints `(2g+1)/(2K)` of a `1/K` grid
    /// over the bounding box. `Ax` has numerator `A(2g+1)` over `2K`, so the
    /// floor test `floor(Ax) = k_i` is exact integer arithmetic.
    pub fn measure_of_q(&self, per_unit: usize) -> Result<f64> {
        if per_unit == 0 {
            return Err(Error::Invalid("sampling density must be positive".into()));
        }
        let k = per_unit as i64;
        let bx = self.fundamental_domain_box();
        let window: Vec<(i64, i64)> = bx.iter().map(|&(l, h)| (l * k, h * k - 1)).collect();
        let members = WindowIter::new(&window)
            .filter(|g| {
                let num: Vec<i64> = g.iter().map(|v| 2 * v + 1).collect();
                let fl: Vec<i64> = mat_vec(&self.a, &num)
                    .iter()
                    .map(|v| v.div_euclid(2 * k))
                    .collect();
                self.cosets.contains(&fl)
            })
            .count();
        Ok(members as f64 / (per_unit as f64).powi(self.dim() as i32))
    }

    /// `K` such that the bounding box of `Q` holds about `samples` midpoints.
    pub fn density_for_samples(&self, samples: usize) -> usize {
        let vol: i64 = self.fundamental_domain_box().iter().map(|&(l, h)| h - l).product();
        ((samples as f64 / vol as f64).powf(1.0 / self.dim() as f64).floor() as usize).max(1)
    }
}

/// Outcome of the sampled disjointness and tiling checks.
#[derive(Clone, Debug, Serialize)]
pub struct TilingCheck {
    pub samples: usize,
    pub overlaps: usize,
    pub tiling_failures: usize,
}

/// At `samples` random points: no point lies in two pieces, and exactly one
/// integer translate `x - k` lies in `Q`.
pub fn check_tiling(l: &LatticeTransform, samples: usize, rng: &mut impl Rng) -> TilingCheck {
    let bx = l.fundamental_domain_box();
    let mut overlaps = 0;
    let mut tiling_failures = 0;
    for _ in 0..samples {
        let x: Vec<f64> = bx.iter().map(|&(lo, hi)| rng.gen_range(lo as f64..hi as f64)).collect();
        if l.pieces_containing(&x).len() > 1 {
            overlaps += 1;
        }
        let shifts: Vec<(i64, i64)> = x
            .iter()
            .zip(&bx)
            .map(|(&xi, &(lo, hi))| ((xi - hi as f64).floor() as i64, (xi - lo as f64).ceil() as i64))
            .collect();
        let hits = WindowIter::new(&shifts)
            .filter(|k| {
                let y: Vec<f64> = x.iter().zip(k).map(|(&xi, &ki)| xi - ki as f64).collect();
                l.in_fundamental_domain(&y)
            })
            .count();
        if hits != 1 {
            tiling_failures += 1;
        }
    }
    TilingCheck {
        samples,
        overlaps,
        tiling_failures,
    }
}

/// Integer bounding box of the image of a box under a real linear map.
fn image_box(window: &[(i64, i64)], map: impl Fn(&[f64]) -> Vec<f64>) -> Vec<(i64, i64)> {
    let n = window.len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for corner in WindowIter::new(&vec![(0, 1); n]) {
        let p: Vec<f64> = corner
            .iter()
            .zip(window)
            .map(|(&c, &(a, b))| if c == 0 { a as f64 } else { b as f64 })
            .collect();
        for (i, v) in map(&p).into_iter().enumerate() {
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    lo.iter()
        .zip(&hi)
        .map(|(&l, &h)| ((l - 1e-9).ceil() as i64, (h + 1e-9).floor() as i64))
        .collect()
}

fn check_dim(phi: &DiscreteSymbol, l: &LatticeTransform) -> Result<()> {
    if phi.dim() != l.dim() {
        return Err(Error::DomainMismatch(format!(
            "symbol dimension {} vs matrix dimension {}",
            phi.dim(),
            l.dim()
        )));
    }
    Ok(())
}

/// `psi(n) = phi(Bn)` on the preimage box of `phi`'s window.
pub fn downsample_symbol(phi: &DiscreteSymbol, l: &LatticeTransform) -> Result<DiscreteSymbol> {
    check_dim(phi, l)?;
    let window = image_box(phi.window(), |p| l.apply_b_inv(p));
    if window.iter().any(|&(a, b)| a > b) {
        return DiscreteSymbol::new(vec![(0, 0); l.dim()], vec![C64::new(0.0, 0.0)]);
    }
    DiscreteSymbol::from_fn(window, |n| phi.get(&l.b_int(n)))
}

/// `eta(Bn) = phi(n)`, zero off `B Z^N`.
pub fn upsample_symbol(phi: &DiscreteSymbol, l: &LatticeTransform) -> Result<DiscreteSymbol> {
    check_dim(phi, l)?;
    let window = image_box(phi.window(), |p| l.apply_b(p));
    DiscreteSymbol::from_fn(window, |m| match l.b_preimage(m) {
        Some(n) => phi.get(&n),
        None => C64::new(0.0, 0.0),
    })
}

fn torus_grid(f: &GridFunction, l: &LatticeTransform) -> Result<TorusGrid> {
    match f.domain() {
        Domain::Torus(g) if g.dim() == l.dim() => Ok(g.clone()),
        d => Err(Error::DomainMismatch(format!(
            "lattice operators act on {}-dimensional torus grids, got {}",
            l.dim(),
            d.describe()
        ))),
    }
}

/// `Sf(x) = f(Ax mod 1)`: an index map on the grid, hence exact sampling. A
/// permutation of the grid when `gcd(q, M) = 1`.
pub fn dilate_operator_s(f: &GridFunction, l: &LatticeTransform) -> Result<GridFunction> {
    torus_grid(f, l)?;
    let d = f.domain();
    let values = (0..d.len())
        .map(|i| {
            let m = d.spatial_index(i);
            f.values()[d.spatial_flat_wrapped(&mat_vec(&l.a, &m))]
        })
        .collect();
    GridFunction::new(d.clone(), values)
}

/// `(Sf)^(n) = f^(B^{-1} n)` on `B Z^N`, zero elsewhere. Refuses inputs whose
/// relocated spectrum would leave the band.
pub fn dilate_operator_s_frequency(f: &GridFunction, l: &LatticeTransform) -> Result<GridFunction> {
    torus_grid(f, l)?;
    let c = forward_transform(f);
    let d = c.domain().clone();
    let max = c.coefficients().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut out = Spectrum::zeros(d.clone());
    for (i, &v) in c.coefficients().iter().enumerate() {
        if v.norm() <= 1e-13 * max {
            continue;
        }
        let k = d.freq_index(i);
        let bk = l.b_int(&k);
        match d.freq_flat(&bk) {
            Some(j) => out.coefficients_mut()[j] += v,
            None => {
                return Err(Error::Resolution(format!(
                    "frequency {k:?} maps to {bk:?}, outside the band of {}",
                    d.describe()
                )))
            }
        }
    }
    Ok(inverse_transform(&out))
}

/// `(Wf)^(n) = f^(Bn)`, zero where `Bn` leaves the band.
pub fn average_operator_w(f: &GridFunction, l: &LatticeTransform) -> Result<GridFunction> {
    torus_grid(f, l)?;
    let c = forward_transform(f);
    let d = c.domain().clone();
    let out = Spectrum::from_index_fn(d.clone(), |n| c.at(&l.b_int(n)))?;
    Ok(inverse_transform(&out))
}

/// Nonzero terms `(frequency, coefficient)` of the trigonometric interpolant.
fn sparse_terms(f: &GridFunction) -> Vec<(Vec<f64>, C64)> {
    let c = forward_transform(f);
    let d = c.domain();
    let max = c.coefficients().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let w = d.spectral_weight();
    c.coefficients()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > 1e-14 * max)
        .map(|(i, &v)| (d.frequency(i), v * w))
        .collect()
}

fn eval_terms(terms: &[(Vec<f64>, C64)], x: &[f64]) -> C64 {
    terms
        .iter()
        .map(|(xi, c)| {
            let ph: f64 = xi.iter().zip(x).map(|(a, b)| a * b).sum();
            c * C64::from_polar(1.0, 2.0 * PI * ph)
        })
        .sum()
}

/// The points `A^{-1}(x + k_i)` for grid points `x` and cosets `k_i`, grouped
/// by grid point.
pub fn gamma_points(grid: &TorusGrid, l: &LatticeTransform) -> Vec<Vec<Vec<f64>>> {
    let d: Domain = grid.clone().into();
    (0..d.len())
        .map(|i| {
            let x = d.spatial_point(i);
            l.cosets
                .iter()
                .map(|k| {
                    let p: Vec<f64> = x.iter().zip(k).map(|(&a, &b)| a + b as f64).collect();
                    l.apply_a_inv(&p)
                })
                .collect()
        })
        .collect()
}

/// `Wf(x) = (1/q) sum_i f(A^{-1}(x + k_i))` with `f` read through its
/// trigonometric interpolant.
pub fn average_operator_w_spatial(f: &GridFunction, l: &LatticeTransform) -> Result<GridFunction> {
    let grid = torus_grid(f, l)?;
    let terms = sparse_terms(f);
    let q = l.q as f64;
    let values = gamma_points(&grid, l)
        .iter()
        .map(|pts| pts.iter().map(|y| eval_terms(&terms, y)).sum::<C64>() / q)
        .collect();
    GridFunction::new(f.domain().clone(), values)
}

/// Settings for [`verify_symbol_intertwining`].
#[derive(Clone, Debug)]
pub struct IntertwiningConfig {
    pub trials: usize,
    pub thresholds: usize,
    pub degree: usize,
    pub exponents: Vec<f64>,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for IntertwiningConfig {
    fn default() -> Self {
        Self {
            trials: 50,
            thresholds: 20,
            degree: 3,
            exponents: vec![4.0 / 3.0, 2.0, 4.0],
            seed: 0,
            tolerance: 1e-10,
        }
    }
}

/// Results of the identity battery for one `(phi, A)`.
#[derive(Clone, Debug, Serialize)]
pub struct IntertwiningReport {
    pub matrix: IntMatrix,
    pub q: u64,
    pub grid: usize,
    /// Grid used for the histogram and isometry checks (coprime to `q`).
    pub permutation_grid: usize,
    pub trials: usize,
    /// `max |S T_phi W f - T_eta f| / ||f||_inf`.
    pub s_phi_w_error: f64,
    /// `max |W T_phi S f - T_psi f| / ||f||_inf`.
    pub w_phi_s_error: f64,
    /// `max |W_freq f - W_spatial f| / ||f||_inf`.
    pub w_spatial_error: f64,
    pub histograms_equal: bool,
    pub isometry_error: f64,
    /// `max ||Wf||_p / ||f||_p` on the grid.
    pub w_contraction: f64,
    /// `max ||Wf||_p / ||f||_{p, Gamma}`, at most 1 by Jensen.
    pub w_contraction_gamma: f64,
    /// `max |{|Wf| > t}| / |{|f| > t}|_Gamma` over thresholds; bounded by `q`.
    pub distribution_ratio: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn coprime_grid(m: usize, q: u64) -> usize {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    (m..).find(|&k| gcd(k as u64, q) == 1).expect("coprime size exists")
}

fn relative(a: &GridFunction, b: &GridFunction, scale: f64) -> Result<f64> {
    Ok(a.max_abs_diff(b)? / scale.max(f64::MIN_POSITIVE))
}

fn grid_lp(values: impl Iterator<Item = f64>, p: f64, weight: f64) -> f64 {
    (values.map(|v| v.powf(p)).sum::<f64>() * weight).powf(1.0 / p)
}

/// Runs the identities `S T_phi W = T_eta`, `W T_phi S = T_psi`, the exact
/// histogram and isometry properties of `S`, the contraction of `W` and the
/// distribution bound of `W` on random trigonometric polynomials.
pub fn verify_symbol_intertwining(
    phi: &DiscreteSymbol,
    l: &LatticeTransform,
    grid: &TorusGrid,
    cfg: &IntertwiningConfig,
) -> Result<IntertwiningReport> {
    check_dim(phi, l)?;
    if grid.dim() != l.dim() {
        return Err(Error::DomainMismatch("grid and matrix dimensions differ".into()));
    }
    let eta = upsample_symbol(phi, l)?;
    let psi = downsample_symbol(phi, l)?;
    let d: Domain = grid.clone().into();
    let (lo, hi) = d.freq_index_range();
    let b_norm: i64 = l.b.iter().map(|r| r.iter().map(|v| v.abs()).sum::<i64>()).max().unwrap_or(1);
    let reach = cfg.degree as i64 * b_norm;
    if reach > hi || -reach < lo {
        return Err(Error::Resolution(format!(
            "degree {} dilated by B reaches {reach}, outside band [{lo}, {hi}]",
            cfg.degree
        )));
    }
    crate::multiplier::check_symbol_fits(&eta, grid)?;

    let pgrid = TorusGrid::new(grid.dim(), coprime_grid(grid.points_per_dim(), l.q))?;
    let pd: Domain = pgrid.clone().into();
    let gamma = gamma_points(grid, l);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut e13, mut e14, mut ews, mut iso) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut contraction, mut contraction_gamma, mut dist) = (0.0f64, 0.0f64, 0.0f64);
    let mut histograms_equal = true;

    for _ in 0..cfg.trials {
        let f = random_trig_poly(&d, cfg.degree, &mut rng)?;
        let scale = f.sup_norm();

        let lhs = dilate_operator_s(&apply_discrete_symbol(phi, &average_operator_w(&f, l)?)?, l)?;
        e13 = e13.max(relative(&lhs, &apply_discrete_symbol(&eta, &f)?, scale)?);
        let lhs = average_operator_w(&apply_discrete_symbol(phi, &dilate_operator_s(&f, l)?)?, l)?;
        e14 = e14.max(relative(&lhs, &apply_discrete_symbol(&psi, &f)?, scale)?);

        let wf = average_operator_w(&f, l)?;
        ews = ews.max(relative(&wf, &average_operator_w_spatial(&f, l)?, scale)?);

        // histograms and isometry on a grid where S permutes points
        let g = GridFunction::new(
            pd.clone(),
            (0..pd.len())
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )?;
        let sg = dilate_operator_s(&g, l)?;
        if sg.sorted_magnitudes() != g.sorted_magnitudes() {
            histograms_equal = false;
        }

        let terms = sparse_terms(&f);
        let on_gamma: Vec<f64> = gamma
            .iter()
            .flat_map(|pts| pts.iter().map(|y| eval_terms(&terms, y).norm()))
            .collect();
        let gw = 1.0 / on_gamma.len() as f64;
        for &p in &cfg.exponents {
            let a = sg.lp_norm(p);
            let b = g.lp_norm(p);
            iso = iso.max((a - b).abs() / b);
            let wp = wf.lp_norm(p);
            contraction = contraction.max(wp / f.lp_norm(p));
            contraction_gamma = contraction_gamma.max(wp / grid_lp(on_gamma.iter().copied(), p, gw));
        }

        let wmag: Vec<f64> = wf.values().iter().map(|v| v.norm()).collect();
        let wmax = wmag.iter().copied().fold(0.0, f64::max);
        for j in 0..cfg.thresholds {
            let t = wmax * j as f64 / cfg.thresholds as f64;
            let lhs = wmag.iter().filter(|&&v| v > t).count() as f64 / wmag.len() as f64;
            let rhs = on_gamma.iter().filter(|&&v| v > t).count() as f64 * gw;
            let ratio = if lhs == 0.0 { 0.0 } else if rhs == 0.0 { f64::INFINITY } else { lhs / rhs };
            dist = dist.max(ratio);
        }
    }

    let tol = cfg.tolerance;
    let passed = e13 <= tol
        && e14 <= tol
        && ews <= tol
        && histograms_equal
        && iso <= 1e-12
        && contraction <= 1.0 + 1e-12
        && contraction_gamma <= 1.0 + 1e-12
        && dist <= l.q as f64;
    Ok(IntertwiningReport {
        matrix: l.a.clone(),
        q: l.q,
        grid: grid.points_per_dim(),
        permutation_grid: pgrid.points_per_dim(),
        trials: cfg.trials,
        s_phi_w_error: e13,
        w_phi_s_error: e14,
        w_spatial_error: ews,
        histograms_equal,
        isometry_error: iso,
        w_contraction: contraction,
        w_contraction_gamma: contraction_gamma,
        distribution_ratio: dist,
        tolerance: tol,
        passed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompositionReport {
    pub direction: Direction,
    pub points: usize,
    pub terms: usize,
    pub max_error: f64,
}

fn b_matrix_f(l: &LatticeTransform) -> Vec<Vec<f64>> {
    l.b.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect()
}

fn b_inv_matrix_f(l: &LatticeTransform) -> Vec<Vec<f64>> {
    l.adj_b
        .iter()
        .map(|r| r.iter().map(|&v| v as f64 / l.det as f64).collect())
        .collect()
}

/// `Lambda o B` (forward) or `Lambda o B^{-1}` (inverse).
pub fn compose_kernel(kernel: &KernelSpec, l: &LatticeTransform, direction: Direction) -> Result<KernelSpec> {
    let m = match direction {
        Direction::Forward => b_matrix_f(l),
        Direction::Inverse => b_inv_matrix_f(l),
    };
    KernelSpec::affine(kernel.clone(), m, vec![0.0; l.dim()])
}

/// `psi_j(m) = phi(Bm + p)` on the preimage box.
fn shifted_downsample(phi: &DiscreteSymbol, l: &LatticeTransform, p: &[i64]) -> Result<DiscreteSymbol> {
    let window: Vec<(i64, i64)> = phi
        .window()
        .iter()
        .zip(p)
        .map(|(&(a, b), &pi)| (a - pi, b - pi))
        .collect();
    let window = image_box(&window, |x| l.apply_b_inv(x));
    if window.iter().any(|&(a, b)| a > b) {
        return DiscreteSymbol::new(vec![(0, 0); l.dim()], vec![C64::new(0.0, 0.0)]);
    }
    DiscreteSymbol::from_fn(window, |m| {
        let bm = l.b_int(m);
        let n: Vec<i64> = bm.iter().zip(p).map(|(a, b)| a + b).collect();
        phi.get(&n)
    })
}

/// Checks `W_{phi, Lambda o B}(xi) = W_{eta, Lambda}(B xi)` (forward) or
/// `W_{phi, Lambda o B^{-1}}(xi) = sum_j W_{psi_j, Lambda}(B^{-1} xi - B^{-1} p_j)`
/// with `psi_j(m) = phi(Bm + p_j)` and `p_j` over `Z^N / B Z^N` (inverse).
pub fn compose_kernel_with_lattice(
    kernel: &KernelSpec,
    l: &LatticeTransform,
    direction: Direction,
    phi: &DiscreteSymbol,
    points: &[Vec<f64>],
) -> Result<CompositionReport> {
    check_dim(phi, l)?;
    if kernel.dim() != l.dim() {
        return Err(Error::DomainMismatch("kernel and matrix dimensions differ".into()));
    }
    let composed = compose_kernel(kernel, l, direction)?;
    let mut max_error = 0.0f64;
    let terms;
    match direction {
        Direction::Forward => {
            let eta = upsample_symbol(phi, l)?;
            terms = 1;
            for xi in points {
                let lhs = periodize_at(phi, &composed, xi);
                let rhs = periodize_at(&eta, kernel, &l.apply_b(xi));
                max_error = max_error.max((lhs - rhs).norm());
            }
        }
        Direction::Inverse => {
            let bt = coset_representatives(&l.b)?;
            let parts: Vec<(Vec<f64>, DiscreteSymbol)> = bt
                .cosets()
                .iter()
                .map(|p| {
                    let pf: Vec<f64> = p.iter().map(|&v| v as f64).collect();
                    Ok((l.apply_b_inv(&pf), shifted_downsample(phi, l, p)?))
                })
                .collect::<Result<_>>()?;
            terms = parts.len();
            for xi in points {
                let lhs = periodize_at(phi, &composed, xi);
                let bx = l.apply_b_inv(xi);
                let rhs: C64 = parts
                    .iter()
                    .map(|(shift, psi)| {
                        let y: Vec<f64> = bx.iter().zip(shift).map(|(a, b)| a - b).collect();
                        periodize_at(psi, kernel, &y)
                    })
                    .sum();
                max_error = max_error.max((lhs - rhs).norm());
            }
        }
    }
    Ok(CompositionReport {
        direction,
        points: points.len(),
        terms,
        max_error,
    })
}

/// `Lambda'(xi) = Lambda(4M(xi - 1/2))`, which maps `supp Lambda` inside
/// `[-M, M]^N` into `[1/4, 3/4]^N`.
pub fn reduce_support_affine(kernel: &KernelSpec, m: f64) -> Result<KernelSpec> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Invalid(format!("M must be positive, got {m}")));
    }
    if !kernel.support_within(&vec![(-m, m); kernel.dim()]) {
        return Err(Error::Support(format!(
            "support {:?} exceeds [-{m}, {m}]^{}",
            kernel.support(),
            kernel.dim()
        )));
    }
    KernelSpec::scaled(kernel.clone(), 4.0 * m, vec![0.5; kernel.dim()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> IntMatrix {
        loop {
            let a: IntMatrix = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-3..=3)).collect()).collect();
            let d = int_det(&a).abs();
            if (1..=12).contains(&d) {
                return a;
            }
        }
    }

    #[test]
    fn coset_examples() {
        let l = coset_representatives(&[vec![2, 0], vec![0, 2]]).unwrap();
        assert_eq!(l.q(), 4);
        assert_eq!(l.cosets(), &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let l = coset_representatives(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]).unwrap();
        assert_eq!(l.cosets(), &[vec![0, 0, 0]]);
        let l = coset_representatives(&[vec![1, 1], vec![0, 2]]).unwrap();
        assert_eq!(l.cosets(), &[vec![0, 0], vec![0, 1]]);
        assert!(matches!(coset_representatives(&[vec![1, 2], vec![2, 4]]), Err(Error::SingularMatrix)));
        assert!(parse_matrix("1,2;3").is_err());
        assert_eq!(parse_matrix("1, 1; 0, 2").unwrap(), vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn adjugate_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=4 {
            for _ in 0..20 {
                let a = random_matrix(n, &mut rng);
                let adj = int_adjugate(&a);
                let d = int_det(&a) as i64;
                for i in 0..n {
                    for j in 0..n {
                        let v: i64 = (0..n).map(|k| adj[i][k] * a[k][j]).sum();
                        assert_eq!(v, if i == j { d } else { 0 });
                    }
                }
            }
        }
    }

    #[test]
    fn coset_count_and_incongruence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [2, 3] {
            for _ in 0..25 {
                let a = random_matrix(n, &mut rng);
                let l = coset_representatives(&a).unwrap();
                assert_eq!(l.cosets().len() as i128, int_det(&a).abs());
                for (i, u) in l.cosets().iter().enumerate() {
                    for v in &l.cosets()[i + 1..] {
                        assert!(!l.congruent(u, v));
                    }
                }
                // every small vector falls in exactly one class
                for v in WindowIter::new(&vec![(-3, 3); n]) {
                    let hits = l.cosets().iter().filter(|r| l.congruent(&v, r)).count();
                    assert_eq!(hits, 1);
                }
            }
        }
    }

    #[test]
    fn fundamental_domain_measure_and_tiling() {
        let l = coset_representatives(&[vec![2]]).unwrap();
        assert!(l.in_fundamental_domain(&[0.0]) && l.in_fundamental_domain(&[0.75]));
        assert!(!l.in_fundamental_domain(&[1.0]) && !l.in_fundamental_domain(&[-0.1]));
        assert_eq!(l.measure_of_q(100).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3] {
            for _ in 0..10 {
                let l = coset_representatives(&random_matrix(n, &mut rng)).unwrap();
                let k = l.density_for_samples(20_000);
                assert!((l.measure_of_q(k).unwrap() - 1.0).abs() < 2e-3);
                let t = check_tiling(&l, 300, &mut rng);
                assert_eq!((t.overlaps, t.tiling_failures), (0, 0));
            }
        }
    }

    #[test]
    fn symbol_resampling_examples() {
        let two = coset_representatives(&[vec![2]]).unwrap();
        let phi = DiscreteSymbol::from_fn(vec![(-8, 8)], |n| C64::new(n[0] as f64, 0.0)).unwrap();
        let psi = downsample_symbol(&phi, &two).unwrap();
        assert_eq!(psi.window(), &[(-4, 4)]);
        for n in -4..=4 {
            assert_eq!(psi.get(&[n]), C64::new(2.0 * n as f64, 0.0));
        }
        assert!(psi.sup_norm() <= phi.sup_norm());

        let one_two = DiscreteSymbol::from_fn(vec![(0, 1)], |_| C64::new(1.0, 0.0)).unwrap();
        let eta = upsample_symbol(&one_two, &two).unwrap();
        assert_eq!(eta.get(&[0]), C64::new(1.0, 0.0));
        assert_eq!(eta.get(&[1]), C64::new(0.0, 0.0));
        assert_eq!(eta.get(&[2]), C64::new(1.0, 0.0));

        let l = coset_representatives(&[vec![1, 1], vec![0, 2]]).unwrap();
        let d2 = DiscreteSymbol::delta(2);
        assert_eq!(upsample_symbol(&d2, &l).unwrap().get(&[0, 0]), C64::new(1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = DiscreteSymbol::from_fn(vec![(-3, 3); 2], |_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).unwrap();
        let back = downsample_symbol(&upsample_symbol(&phi, &l).unwrap(), &l).unwrap();
        for (n, v) in phi.iter() {
            assert_eq!(back.get(&n), v);
        }
    }

    #[test]
    fn s_and_w_examples() {
        let two = coset_representatives(&[vec![2]]).unwrap();
        let d: Domain = TorusGrid::new(1, 16).unwrap().into();
        let e = |k: f64| GridFunction::from_fn(d.clone(), move |x| C64::from_polar(1.0, 2.0 * PI * k * x[0])).unwrap();
        let s = dilate_operator_s(&e(1.0), &two).unwrap();
        assert!(s.max_abs_diff(&e(2.0)).unwrap() < 1e-14);
        let sf = dilate_operator_s_frequency(&e(1.0), &two).unwrap();
        assert!(sf.max_abs_diff(&e(2.0)).unwrap() < 1e-13);
        assert!(dilate_operator_s_frequency(&e(5.0), &two).is_err());

        let one = GridFunction::from_fn(d.clone(), |_| C64::new(1.0, 0.0)).unwrap();
        assert!(average_operator_w(&one, &two).unwrap().max_abs_diff(&one).unwrap() < 1e-14);
        assert!(average_operator_w(&e(2.0), &two).unwrap().max_abs_diff(&e(1.0)).unwrap() < 1e-13);
        assert!(average_operator_w(&e(1.0), &two).unwrap().sup_norm() < 1e-13);
        assert!(average_operator_w_spatial(&e(1.0), &two).unwrap().sup_norm() < 1e-13);
        assert!(average_operator_w_spatial(&e(2.0), &two).unwrap().max_abs_diff(&e(1.0)).unwrap() < 1e-13);
    }

    #[test]
    fn intertwining_battery() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = TorusGrid::new(2, 24).unwrap();
        for a in [vec![vec![2, 0], vec![0, 2]], vec![vec![1, 1], vec![0, 2]]] {
            let l = coset_representatives(&a).unwrap();
            let phi = DiscreteSymbol::from_fn(vec![(-2, 2); 2], |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap();
            let cfg = IntertwiningConfig { trials: 8, seed: 9, ..Default::default() };
            let r = verify_symbol_intertwining(&phi, &l, &grid, &cfg).unwrap();
            assert!(r.passed, "{r:?}");
            assert_eq!(r.permutation_grid, 25);
        }
        let l = coset_representatives(&[vec![2]]).unwrap();
        let r = verify_symbol_intertwining(&DiscreteSymbol::delta(1), &l, &TorusGrid::new(1, 32).unwrap(), &IntertwiningConfig::default()).unwrap();
        assert!(r.passed && r.s_phi_w_error < 1e-14);
    }

    #[test]
    fn composition_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let tri = KernelSpec::triangle(1);
        let two = coset_representatives(&[vec![2]]).unwrap();
        let pts: Vec<Vec<f64>> = (0..400).map(|i| vec![-8.0 + 0.04 * i as f64 + 0.001]).collect();
        let delta = DiscreteSymbol::delta(1);
        let r = compose_kernel_with_lattice(&tri, &two, Direction::Forward, &delta, &pts).unwrap();
        assert!(r.max_error < 1e-12);
        for x in &pts {
            let lhs = periodize_at(&delta, &compose_kernel(&tri, &two, Direction::Forward).unwrap(), x);
            assert!((lhs.re - triangle_of(2.0 * x[0])).abs() < 1e-12);
        }
        let phi = DiscreteSymbol::from_fn(vec![(-6, 6)], |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap();
        for dir in [Direction::Forward, Direction::Inverse] {
            let r = compose_kernel_with_lattice(&tri, &two, dir, &phi, &pts).unwrap();
            assert!(r.max_error < 1e-12, "{r:?}");
        }
        let id = coset_representatives(&[vec![1]]).unwrap();
        let r = compose_kernel_with_lattice(&tri, &id, Direction::Inverse, &phi, &pts).unwrap();
        assert_eq!(r.terms, 1);
        assert!(r.max_error < 1e-14);

        let l = coset_representatives(&[vec![1, 1], vec![0, 2]]).unwrap();
        let phi2 = DiscreteSymbol::from_fn(vec![(-3, 3); 2], |_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).unwrap();
        let pts2: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]).collect();
        for dir in [Direction::Forward, Direction::Inverse] {
            let r = compose_kernel_with_lattice(&KernelSpec::triangle(2), &l, dir, &phi2, &pts2).unwrap();
            assert!(r.max_error < 1e-12, "{r:?}");
        }
    }

    fn triangle_of(x: f64) -> f64 {
        (1.0 - x.abs()).max(0.0)
    }

    #[test]
    fn reduce_support_examples() {
        let r = reduce_support_affine(&KernelSpec::triangle(1), 1.0).unwrap();
        assert_eq!(r.support(), &[(0.25, 0.75)]);
        assert_eq!(r.evaluate(&[0.5]).re, 1.0);
        assert_eq!(r.evaluate(&[0.25]).re, 0.0);
        assert_eq!(r.evaluate(&[0.75]).re, 0.0);
        for i in 0..100 {
            let x = i as f64 / 100.0;
            assert!((r.evaluate(&[x]).re - triangle_of(4.0 * x - 2.0)).abs() < 1e-15);
        }
        let ind = KernelSpec::indicator(vec![-2.0], vec![1.0]).unwrap();
        let r = reduce_support_affine(&ind, 2.0).unwrap();
        let (a, b) = r.support()[0];
        assert!((a - 0.25).abs() < 1e-12 && (b - 0.625).abs() < 1e-12);
        assert!(matches!(reduce_support_affine(&ind, 1.0), Err(Error::Support(_))));
    }
}
