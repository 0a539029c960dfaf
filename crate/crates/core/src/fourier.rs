//! Discrete Fourier transforms on both domain types, periodic convolution,
//! Fejér kernels, and symbol/trigonometric-polynomial conversion.
//!
//! Conventions: `c(xi) = w_x * sum_x f(x) e^{-2 pi i xi.x}` and
//! `f(x) = w_xi * sum_xi c(xi) e^{2 pi i xi.x}`, where `w_x` is the spatial
//! cell weight and `w_xi` the spectral one. On a torus `w_xi = 1`, so a
//! trigonometric polynomial of degree below `M/2` has exact coefficients.

use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{DiscreteSymbol, Domain, GridFunction, Spectrum, TorusGrid, C64};

/// Multi-dimensional in-place FFT over a row-major cube of side `side`.
fn fft_nd(data: &mut [C64], dim: usize, side: usize, fft: &Arc<dyn Fft<f64>>) {
    let len = data.len();
    let mut line = vec![C64::new(0.0, 0.0); side];
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..dim {
        let stride = side.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(side) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * side;
        for outer in (0..len).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

/// Maps each storage position `i` (index `offset + i`) to its natural FFT slot
/// `(offset + i) mod side`, for every flat index.
fn natural_positions(domain: &Domain, offset: i64) -> Vec<usize> {
    let side = domain.side() as i64;
    let per_axis: Vec<usize> = (0..side)
        .map(|i| (offset + i).rem_euclid(side) as usize)
        .collect();
    (0..domain.len())
        .map(|flat| {
            domain
                .unflatten(flat)
                .iter()
                .fold(0usize, |acc, &p| acc * side as usize + per_axis[p])
        })
        .collect()
}

fn transform(domain: &Domain, input: &[C64], inverse: bool) -> Vec<C64> {
    let (in_off, out_off, weight) = if inverse {
        (
            domain.freq_offset(),
            domain.spatial_offset(),
            domain.spectral_weight(),
        )
    } else {
        (
            domain.spatial_offset(),
            domain.freq_offset(),
            domain.spatial_weight(),
        )
    };
    let in_pos = natural_positions(domain, in_off);
    let out_pos = natural_positions(domain, out_off);
    let mut work = vec![C64::new(0.0, 0.0); input.len()];
    for (v, &p) in input.iter().zip(&in_pos) {
        work[p] = *v;
    }
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(domain.side())
    } else {
        planner.plan_fft_forward(domain.side())
    };
    fft_nd(&mut work, domain.dim(), domain.side(), &fft);
    out_pos.iter().map(|&p| work[p] * weight).collect()
}

pub fn forward_transform(f: &GridFunction) -> Spectrum {
    let c = transform(f.domain(), f.values(), false);
    Spectrum::new(f.domain().clone(), c).expect("transform preserves length")
}

pub fn inverse_transform(c: &Spectrum) -> GridFunction {
    let v = transform(c.domain(), c.coefficients(), true);
    GridFunction::new(c.domain().clone(), v).expect("transform preserves length")
}

/// Multiplies the spectrum of `f` by `m(k, xi)` and transforms back.
pub fn apply_multiplier(f: &GridFunction, m: impl Fn(&[i64], &[f64]) -> C64) -> GridFunction {
    inverse_transform(&forward_transform(f).multiply_by(m))
}

/// `(k * f)(x) = sum_y k(y) f(x - y) * cell_volume`, computed through the
/// convolution theorem.
pub fn convolve_periodic(k: &GridFunction, f: &GridFunction) -> Result<GridFunction> {
    if !k.domain().is_torus() {
        return Err(Error::DomainMismatch("periodic convolution needs a torus grid".into()));
    }
    k.same_domain(f)?;
    let kh = forward_transform(k);
    let mut fh = forward_transform(f);
    for (a, b) in fh.coefficients_mut().iter_mut().zip(kh.coefficients()) {
        *a *= b;
    }
    Ok(inverse_transform(&fh))
}

/// Fejér weight `prod_i max(1 - |n_i|/(j+1), 0)`.
pub fn fejer_weight(j: usize, n: &[i64]) -> f64 {
    let denom = (j + 1) as f64;
    n.iter()
        .map(|&k| (1.0 - k.unsigned_abs() as f64 / denom).max(0.0))
        .product()
}

/// The `j`-th Fejér kernel sampled on `grid`.
pub fn fejer_kernel(j: usize, grid: &TorusGrid) -> Result<GridFunction> {
    if grid.points_per_dim() <= 2 * j {
        return Err(Error::Resolution(format!(
            "Fejér kernel of order {j} needs M > {}, got M = {}",
            2 * j,
            grid.points_per_dim()
        )));
    }
    let spec = Spectrum::from_index_fn(grid.clone().into(), |n| C64::new(fejer_weight(j, n), 0.0))?;
    Ok(inverse_transform(&spec))
}

/// `k(u) = sum_n phi(n) e^{2 pi i u.n}`, so that the torus coefficients of `k`
/// are exactly `phi`.
pub fn symbol_to_kernel(phi: &DiscreteSymbol, grid: &TorusGrid) -> Result<GridFunction> {
    if phi.dim() != grid.dim() {
        return Err(Error::DomainMismatch(format!(
            "symbol dimension {} vs grid dimension {}",
            phi.dim(),
            grid.dim()
        )));
    }
    let reach = phi.max_abs_coord();
    if grid.points_per_dim() as i64 <= 2 * reach {
        return Err(Error::Resolution(format!(
            "symbol window reaches |n| = {reach}; grid needs M > {}",
            2 * reach
        )));
    }
    let spec = Spectrum::from_index_fn(grid.clone().into(), |n| phi.get(n))?;
    Ok(inverse_transform(&spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LineModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_function(domain: &Domain, rng: &mut ChaCha8Rng) -> GridFunction {
        let v = (0..domain.len())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        GridFunction::new(domain.clone(), v).unwrap()
    }

    /// Direct O(n^2) evaluation of the forward transform.
    fn direct_forward(f: &GridFunction) -> Vec<C64> {
        let d = f.domain();
        let w = d.spatial_weight();
        (0..d.len())
            .map(|k| {
                let xi = d.frequency(k);
                let mut acc = C64::new(0.0, 0.0);
                for (i, v) in f.values().iter().enumerate() {
                    let x = d.spatial_point(i);
                    let ph: f64 = xi.iter().zip(&x).map(|(a, b)| a * b).sum();
                    acc += v * C64::from_polar(1.0, -2.0 * PI * ph);
                }
                acc * w
            })
            .collect()
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn single_exponential_has_one_coefficient() {
        let d: Domain = TorusGrid::new(1, 8).unwrap().into();
        let f = GridFunction::from_fn(d.clone(), |x| C64::from_polar(1.0, 2.0 * PI * x[0])).unwrap();
        let c = forward_transform(&f);
        for i in 0..8 {
            let n = d.freq_index(i)[0];
            let expect = if n == 1 { 1.0 } else { 0.0 };
            assert!((c.coefficients()[i] - C64::new(expect, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let d: Domain = TorusGrid::new(1, 8).unwrap().into();
        let mut v = vec![C64::new(0.0, 0.0); 8];
        v[0] = C64::new(1.0, 0.0);
        let c = forward_transform(&GridFunction::new(d, v).unwrap());
        for x in c.coefficients() {
            assert!((x - C64::new(0.125, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_direct_sum_on_both_domains() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let domains: Vec<Domain> = vec![
            TorusGrid::new(1, 12).unwrap().into(),
            TorusGrid::new(2, 6).unwrap().into(),
            LineModel::new(1, 4, 10).unwrap().into(),
            LineModel::new(2, 2, 6).unwrap().into(),
        ];
        for d in domains {
            let f = random_function(&d, &mut rng);
            let fast = forward_transform(&f);
            let slow = direct_forward(&f);
            assert!(max_diff(fast.coefficients(), &slow) < 1e-12, "{}", d.describe());
        }
    }

    #[test]
    fn parseval_and_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let domains: Vec<Domain> = vec![
            TorusGrid::new(1, 32).unwrap().into(),
            TorusGrid::new(2, 9).unwrap().into(),
            LineModel::new(1, 8, 64).unwrap().into(),
        ];
        for d in &domains {
            for _ in 0..100 {
                let f = random_function(d, &mut rng);
                let c = forward_transform(&f);
                let lhs: f64 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * d.spatial_weight();
                let rhs: f64 = c.coefficients().iter().map(|v| v.norm_sqr()).sum::<f64>() * d.spectral_weight();
                assert!((lhs - rhs).abs() <= 1e-12 * lhs);
                let back = inverse_transform(&c);
                assert!(back.max_abs_diff(&f).unwrap() <= 1e-12 * f.sup_norm());
            }
        }
    }

    #[test]
    fn inverse_of_unit_coefficient_is_constant() {
        let d: Domain = TorusGrid::new(2, 4).unwrap().into();
        let c = Spectrum::from_index_fn(d, |n| {
            if n.iter().all(|&k| k == 0) {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .unwrap();
        for v in inverse_transform(&c).values() {
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn inverse_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d: Domain = TorusGrid::new(1, 16).unwrap().into();
        let c1 = forward_transform(&random_function(&d, &mut rng));
        let c2 = forward_transform(&random_function(&d, &mut rng));
        let (a, b) = (C64::new(0.3, -1.2), C64::new(2.0, 0.5));
        let combo = Spectrum::new(
            d.clone(),
            c1.coefficients()
                .iter()
                .zip(c2.coefficients())
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
        .unwrap();
        let lhs = inverse_transform(&combo);
        let rhs = inverse_transform(&c1).scale(a).add(&inverse_transform(&c2).scale(b)).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn convolution_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = TorusGrid::new(1, 16).unwrap();
        let d: Domain = g.clone().into();
        let f = random_function(&d, &mut rng);

        let mut delta = vec![C64::new(0.0, 0.0); 16];
        delta[0] = C64::new(16.0, 0.0);
        let k = GridFunction::new(d.clone(), delta).unwrap();
        assert!(convolve_periodic(&k, &f).unwrap().max_abs_diff(&f).unwrap() < 1e-12);

        let one = GridFunction::new(d.clone(), vec![C64::new(1.0, 0.0); 16]).unwrap();
        let mean: C64 = f.values().iter().sum::<C64>() / 16.0;
        for v in convolve_periodic(&one, &f).unwrap().values() {
            assert!((v - mean).norm() < 1e-12);
        }

        let other: Domain = TorusGrid::new(1, 8).unwrap().into();
        assert!(convolve_periodic(&random_function(&other, &mut rng), &f).is_err());
    }

    #[test]
    fn convolution_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = TorusGrid::new(2, 6).unwrap();
        let d: Domain = g.clone().into();
        let k = random_function(&d, &mut rng);
        let f = random_function(&d, &mut rng);
        let fast = convolve_periodic(&k, &f).unwrap();
        let m = 6i64;
        for x in 0..d.len() {
            let xi = d.spatial_index(x);
            let mut acc = C64::new(0.0, 0.0);
            for y in 0..d.len() {
                let yi = d.spatial_index(y);
                let diff: Vec<i64> = xi.iter().zip(&yi).map(|(a, b)| (a - b).rem_euclid(m)).collect();
                acc += k.values()[y] * f.values()[d.spatial_flat_wrapped(&diff)];
            }
            acc *= g.cell_volume();
            assert!((fast.values()[x] - acc).norm() < 1e-10);
        }
    }

    #[test]
    fn fejer_kernel_properties() {
        let g = TorusGrid::new(1, 8).unwrap();
        let k1 = fejer_kernel(1, &g).unwrap();
        assert!((k1.values()[0] - C64::new(2.0, 0.0)).norm() < 1e-14);
        let c = forward_transform(&k1);
        assert!((c.at(&[1]).re - 0.5).abs() < 1e-15 && (c.at(&[-1]).re - 0.5).abs() < 1e-15);

        let k0 = fejer_kernel(0, &g).unwrap();
        for v in k0.values() {
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-15);
        }

        for (dim, m) in [(1, 64), (2, 16)] {
            let g = TorusGrid::new(dim, m).unwrap();
            for j in 0..(m / 2) {
                let k = fejer_kernel(j, &g).unwrap();
                let min = k.values().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
                assert!(min >= -1e-12);
                let mean: f64 = k.values().iter().map(|v| v.re).sum::<f64>() * g.cell_volume();
                assert!((mean - 1.0).abs() < 1e-12);
                assert!(k.values().iter().all(|v| v.im.abs() < 1e-12));
            }
        }
        assert!(fejer_kernel(4, &g).is_err());
    }

    #[test]
    fn fejer_convolution_is_coefficient_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = TorusGrid::new(2, 12).unwrap();
        let d: Domain = g.clone().into();
        let f = random_function(&d, &mut rng);
        let k = fejer_kernel(3, &g).unwrap();
        let lhs = forward_transform(&convolve_periodic(&k, &f).unwrap());
        let fh = forward_transform(&f);
        for i in 0..d.len() {
            let n = d.freq_index(i);
            let expect = fh.coefficients()[i] * fejer_weight(3, &n);
            assert!((lhs.coefficients()[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn symbol_kernel_roundtrip() {
        let g = TorusGrid::new(1, 8).unwrap();
        let k = symbol_to_kernel(&DiscreteSymbol::delta(1), &g).unwrap();
        for v in k.values() {
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let phi = DiscreteSymbol::new(vec![(1, 1)], vec![C64::new(1.0, 0.0)]).unwrap();
        let k = symbol_to_kernel(&phi, &g).unwrap();
        let expect = GridFunction::from_fn(g.clone().into(), |x| C64::from_polar(1.0, 2.0 * PI * x[0])).unwrap();
        assert!(k.max_abs_diff(&expect).unwrap() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g2 = TorusGrid::new(2, 13).unwrap();
        let phi = DiscreteSymbol::from_fn(vec![(-6, 6), (-3, 5)], |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .unwrap();
        let c = forward_transform(&symbol_to_kernel(&phi, &g2).unwrap());
        let d: Domain = g2.into();
        for i in 0..d.len() {
            let n = d.freq_index(i);
            assert!((c.coefficients()[i] - phi.get(&n)).norm() < 1e-12);
        }
        assert!(symbol_to_kernel(&phi, &TorusGrid::new(2, 12).unwrap()).is_err());
    }
}
