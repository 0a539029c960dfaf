//! Deterministic seeded test corpora for operator-norm estimation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fourier::inverse_transform;
use crate::grid::{Domain, GridFunction, Spectrum, C64};

/// Derives an independent seed for a named sub-stream of `seed`.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn rng_for(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, name))
}

/// Trigonometric polynomial with independent uniform complex coefficients on
/// `|n_i| <= degree` (clipped to the band).
pub fn random_trig_poly(domain: &Domain, degree: usize, rng: &mut impl Rng) -> Result<GridFunction> {
    let (lo, hi) = domain.freq_index_range();
    let deg = degree as i64;
    let coeffs: Vec<C64> = (0..domain.len())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let spec = Spectrum::from_index_fn(domain.clone(), |k| {
        if k.iter().all(|&n| n.abs() <= deg && n >= lo && n <= hi) {
            coeffs[domain.freq_flat(k).expect("index in band")] / C64::new(domain.spectral_weight(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })?;
    Ok(inverse_transform(&spec))
}

/// Family sizes and parameters of a corpus; every family draws from its own
/// derived seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    /// Indicators of random unions of grid cells.
    pub indicators: usize,
    /// Random `+-1`-coefficient trigonometric polynomials.
    pub trig_polys: usize,
    /// Maximal per-axis frequency index of the trigonometric polynomials.
    pub trig_degree: usize,
    /// Discretized Gaussian bumps.
    pub gaussians: usize,
    /// Single-frequency exponentials.
    pub exponentials: usize,
}

impl CorpusSpec {
    pub fn standard(seed: u64) -> Self {
        Self {
            seed,
            indicators: 4,
            trig_polys: 4,
            trig_degree: 6,
            gaussians: 3,
            exponentials: 3,
        }
    }

    pub fn size(&self) -> usize {
        self.indicators + self.trig_polys + self.gaussians + self.exponentials
    }

    /// Hash of the spec together with the domain it is generated on.
    pub fn id(&self, domain: &Domain) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("spec serializes"));
        h.update(domain.describe().as_bytes());
        h.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn generate(&self, domain: &Domain) -> Result<Corpus> {
        if self.size() == 0 {
            return Err(Error::Empty("corpus"));
        }
        let mut functions = Vec::with_capacity(self.size());

        let mut rng = rng_for(self.seed, "indicators");
        for i in 0..self.indicators {
            let density = rng.gen_range(0.05..0.5);
            let mut v: Vec<C64> = (0..domain.len())
                .map(|_| C64::new(if rng.gen_bool(density) { 1.0 } else { 0.0 }, 0.0))
                .collect();
            let forced = rng.gen_range(0..domain.len());
            v[forced] = C64::new(1.0, 0.0);
            functions.push((format!("indicator-{i}"), GridFunction::new(domain.clone(), v)?));
        }

        let mut rng = rng_for(self.seed, "trig_polys");
        let (lo, hi) = domain.freq_index_range();
        let deg = self.trig_degree as i64;
        for i in 0..self.trig_polys {
            let signs: Vec<f64> = (0..domain.len())
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            let spec = Spectrum::from_index_fn(domain.clone(), |k| {
                if k.iter().all(|&n| n.abs() <= deg && n >= lo && n <= hi) {
                    let flat = domain.freq_flat(k).expect("index in band");
                    C64::new(signs[flat], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })?;
            let mut f = inverse_transform(&spec);
            // normalize away the spectral weight so values are O(1)
            let s = f.sup_norm();
            if s > 0.0 {
                f = f.scale(C64::new(1.0 / s, 0.0));
            }
            functions.push((format!("trig-{i}"), f));
        }

        let mut rng = rng_for(self.seed, "gaussians");
        let extent = domain.side() as f64 * domain.spatial_step();
        for i in 0..self.gaussians {
            let center: Vec<f64> = (0..domain.dim())
                .map(|_| {
                    let m = rng.gen_range(0..domain.side()) as i64 + domain.spatial_offset();
                    m as f64 * domain.spatial_step()
                })
                .collect();
            let width = rng.gen_range(0.02..0.15) * extent;
            let f = GridFunction::from_fn(domain.clone(), |x| {
                let r2: f64 = x
                    .iter()
                    .zip(&center)
                    .map(|(a, c)| {
                        let d = (a - c).rem_euclid(extent);
                        let d = d.min(extent - d);
                        d * d
                    })
                    .sum();
                C64::new((-r2 / (2.0 * width * width)).exp(), 0.0)
            })?;
            functions.push((format!("gaussian-{i}"), f));
        }

        let mut rng = rng_for(self.seed, "exponentials");
        let step = domain.freq_step();
        for i in 0..self.exponentials {
            let xi: Vec<f64> = (0..domain.dim())
                .map(|_| rng.gen_range(lo..=hi) as f64 * step)
                .collect();
            let f = GridFunction::from_fn(domain.clone(), |x| {
                let ph: f64 = xi.iter().zip(x).map(|(a, b)| a * b).sum();
                C64::from_polar(1.0, 2.0 * PI * ph)
            })?;
            functions.push((format!("exponential-{i}"), f));
        }

        Ok(Corpus {
            id: self.id(domain),
            seed: self.seed,
            domain: domain.clone(),
            functions,
        })
    }
}

/// Labeled functions on one domain.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub id: String,
    pub seed: u64,
    pub domain: Domain,
    pub functions: Vec<(String, GridFunction)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{LineModel, TorusGrid};

    #[test]
    fn deterministic_and_seed_sensitive() {
        let d: Domain = TorusGrid::new(2, 8).unwrap().into();
        let a = CorpusSpec::standard(5).generate(&d).unwrap();
        let b = CorpusSpec::standard(5).generate(&d).unwrap();
        assert_eq!(a.id, b.id);
        for ((la, fa), (lb, fb)) in a.functions.iter().zip(&b.functions) {
            assert_eq!(la, lb);
            assert_eq!(fa, fb);
        }
        let c = CorpusSpec::standard(6).generate(&d).unwrap();
        assert_ne!(a.id, c.id);
        assert_ne!(a.functions[0].1, c.functions[0].1);
    }

    #[test]
    fn families_are_nonzero_on_line_models() {
        let d: Domain = LineModel::new(1, 8, 64).unwrap().into();
        let c = CorpusSpec::standard(1).generate(&d).unwrap();
        assert_eq!(c.functions.len(), CorpusSpec::standard(1).size());
        assert!(c.functions.iter().all(|(_, f)| f.sup_norm() > 0.0));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
    }
}
