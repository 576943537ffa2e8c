//! Exact samplers for the reference models.
//!
//! Randomness comes from [`SampleRng`] (xoshiro256++), seeded through
//! `seed_from_u64`, which expands the 64-bit seed with SplitMix64. Draws are
//! bit-reproducible for a given `(model, n, seed)` within this crate.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::TailModel;
use crate::error::{Error, Result};

pub type SampleRng = Xoshiro256PlusPlus;

const BISECTION_TOL: f64 = 1e-10;
const BISECTION_MAX_ITER: usize = 200;

pub fn rng_from_seed(seed: u64) -> SampleRng {
    SampleRng::seed_from_u64(seed)
}

/// Seed of replicate `replicate` in an experiment with base seed `base`:
/// the SplitMix64 finalizer applied to `base + (replicate + 1) * 0x9E3779B97F4A7C15`
/// (wrapping arithmetic).
pub fn stream_seed(base: u64, replicate: u64) -> u64 {
    let mut z = base.wrapping_add(replicate.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// An `n x d` matrix of observations stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    n: usize,
    d: usize,
    seed: Option<u64>,
    source: Option<PathBuf>,
}

impl Sample {
    /// Builds a sample from row-major values. Every entry must be finite.
    pub fn from_rows(values: Vec<f64>, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::arg(format!("a sample needs d >= 2 columns, got {d}")));
        }
        if values.is_empty() || values.len() % d != 0 {
            return Err(Error::arg(format!(
                "{} values do not form a nonempty matrix with {d} columns",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                row: pos / d + 1,
                column: pos % d + 1,
                message: format!("non-finite value {}", values[pos]),
            });
        }
        let n = values.len() / d;
        Ok(Self {
            values,
            n,
            d,
            seed: None,
            source: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_source(mut self, path: impl AsRef<Path>) -> Self {
        self.source = Some(path.as_ref().to_path_buf());
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.d).copied()
    }

    /// Applies `f` to every entry of column `j`.
    pub fn map_column(&self, j: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values = self.values.clone();
        for v in values.iter_mut().skip(j).step_by(self.d) {
            *v = f(*v);
        }
        let mut out = Self::from_rows(values, self.d)?;
        out.seed = self.seed;
        Ok(out)
    }
}

/// Draws `n` i.i.d. observations from `model` with generator seed `seed`.
pub fn sample(model: &TailModel, n: usize, seed: u64) -> Result<Sample> {
    model.validate()?;
    if n == 0 {
        return Err(Error::arg("sample size must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let [a, b] = draw(model, &mut rng);
        values.push(a);
        values.push(b);
    }
    Ok(Sample::from_rows(values, 2)?.with_seed(seed))
}

fn draw<R: Rng + ?Sized>(model: &TailModel, rng: &mut R) -> [f64; 2] {
    match *model {
        TailModel::Bpii { beta } => {
            // Gamma frailty: joint survival (1 + x + y)^{-(beta - 2)}.
            let w: f64 = Gamma::new(beta - 2.0, 1.0).expect("validated shape").sample(rng);
            let e1: f64 = rng.sample(Exp1);
            let e2: f64 = rng.sample(Exp1);
            [e1 / w, e2 / w]
        }
        TailModel::Gaussian { tau } => correlated_normals(tau, rng),
        TailModel::StudentDep { nu, theta } => {
            let [z1, z2] = correlated_normals(theta, rng);
            let chi: f64 = ChiSquared::new(nu).expect("validated degrees").sample(rng);
            let scale = (chi / nu).sqrt();
            [z1 / scale, z2 / scale]
        }
        TailModel::SymLogistic { s } => {
            let st = positive_stable(s, rng);
            let e1: f64 = rng.sample(Exp1);
            let e2: f64 = rng.sample(Exp1);
            // Frechet pair (S / E_j)^s, returned on the Gumbel scale.
            [s * (st.ln() - e1.ln()), s * (st.ln() - e2.ln())]
        }
        TailModel::ArchimaxLogistic { s } => {
            // -log V_j = (E_j / S)^s for the extreme-value copula pair.
            let st = positive_stable(s, rng);
            let e1: f64 = rng.sample(Exp1);
            let e2: f64 = rng.sample(Exp1);
            let w: f64 = rng.sample(Exp1);
            [clayton_mix((e1 / st).powf(s), w), clayton_mix((e2 / st).powf(s), w)]
        }
        TailModel::ArchimaxMixed => {
            let v1: f64 = rng.sample(Open01);
            let p: f64 = rng.sample(Open01);
            let v2 = mixed_conditional_inverse(v1, p);
            let w: f64 = rng.sample(Exp1);
            [clayton_mix(-v1.ln(), w), clayton_mix(-v2.ln(), w)]
        }
    }
}

fn correlated_normals<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> [f64; 2] {
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    [z1, rho * z1 + (1.0 - rho * rho).sqrt() * z2]
}

/// `(1 + y / w)^{-1}`: mixes an extreme-value copula coordinate, given as
/// `y = -log V`, over an exponential frailty `w` with Laplace transform
/// `1 / (1 + u)`.
fn clayton_mix(y: f64, w: f64) -> f64 {
    1.0 / (1.0 + y / w)
}

/// Positive `alpha`-stable variable with Laplace transform `exp(-u^alpha)`,
/// by Kanter's representation. `alpha = 1` is the point mass at 1.
pub(crate) fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let u = PI * rng.sample::<f64, _>(Open01);
    let e: f64 = rng.sample(Exp1);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
    a * b
}

/// Conditional distribution of the second coordinate given the first for
/// the extreme-value copula `C(u, v) = exp(-l(-log u, -log v))` with the
/// mixed tail function `l`.
fn mixed_conditional(u: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if v >= 1.0 {
        return 1.0;
    }
    let x = -u.ln();
    let y = -v.ln();
    let l = (x * x + y * y + x * y) / (x + y);
    let d1 = (x * x + 2.0 * x * y) / ((x + y) * (x + y));
    (-l).exp() * d1 / u
}

fn mixed_conditional_inverse(u: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mixed_conditional(u, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < BISECTION_TOL {
            break;
        }
    }
    // Keep the root strictly inside (0, 1) so that -log v stays finite.
    (0.5 * (lo + hi)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}
