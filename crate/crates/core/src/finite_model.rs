//! Exact enumeration of small mixed p-spin systems.
//!
//! `H_{N,p}(σ) = N^{−(p−1)/2} Σ_{i_1..i_p} g_{i_1..i_p} σ_{i_1}⋯σ_{i_p}` with
//! dense standard Gaussian tensors (diagonal index tuples included), and the
//! Gibbs measure is proportional to `exp(Σ_p β_p H_{N,p}(σ) + h Σ_i σ_i)`.
//!
//! Configurations are bit masks (bit set means `σ_i = −1`). Since
//! `σ_i² = 1`, each tensor reduces to coefficients of the multilinear
//! monomials `σ_S`, `|S| ≤ p`. Energies are enumerated in Gray-code order,
//! in fixed chunks that start from a direct evaluation, and the overlap
//! distribution comes from a Walsh–Hadamard autocorrelation of the Gibbs
//! weights.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;
use crate::par::Parallelism;

/// Largest system size accepted for enumeration.
pub const ENUMERATION_LIMIT: usize = 20;

const CHUNK: usize = 1024;

/// One disorder realization.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteModelSample {
    pub n: usize,
    pub spec: MixtureSpec,
    pub seed: u64,
    /// `(p, g)` with `g` of length `nᵖ`, indices in row-major order.
    pub disorder: Vec<(u32, Vec<f64>)>,
}

/// Gaussian tensors for every order in `spec`; the tensor of order `p`
/// depends only on `(seed, n, p)`, so changing `β` keeps the disorder.
pub fn sample_disorder(spec: &MixtureSpec, n: usize, seed: u64) -> Result<FiniteModelSample> {
    if n == 0 || n > ENUMERATION_LIMIT {
        return Err(Error::Size {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let disorder = spec
        .orders()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let len = n.pow(p);
            let g: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
            (p, g)
        })
        .collect();
    Ok(FiniteModelSample {
        n,
        spec: spec.clone(),
        seed,
        disorder,
    })
}

/// Seed of the `i`-th sample of a disorder average.
pub fn sample_seed(seed: u64, i: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((1u64 << 40) | i as u64);
    rng.next_u64()
}

/// Multilinear form of the interaction terms: monomial masks and, per
/// monomial, one coefficient per order.
struct Reduced {
    orders: Vec<u32>,
    masks: Vec<u32>,
    /// `coef[j * orders.len() + t]` for monomial `j`, order index `t`.
    coef: Vec<f64>,
}

impl FiniteModelSample {
    fn reduce(&self) -> Reduced {
        let n = self.n;
        let orders: Vec<u32> = self.disorder.iter().map(|(p, _)| *p).collect();
        let np = orders.len();
        let mut acc: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for (t, (p, g)) in self.disorder.iter().enumerate() {
            let p = *p as usize;
            let norm = (n as f64).powf(-0.5 * (p as f64 - 1.0));
            let mut idx = vec![0usize; p];
            for &gv in g {
                let mask = idx.iter().fold(0u32, |m, &i| m ^ (1 << i));
                acc.entry(mask).or_insert_with(|| vec![0.0; np])[t] += gv * norm;
                // odometer over index tuples, last index fastest
                for d in (0..p).rev() {
                    idx[d] += 1;
                    if idx[d] < n {
                        break;
                    }
                    idx[d] = 0;
                }
            }
        }
        let masks = acc.keys().copied().collect();
        let coef = acc.into_values().flatten().collect();
        Reduced { orders, masks, coef }
    }

    /// `H_{N,p}(σ)` for configuration mask `x`, from the dense tensor.
    pub fn term(&self, p: u32, x: u32) -> f64 {
        let n = self.n;
        let Some((_, g)) = self.disorder.iter().find(|(q, _)| *q == p) else {
            return 0.0;
        };
        let sigma = |i: usize| if x >> i & 1 == 1 { -1.0 } else { 1.0 };
        let p = p as usize;
        let mut idx = vec![0usize; p];
        let mut total = 0.0;
        for &gv in g {
            total += gv * idx.iter().map(|&i| sigma(i)).product::<f64>();
            for d in (0..p).rev() {
                idx[d] += 1;
                if idx[d] < n {
                    break;
                }
                idx[d] = 0;
            }
        }
        total * (n as f64).powf(-0.5 * (p as f64 - 1.0))
    }

    /// `H_N(σ) = Σ_p β_p H_{N,p}(σ)` (no field term).
    pub fn hamiltonian(&self, x: u32) -> f64 {
        self.disorder
            .iter()
            .map(|(p, _)| self.spec.beta(*p) * self.term(*p, x))
            .sum()
    }

    /// Same disorder under a different spec with the same orders.
    pub fn with_spec(&self, spec: &MixtureSpec) -> Result<Self> {
        let same = spec.orders().eq(self.disorder.iter().map(|(p, _)| *p));
        if !same {
            return Err(Error::InvalidSpec(
                "spec orders differ from the sampled disorder".into(),
            ));
        }
        Ok(Self {
            spec: spec.clone(),
            ..self.clone()
        })
    }
}

/// Per-order interaction terms `H_{N,p}` of every configuration, enumerated
/// over `2^bits` masks. Chunks start from a direct evaluation so the result
/// does not depend on how chunks are scheduled.
fn enumerate_terms(red: &Reduced, bits: usize) -> Vec<Vec<f64>> {
    let np = red.orders.len();
    let total = 1usize << bits;
    let mut terms = vec![vec![0.0; total]; np];
    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); bits.max(1)];
    for (j, &m) in red.masks.iter().enumerate() {
        for (i, list) in containing.iter_mut().enumerate() {
            if m >> i & 1 == 1 {
                list.push(j);
            }
        }
    }
    let mut signs = vec![0.0; red.masks.len()];
    let mut h = vec![0.0; np];
    for start in (0..total).step_by(CHUNK) {
        let x0 = (start ^ (start >> 1)) as u32;
        h.iter_mut().for_each(|v| *v = 0.0);
        for (j, &m) in red.masks.iter().enumerate() {
            let s = if (m & x0).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            signs[j] = s;
            for (t, v) in h.iter_mut().enumerate() {
                *v += red.coef[j * np + t] * s;
            }
        }
        let end = (start + CHUNK).min(total);
        for step in start..end {
            let x = step ^ (step >> 1);
            for t in 0..np {
                terms[t][x] = h[t];
            }
            if step + 1 < end {
                let bit = (step + 1).trailing_zeros() as usize;
                for &j in &containing[bit] {
                    let s = signs[j];
                    for (t, v) in h.iter_mut().enumerate() {
                        *v -= 2.0 * red.coef[j * np + t] * s;
                    }
                    signs[j] = -s;
                }
            }
        }
    }
    terms
}

/// In-place Walsh–Hadamard transform (unnormalized).
fn walsh_hadamard(v: &mut [f64]) {
    let n = v.len();
    let mut len = 1;
    while len < n {
        for block in (0..n).step_by(2 * len) {
            for i in block..block + len {
                let (a, b) = (v[i], v[i + len]);
                v[i] = a + b;
                v[i + len] = a - b;
            }
        }
        len *= 2;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsSummary {
    pub n: usize,
    /// `(1/N) log Σ_σ exp(H_N(σ) + h Σσ_i)`.
    pub log_z_over_n: f64,
    /// `(p, ⟨R_{1,2}^p⟩)`.
    pub overlap_moments: Vec<(u32, f64)>,
    /// `⟨R_{1,2}⟩ = (1/N) Σ_i ⟨σ_i⟩²`.
    pub overlap_mean: f64,
    /// `(p, ⟨H_{N,p}⟩ / N)` for each order of the model.
    pub energy_terms: Vec<(u32, f64)>,
    /// `P(R = 1 − 2d/N)` indexed by `d`.
    pub overlap_distribution: Vec<f64>,
}

impl GibbsSummary {
    pub fn moment(&self, p: u32) -> Option<f64> {
        self.overlap_moments.iter().find(|(q, _)| *q == p).map(|m| m.1)
    }

    pub fn energy_term(&self, p: u32) -> Option<f64> {
        self.energy_terms.iter().find(|(q, _)| *q == p).map(|m| m.1)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|e| (e - max).exp()).sum::<f64>().ln()
}

/// Exact Gibbs summary of one sample by enumeration of all `2^N`
/// configurations. For spin-flip symmetric models only half of them are
/// enumerated and the other half mirrored, so odd overlap moments and the
/// magnetizations cancel exactly.
pub fn gibbs_summary(sample: &FiniteModelSample, moment_ps: &[u32]) -> Result<GibbsSummary> {
    let n = sample.n;
    if n == 0 || n > ENUMERATION_LIMIT {
        return Err(Error::Size {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let spec = &sample.spec;
    let symmetric = spec.is_spin_flip_symmetric();
    let red = sample.reduce();
    let bits = if symmetric { n - 1 } else { n };
    let half = enumerate_terms(&red, bits);
    let total = 1usize << n;
    let top = (1usize << n) - 1;
    // terms of every configuration; mirrored ones pick up (−1)^p
    let terms: Vec<Vec<f64>> = if symmetric {
        red.orders
            .iter()
            .zip(half)
            .map(|(&p, mut v)| {
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                v.resize(total, 0.0);
                for x in total / 2..total {
                    v[x] = sign * v[top ^ x];
                }
                v
            })
            .collect()
    } else {
        half
    };
    let h = spec.h();
    let energy: Vec<f64> = (0..total)
        .map(|x| {
            let interaction: f64 = if symmetric && x >= total / 2 {
                // exact mirror of the partner configuration
                0.0
            } else {
                red.orders.iter().zip(&terms).map(|(&p, t)| spec.beta(p) * t[x]).sum()
            };
            let field = h * (n as f64 - 2.0 * (x as u32).count_ones() as f64);
            interaction + field
        })
        .collect();
    let energy: Vec<f64> = if symmetric {
        let mut e = energy;
        for x in total / 2..total {
            e[x] = e[top ^ x];
        }
        e
    } else {
        energy
    };
    let log_z = log_sum_exp(&energy);
    let w: Vec<f64> = energy.iter().map(|e| (e - log_z).exp()).collect();

    let energy_terms = red
        .orders
        .iter()
        .zip(&terms)
        .map(|(&p, t)| (p, t.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / n as f64))
        .collect();

    let mut mags = vec![0.0; n];
    if symmetric {
        for x in 0..total / 2 {
            let y = top ^ x;
            for (i, m) in mags.iter_mut().enumerate() {
                let s = if x >> i & 1 == 1 { -1.0 } else { 1.0 };
                // σ_i(y) = −σ_i(x) and w_y = w_x
                *m += w[x] * s + w[y] * -s;
            }
        }
    } else {
        for (x, wx) in w.iter().enumerate() {
            for (i, m) in mags.iter_mut().enumerate() {
                *m += if x >> i & 1 == 1 { -wx } else { *wx };
            }
        }
    }
    let overlap_mean = mags.iter().map(|m| m * m).sum::<f64>() / n as f64;

    let mut spectrum = w.clone();
    walsh_hadamard(&mut spectrum);
    spectrum.iter_mut().for_each(|v| *v *= *v);
    walsh_hadamard(&mut spectrum);
    let mut dist = vec![0.0; n + 1];
    for (z, a) in spectrum.iter().enumerate() {
        dist[(z as u32).count_ones() as usize] += a / total as f64;
    }
    if symmetric {
        for d in 0..=n / 2 {
            let avg = 0.5 * (dist[d] + dist[n - d]);
            dist[d] = avg;
            dist[n - d] = avg;
        }
    }
    let overlap_moments = moment_ps
        .iter()
        .map(|&p| (p, distribution_moment(&dist, n, p)))
        .collect();
    Ok(GibbsSummary {
        n,
        log_z_over_n: log_z / n as f64,
        overlap_moments,
        overlap_mean,
        energy_terms,
        overlap_distribution: dist,
    })
}

/// `Σ_d P(d) R_d^p`, pairing `d` with `N − d` so that symmetric
/// distributions give exactly zero odd moments.
fn distribution_moment(dist: &[f64], n: usize, p: u32) -> f64 {
    let r = |d: usize| (n as f64 - 2.0 * d as f64) / n as f64;
    let mut total = 0.0;
    for d in 0..n.div_ceil(2) {
        total += dist[d] * r(d).powi(p as i32) + dist[n - d] * r(n - d).powi(p as i32);
    }
    if n.is_multiple_of(2) {
        total += dist[n / 2] * r(n / 2).powi(p as i32);
    }
    total
}

/// Mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderAverage {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// `F_N = (1/N) E log Z`.
    pub free_energy: Estimate,
    pub moments: Vec<(u32, Estimate)>,
    pub overlap_mean: Estimate,
    /// `E(⟨R⟩ − E⟨R⟩)²`.
    pub overlap_mean_variance: Estimate,
    pub per_sample: Vec<GibbsSummary>,
}

impl DisorderAverage {
    pub fn moment(&self, p: u32) -> Option<Estimate> {
        self.moments.iter().find(|(q, _)| *q == p).map(|m| m.1)
    }
}

/// Averages over `samples` independent disorder realizations. The result
/// does not depend on how samples are scheduled.
pub fn disorder_average(
    spec: &MixtureSpec,
    n: usize,
    moment_ps: &[u32],
    samples: usize,
    seed: u64,
    parallelism: Parallelism,
) -> Result<DisorderAverage> {
    if samples < 2 {
        return Err(Error::InvalidConfig(
            "a disorder average needs at least 2 samples".into(),
        ));
    }
    let per_sample: Vec<GibbsSummary> = parallelism
        .map_range(samples, |i| {
            let s = sample_disorder(spec, n, sample_seed(seed, i))?;
            gibbs_summary(&s, moment_ps)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let col = |f: &dyn Fn(&GibbsSummary) -> f64| -> Vec<f64> { per_sample.iter().map(f).collect() };
    let free_energy = Estimate::from_samples(&col(&|g| g.log_z_over_n));
    let moments = moment_ps
        .iter()
        .enumerate()
        .map(|(j, &p)| (p, Estimate::from_samples(&col(&|g| g.overlap_moments[j].1))))
        .collect();
    let means = col(&|g| g.overlap_mean);
    let overlap_mean = Estimate::from_samples(&means);
    let dev: Vec<f64> = means.iter().map(|m| (m - overlap_mean.mean).powi(2)).collect();
    Ok(DisorderAverage {
        n,
        samples,
        seed,
        free_energy,
        moments,
        overlap_mean,
        overlap_mean_variance: Estimate::from_samples(&dev),
        per_sample,
    })
}

/// Richardson-refined central difference of `(1/N) log Z` in `β_p` for one
/// fixed disorder, and the exact `(1/N)⟨H_{N,p}⟩`.
pub fn per_sample_ibp(sample: &FiniteModelSample, p: u32, step: f64) -> Result<(f64, f64)> {
    if !sample.spec.contains(p) {
        return Err(Error::InvalidSpec(format!("order {p} is not a term of the model")));
    }
    let beta = sample.spec.beta(p);
    let at = |b: f64| -> Result<f64> {
        let s = sample.with_spec(&sample.spec.with_beta(p, b)?)?;
        Ok(gibbs_summary(&s, &[])?.log_z_over_n)
    };
    let central = |h: f64| -> Result<f64> { Ok((at(beta + h)? - at(beta - h)?) / (2.0 * h)) };
    let fd = (4.0 * central(0.5 * step)? - central(step)?) / 3.0;
    let exact = gibbs_summary(sample, &[])?.energy_term(p).unwrap_or(0.0);
    Ok((fd, exact))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbpCheck {
    pub p: u32,
    /// Disorder average of the per-sample finite differences.
    pub fd: f64,
    /// `β_p (1 − E⟨R^p⟩)`.
    pub identity: f64,
    /// Standard error of the per-sample differences `fd_i − β_p(1 − ⟨R^p⟩_i)`.
    pub stderr: f64,
    pub pass: bool,
}

/// Compares `∂F_N/∂β_p` (finite differences over common disorder) with
/// `β_p (1 − E⟨R^p⟩)`; passes when they agree within three standard
/// errors plus `1e−4`.
pub fn ibp_check(
    spec: &MixtureSpec,
    n: usize,
    p: u32,
    samples: usize,
    step: f64,
    seed: u64,
    parallelism: Parallelism,
) -> Result<IbpCheck> {
    if samples < 2 {
        return Err(Error::InvalidConfig("an IBP check needs at least 2 samples".into()));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
    }
    let beta = spec.beta(p);
    let rows: Vec<(f64, f64)> = parallelism
        .map_range(samples, |i| -> Result<(f64, f64)> {
            let s = sample_disorder(spec, n, sample_seed(seed, i))?;
            let (fd, _) = per_sample_ibp(&s, p, step)?;
            let moment = gibbs_summary(&s, &[p])?.overlap_moments[0].1;
            Ok((fd, moment))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let fds: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let moments: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let diffs: Vec<f64> = rows.iter().map(|(f, m)| f - beta * (1.0 - m)).collect();
    let fd = Estimate::from_samples(&fds).mean;
    let identity = beta * (1.0 - Estimate::from_samples(&moments).mean);
    let stderr = Estimate::from_samples(&diffs).stderr;
    Ok(IbpCheck {
        p,
        fd,
        identity,
        stderr,
        pass: (fd - identity).abs() <= 3.0 * stderr + 1e-4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn enumeration_matches_dense_tensor() {
        let spec = MixtureSpec::new([(1, 0.3), (2, 0.9), (3, 0.5)], 0.2).unwrap();
        let s = sample_disorder(&spec, 5, 3).unwrap();
        let red = s.reduce();
        let terms = enumerate_terms(&red, 5);
        for x in 0..32u32 {
            for (t, &p) in red.orders.iter().enumerate() {
                assert_abs_diff_eq!(terms[t][x as usize], s.term(p, x), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn walsh_hadamard_autocorrelation() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let mut v = w.to_vec();
        walsh_hadamard(&mut v);
        v.iter_mut().for_each(|x| *x *= *x);
        walsh_hadamard(&mut v);
        for z in 0..4 {
            let want: f64 = (0..4).map(|x| w[x] * w[x ^ z]).sum();
            assert_abs_diff_eq!(v[z] / 4.0, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn disorder_is_reproducible_and_independent_of_beta() {
        let a = sample_disorder(&MixtureSpec::pure(2, 0.5, 0.0).unwrap(), 6, 9).unwrap();
        let b = sample_disorder(&MixtureSpec::pure(2, 1.5, 0.3).unwrap(), 6, 9).unwrap();
        assert_eq!(a.disorder, b.disorder);
        assert!(matches!(
            sample_disorder(&MixtureSpec::pure(2, 0.5, 0.0).unwrap(), 21, 0),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn symmetric_half_enumeration_agrees_with_full() {
        let spec = MixtureSpec::new([(2, 0.8), (4, 0.6)], 0.0).unwrap();
        let s = sample_disorder(&spec, 7, 5).unwrap();
        let sym = gibbs_summary(&s, &[1, 2, 3, 4]).unwrap();
        // a vanishing linear term breaks nothing physically but disables the
        // mirrored enumeration
        let tiny = MixtureSpec::new([(2, 0.8), (4, 0.6)], 1e-300).unwrap();
        let full = gibbs_summary(&s.with_spec(&tiny).unwrap(), &[1, 2, 3, 4]).unwrap();
        assert_abs_diff_eq!(sym.log_z_over_n, full.log_z_over_n, epsilon = 1e-12);
        for (a, b) in sym.overlap_moments.iter().zip(&full.overlap_moments) {
            assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-12);
        }
        assert_eq!(sym.overlap_mean, 0.0);
        assert_eq!(sym.moment(1), Some(0.0));
        assert_eq!(sym.moment(3), Some(0.0));
    }
}
