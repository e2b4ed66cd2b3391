//! Finite-size instances of the regression model and the exact Gaussian
//! posterior used as a finite-p oracle.
//!
//! Randomness comes from ChaCha20 seeded with the instance seed. Column `j`
//! of the design draws from stream `j`; the signal and the noise use two
//! reserved streams at the top of the stream space, so changing `p` never
//! perturbs the draws of an existing column.

use std::io::{self, Read, Write};
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kms::{DiscreteSpectrum, SpectrumSpec};
use crate::scalar_channel::Prior;

/// Largest `p` accepted by the dense posterior.
pub const MAX_POSTERIOR_DIM: usize = 4096;

const SIGNAL_STREAM: u64 = u64::MAX - 1;
const NOISE_STREAM: u64 = u64::MAX;

const MAGIC: &[u8; 4] = b"SRMI";
const FORMAT_VERSION: u32 = 1;

/// Everything needed to regenerate an instance bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub p: usize,
    pub spectrum: SpectrumSpec<f64>,
    pub prior: Prior<f64>,
    pub sigma2: f64,
    pub seed: u64,
    /// Number of blocks used to lay out a continuous spectrum.
    pub k_bins: usize,
}

impl InstanceSpec {
    pub fn new(
        n: usize,
        p: usize,
        spectrum: SpectrumSpec<f64>,
        prior: Prior<f64>,
        sigma2: f64,
        seed: u64,
    ) -> Result<Self> {
        let spec = Self {
            n,
            p,
            spectrum,
            prior,
            sigma2,
            seed,
            k_bins: 32,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `N = round(c p)`, at least one row.
    pub fn from_ratio(
        c: f64,
        p: usize,
        spectrum: SpectrumSpec<f64>,
        prior: Prior<f64>,
        sigma2: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("c = {c} must be positive")));
        }
        let n = ((c * p as f64).round() as usize).max(1);
        Self::new(n, p, spectrum, prior, sigma2, seed)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_k_bins(mut self, k_bins: usize) -> Result<Self> {
        self.k_bins = k_bins;
        self.validate()?;
        Ok(self)
    }

    pub fn ratio(&self) -> f64 {
        self.n as f64 / self.p as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::Domain(format!(
                "N = {} and p = {} must both be positive",
                self.n, self.p
            )));
        }
        if self.n.checked_mul(self.p).is_none_or(|np| np > (1 << 31)) {
            return Err(Error::Domain(format!(
                "design of {} x {} is too large",
                self.n, self.p
            )));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma2 = {} must be positive",
                self.sigma2
            )));
        }
        if self.k_bins == 0 {
            return Err(Error::Spectrum("k_bins must be positive".into()));
        }
        Ok(())
    }

    /// Column layout: one contiguous block per spectral atom (or bin).
    pub fn layout(&self) -> Result<BlockLayout> {
        BlockLayout::new(&self.spectrum, self.p, self.k_bins)
    }
}

/// Assignment of columns to blocks, with one AR coefficient per column.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    blocks: Vec<Range<usize>>,
    block_lambdas: Vec<f64>,
    column_lambdas: Vec<f64>,
}

impl BlockLayout {
    /// Discrete spectra: block `i` holds `round(p L_i) - round(p L_{i-1})`
    /// columns where `L_i` is the cumulative weight, all with coefficient
    /// `lambda_i`. Continuous spectra: column `j` takes the quantile at
    /// `(j + 1/2)/p` and is filed under the bin that contains it.
    pub fn new(spectrum: &SpectrumSpec<f64>, p: usize, k_bins: usize) -> Result<Self> {
        match spectrum {
            SpectrumSpec::Discrete(d) => Ok(Self::discrete(d, p)),
            SpectrumSpec::Continuous(cont) => {
                let bins = cont.discretize(k_bins)?;
                let (a, b) = cont.support();
                let width = (b - a) / k_bins as f64;
                let column_lambdas: Vec<f64> = (0..p)
                    .map(|j| cont.quantile((j as f64 + 0.5) / p as f64))
                    .collect();
                let bin_of = |l: f64| {
                    if width > 0.0 {
                        (((l - a) / width).floor().max(0.0) as usize).min(k_bins - 1)
                    } else {
                        0
                    }
                };
                let mut blocks = Vec::new();
                let mut block_lambdas = Vec::new();
                let mut start = 0;
                while start < p {
                    let bin = bin_of(column_lambdas[start]);
                    let mut end = start + 1;
                    while end < p && bin_of(column_lambdas[end]) == bin {
                        end += 1;
                    }
                    blocks.push(start..end);
                    block_lambdas.push(a + bin as f64 * width);
                    start = end;
                }
                debug_assert!(block_lambdas
                    .iter()
                    .all(|l| bins.lambdas().iter().any(|b| (b - l).abs() < 1e-12)));
                Ok(Self {
                    blocks,
                    block_lambdas,
                    column_lambdas,
                })
            }
        }
    }

    fn discrete(d: &DiscreteSpectrum<f64>, p: usize) -> Self {
        let mut blocks = Vec::with_capacity(d.len());
        let mut block_lambdas = Vec::with_capacity(d.len());
        let mut column_lambdas = Vec::with_capacity(p);
        let mut cumulative = 0.0;
        let mut start = 0;
        for (i, atom) in d.atoms().iter().enumerate() {
            cumulative += atom.weight;
            let end = if i + 1 == d.len() {
                p
            } else {
                ((cumulative * p as f64).round() as usize).clamp(start, p)
            };
            blocks.push(start..end);
            block_lambdas.push(atom.lambda);
            column_lambdas.extend(std::iter::repeat_n(atom.lambda, end - start));
            start = end;
        }
        Self {
            blocks,
            block_lambdas,
            column_lambdas,
        }
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn block_lambdas(&self) -> &[f64] {
        &self.block_lambdas
    }

    pub fn column_lambdas(&self) -> &[f64] {
        &self.column_lambdas
    }

    pub fn p(&self) -> usize {
        self.column_lambdas.len()
    }

    /// Realized proportions `|I_i| / p` as a spectrum, skipping empty blocks.
    pub fn realized_spectrum(&self) -> Result<DiscreteSpectrum<f64>> {
        let p = self.p() as f64;
        DiscreteSpectrum::new(
            self.blocks
                .iter()
                .zip(&self.block_lambdas)
                .filter(|(r, _)| !r.is_empty())
                .map(|(r, &l)| (l, r.len() as f64 / p)),
        )
    }
}

/// One draw of `(Phi, beta0, Z, Y)`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    spec: InstanceSpec,
    layout: BlockLayout,
    phi: DMatrix<f64>,
    beta0: DVector<f64>,
    noise: DVector<f64>,
    y: DVector<f64>,
}

impl ProblemInstance {
    /// Assembles an instance from parts; `Y` is recomputed from the others.
    pub fn from_parts(
        spec: InstanceSpec,
        layout: BlockLayout,
        phi: DMatrix<f64>,
        beta0: DVector<f64>,
        noise: DVector<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        check_dim(spec.p, layout.p())?;
        check_dim(spec.n, phi.nrows())?;
        check_dim(spec.p, phi.ncols())?;
        check_dim(spec.p, beta0.len())?;
        check_dim(spec.n, noise.len())?;
        let y = measurements(&phi, &beta0, &noise);
        Ok(Self {
            spec,
            layout,
            phi,
            beta0,
            noise,
            y,
        })
    }

    pub fn spec(&self) -> &InstanceSpec {
        &self.spec
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn p(&self) -> usize {
        self.spec.p
    }

    pub fn sigma2(&self) -> f64 {
        self.spec.sigma2
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn beta0(&self) -> &DVector<f64> {
        &self.beta0
    }

    pub fn noise(&self) -> &DVector<f64> {
        &self.noise
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Same instance with a new design and signal; `Y` is kept as given so
    /// that transformations preserving `Phi beta0` can be checked.
    pub(crate) fn with_design(&self, phi: DMatrix<f64>, beta0: DVector<f64>) -> Self {
        Self {
            spec: self.spec.clone(),
            layout: self.layout.clone(),
            phi,
            beta0,
            noise: self.noise.clone(),
            y: self.y.clone(),
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

fn measurements(phi: &DMatrix<f64>, beta0: &DVector<f64>, noise: &DVector<f64>) -> DVector<f64> {
    let scale = 1.0 / (phi.ncols() as f64).sqrt();
    let mut y = phi * beta0;
    y *= scale;
    y += noise;
    y
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stationary AR(1) path of length `n`.
pub fn ar1_column<R: Rng + ?Sized>(lambda: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mut col = Vec::with_capacity(n);
    if n == 0 {
        return col;
    }
    let z: f64 = rng.sample(StandardNormal);
    let mut x = z / (1.0 - lambda * lambda).sqrt();
    col.push(x);
    for _ in 1..n {
        let xi: f64 = rng.sample(StandardNormal);
        x = lambda * x + xi;
        col.push(x);
    }
    col
}

/// One draw from the prior.
pub fn sample_prior<R: Rng + ?Sized>(prior: &Prior<f64>, rng: &mut R) -> f64 {
    match prior {
        Prior::Rademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        Prior::Gaussian { rho } => rho.sqrt() * rng.sample::<f64, _>(StandardNormal),
        Prior::Discrete(d) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (&a, &w) in d.atoms().iter().zip(d.weights()) {
                acc += w;
                if u < acc {
                    return a;
                }
            }
            *d.atoms().last().expect("non-empty prior")
        }
    }
}

pub fn sample_instance(spec: &InstanceSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    let layout = spec.layout()?;
    let (n, p) = (spec.n, spec.p);
    let mut data = Vec::new();
    data.try_reserve_exact(n * p)
        .map_err(|e| Error::Domain(format!("cannot allocate {n} x {p} design: {e}")))?;
    for (j, &lambda) in layout.column_lambdas().iter().enumerate() {
        let mut rng = stream_rng(spec.seed, j as u64);
        data.extend(ar1_column(lambda, n, &mut rng));
    }
    let phi = DMatrix::from_vec(n, p, data);

    let mut rng = stream_rng(spec.seed, SIGNAL_STREAM);
    let beta0 = DVector::from_fn(p, |_, _| sample_prior(&spec.prior, &mut rng));
    let mut rng = stream_rng(spec.seed, NOISE_STREAM);
    let sd = spec.sigma2.sqrt();
    let noise = DVector::from_fn(n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));

    ProblemInstance::from_parts(spec.clone(), layout, phi, beta0, noise)
}

/// Exact posterior of `beta` under a Gaussian prior.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianPosterior {
    /// `tr(Cov) / p`, the expected posterior error per coordinate.
    pub fn mean_variance(&self) -> f64 {
        self.covariance.trace() / self.mean.len() as f64
    }
}

fn gaussian_rho(prior: &Prior<f64>) -> Result<f64> {
    match prior {
        Prior::Gaussian { rho } => Ok(*rho),
        other => Err(Error::Prior(format!(
            "exact posterior needs a gaussian prior, got {other}"
        ))),
    }
}

/// Cholesky factor of `M = Phi^T Phi / (p sigma2) + I / rho` and the
/// right-hand side `Phi^T Y / (sqrt(p) sigma2)`.
fn normal_system(
    instance: &ProblemInstance,
    rho: f64,
) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, DVector<f64>)> {
    if instance.p() > MAX_POSTERIOR_DIM {
        return Err(Error::Domain(format!(
            "p = {} exceeds the dense limit {MAX_POSTERIOR_DIM}",
            instance.p()
        )));
    }
    let (p, s2) = (instance.p() as f64, instance.sigma2());
    let phi = instance.phi();
    let mut m = phi.tr_mul(phi);
    m /= p * s2;
    for i in 0..instance.p() {
        m[(i, i)] += 1.0 / rho;
    }
    let chol = m.cholesky().ok_or_else(|| {
        Error::LinearAlgebra("regularized normal matrix is not positive definite".into())
    })?;
    let rhs = phi.tr_mul(instance.y()) / (p.sqrt() * s2);
    Ok((chol, rhs))
}

/// `mean = M^{-1} Phi^T Y / (sqrt(p) sigma2)`, `Cov = M^{-1}` with
/// `M = Phi^T Phi / (p sigma2) + I / rho`.
pub fn exact_gaussian_posterior(
    instance: &ProblemInstance,
    prior: &Prior<f64>,
) -> Result<GaussianPosterior> {
    let (chol, rhs) = normal_system(instance, gaussian_rho(prior)?)?;
    Ok(GaussianPosterior {
        mean: chol.solve(&rhs),
        covariance: chol.inverse(),
    })
}

/// Posterior mean only; skips forming the covariance.
pub fn exact_gaussian_posterior_mean(
    instance: &ProblemInstance,
    prior: &Prior<f64>,
) -> Result<DVector<f64>> {
    let (chol, rhs) = normal_system(instance, gaussian_rho(prior)?)?;
    Ok(chol.solve(&rhs))
}

/// `||beta0_i - est_i||^2 / |I_i|` for every block; empty blocks give 0.
pub fn empirical_block_mmse(
    estimate: &DVector<f64>,
    instance: &ProblemInstance,
) -> Result<Vec<f64>> {
    check_dim(instance.p(), estimate.len())?;
    let beta0 = instance.beta0();
    Ok(instance
        .layout()
        .blocks()
        .iter()
        .map(|r| {
            if r.is_empty() {
                return 0.0;
            }
            let sq: f64 = r.clone().map(|j| (beta0[j] - estimate[j]).powi(2)).sum();
            sq / r.len() as f64
        })
        .collect())
}

/// `||beta0 - est||^2 / p`.
pub fn empirical_mse(estimate: &DVector<f64>, instance: &ProblemInstance) -> Result<f64> {
    check_dim(instance.p(), estimate.len())?;
    Ok((instance.beta0() - estimate).norm_squared() / instance.p() as f64)
}

/// `||Phi (beta0 - est)||^2 / (N p)`.
pub fn empirical_ymmse(estimate: &DVector<f64>, instance: &ProblemInstance) -> Result<f64> {
    check_dim(instance.p(), estimate.len())?;
    let diff = instance.beta0() - estimate;
    let r = instance.phi() * diff;
    Ok(r.norm_squared() / (instance.n() as f64 * instance.p() as f64))
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_array<R: Read, const K: usize>(r: &mut R) -> io::Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    read_array(r).map(u32::from_le_bytes)
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    read_array(r).map(u64::from_le_bytes)
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    read_array(r).map(f64::from_le_bytes)
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("header string of {len} bytes")));
    }
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| Error::Format(e.to_string()))
}

fn read_f64s<R: Read>(r: &mut R, len: usize) -> Result<Vec<f64>> {
    let mut b = vec![0u8; len * 8];
    r.read_exact(&mut b)?;
    Ok(b.chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// Binary container: header, block layout, then `Phi` (column-major),
/// `beta0`, `Z` and `Y` as little-endian `f64`.
pub fn write_instance<W: Write>(instance: &ProblemInstance, w: &mut W) -> Result<()> {
    let spec = instance.spec();
    w.write_all(MAGIC)?;
    write_u32(w, FORMAT_VERSION)?;
    write_u64(w, spec.n as u64)?;
    write_u64(w, spec.p as u64)?;
    write_f64(w, spec.sigma2)?;
    write_u64(w, spec.seed)?;
    write_u64(w, spec.k_bins as u64)?;
    write_str(w, &spec.spectrum.to_string())?;
    write_str(w, &spec.prior.to_string())?;
    let layout = instance.layout();
    write_u32(w, layout.blocks().len() as u32)?;
    for (r, &l) in layout.blocks().iter().zip(layout.block_lambdas()) {
        write_u64(w, r.start as u64)?;
        write_u64(w, r.end as u64)?;
        write_f64(w, l)?;
    }
    write_f64s(w, layout.column_lambdas())?;
    write_f64s(w, instance.phi().as_slice())?;
    write_f64s(w, instance.beta0().as_slice())?;
    write_f64s(w, instance.noise().as_slice())?;
    write_f64s(w, instance.y().as_slice())?;
    Ok(())
}

pub fn read_instance<R: Read>(r: &mut R) -> Result<ProblemInstance> {
    let magic: [u8; 4] = read_array(r)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an instance file".into()));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = read_u64(r)? as usize;
    let p = read_u64(r)? as usize;
    let sigma2 = read_f64(r)?;
    let seed = read_u64(r)?;
    let k_bins = read_u64(r)? as usize;
    let spectrum: SpectrumSpec<f64> = read_str(r)?.parse()?;
    let prior: Prior<f64> = read_str(r)?.parse()?;
    let spec = InstanceSpec {
        n,
        p,
        spectrum,
        prior,
        sigma2,
        seed,
        k_bins,
    };
    spec.validate()?;
    let nblocks = read_u32(r)? as usize;
    // Blocks may be empty when p is smaller than the number of atoms, so the
    // count is only bounded loosely, against corrupt headers.
    if nblocks > p + (1 << 16) {
        return Err(Error::Format(format!("{nblocks} blocks for p = {p}")));
    }
    let mut blocks = Vec::with_capacity(nblocks.min(p));
    let mut block_lambdas = Vec::with_capacity(nblocks.min(p));
    let mut expected_start = 0;
    for _ in 0..nblocks {
        let start = read_u64(r)? as usize;
        let end = read_u64(r)? as usize;
        if start != expected_start || end < start || end > p {
            return Err(Error::Format(format!("bad block {start}..{end}")));
        }
        expected_start = end;
        blocks.push(start..end);
        block_lambdas.push(read_f64(r)?);
    }
    if expected_start != p {
        return Err(Error::Format("blocks do not cover all columns".into()));
    }
    let column_lambdas = read_f64s(r, p)?;
    let layout = BlockLayout {
        blocks,
        block_lambdas,
        column_lambdas,
    };
    let phi = DMatrix::from_vec(n, p, read_f64s(r, n * p)?);
    let beta0 = DVector::from_vec(read_f64s(r, p)?);
    let noise = DVector::from_vec(read_f64s(r, n)?);
    let y = DVector::from_vec(read_f64s(r, n)?);
    let instance = ProblemInstance {
        spec,
        layout,
        phi,
        beta0,
        noise,
        y,
    };
    Ok(instance)
}

/// `Y` as a one-column CSV with header `y`.
pub fn write_y_csv<W: Write>(instance: &ProblemInstance, w: &mut W) -> Result<()> {
    writeln!(w, "y")?;
    for v in instance.y().iter() {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(spectrum: &str, prior: &str, n: usize, p: usize, seed: u64) -> InstanceSpec {
        InstanceSpec::new(
            n,
            p,
            spectrum.parse().unwrap(),
            prior.parse().unwrap(),
            0.1,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn measurement_equation_holds() {
        let inst = sample_instance(&spec("0.9:0.5,0.1:0.5", "rademacher", 40, 20, 3)).unwrap();
        let expect = inst.phi() * inst.beta0() / (20f64).sqrt() + inst.noise();
        assert!((expect - inst.y()).amax() < 1e-12);
    }

    #[test]
    fn same_seed_same_instance() {
        let s = spec("0.5", "gaussian", 30, 10, 9);
        assert_eq!(sample_instance(&s).unwrap(), sample_instance(&s).unwrap());
        assert_ne!(
            sample_instance(&s).unwrap().phi(),
            sample_instance(&s.with_seed(10)).unwrap().phi()
        );
    }

    #[test]
    fn columns_do_not_depend_on_p() {
        let a = sample_instance(&spec("0.3", "rademacher", 12, 4, 1)).unwrap();
        let b = sample_instance(&spec("0.3", "rademacher", 12, 7, 1)).unwrap();
        assert_eq!(a.phi().column(2), b.phi().column(2));
    }

    #[test]
    fn block_sizes_track_weights() {
        for p in [1usize, 7, 10, 33, 1000] {
            let layout = BlockLayout::new(&"0.9,0.7,0.5,0.3,0.1".parse().unwrap(), p, 32).unwrap();
            let mut next = 0;
            for r in layout.blocks() {
                assert_eq!(r.start, next);
                next = r.end;
                assert!((r.len() as f64 / p as f64 - 0.2).abs() <= 1.0 / p as f64 + 1e-12);
            }
            assert_eq!(next, p);
        }
    }

    #[test]
    fn continuous_layout_is_sorted_into_bins() {
        let layout = BlockLayout::new(&"uniform(0.1,0.9)".parse().unwrap(), 100, 4).unwrap();
        assert_eq!(layout.blocks().len(), 4);
        assert!(layout.blocks().iter().all(|r| r.len() == 25));
        for (r, &l) in layout.blocks().iter().zip(layout.block_lambdas()) {
            for j in r.clone() {
                let x = layout.column_lambdas()[j];
                assert!(x >= l && x < l + 0.2 + 1e-12);
            }
        }
    }

    #[test]
    fn posterior_without_information_is_prior() {
        let inst = sample_instance(&spec("0", "gaussian(2)", 5, 3, 0)).unwrap();
        let zero = inst.with_design(DMatrix::zeros(5, 3), inst.beta0().clone());
        let post = exact_gaussian_posterior(&zero, &Prior::gaussian(2.0).unwrap()).unwrap();
        assert!(post.mean.iter().all(|m| m.abs() < 1e-15));
        assert!(
            (post.covariance.clone() - DMatrix::identity(3, 3) * 2.0)
                .abs()
                .max()
                < 1e-14
        );
    }

    #[test]
    fn scalar_conjugate_update() {
        let s = InstanceSpec::new(
            1,
            1,
            "0".parse().unwrap(),
            Prior::gaussian(1.0).unwrap(),
            1.0,
            0,
        )
        .unwrap();
        let layout = s.layout().unwrap();
        let inst = ProblemInstance::from_parts(
            s,
            layout,
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 0.7),
            DVector::from_element(1, 0.3),
        )
        .unwrap();
        let post = exact_gaussian_posterior(&inst, &Prior::gaussian(1.0).unwrap()).unwrap();
        assert!((post.mean[0] - 0.5).abs() < 1e-15);
        assert!((post.covariance[(0, 0)] - 0.5).abs() < 1e-15);
        let mean = exact_gaussian_posterior_mean(&inst, &Prior::gaussian(1.0).unwrap()).unwrap();
        assert_eq!(mean, post.mean);
    }

    #[test]
    fn posterior_rejects_other_priors() {
        let inst = sample_instance(&spec("0", "rademacher", 4, 2, 0)).unwrap();
        assert!(exact_gaussian_posterior(&inst, &Prior::Rademacher).is_err());
        assert!(exact_gaussian_posterior_mean(&inst, &Prior::Rademacher).is_err());
    }

    #[test]
    fn trivial_estimators() {
        let inst = sample_instance(&spec("0.9:0.5,0.1:0.5", "rademacher", 50, 40, 2)).unwrap();
        let b = empirical_block_mmse(inst.beta0(), &inst).unwrap();
        assert!(b.iter().all(|&x| x == 0.0));
        assert_eq!(empirical_ymmse(inst.beta0(), &inst).unwrap(), 0.0);
        let zero = DVector::zeros(40);
        let b = empirical_block_mmse(&zero, &inst).unwrap();
        assert!(b.iter().all(|&x| x == 1.0));
        assert!(empirical_block_mmse(&DVector::zeros(3), &inst).is_err());
    }

    #[test]
    fn binary_round_trip() {
        for (sp, pr) in [
            ("0.9:0.25,0.2:0.75", "discrete(-1:0.3,2:0.7)"),
            ("uniform(0.1,0.9)", "gaussian(0.5)"),
        ] {
            let inst = sample_instance(&spec(sp, pr, 9, 6, 77)).unwrap();
            let mut buf = Vec::new();
            write_instance(&inst, &mut buf).unwrap();
            let back = read_instance(&mut buf.as_slice()).unwrap();
            assert_eq!(back, inst);
            assert!(read_instance(&mut &buf[..buf.len() - 1]).is_err());
        }
    }

    #[test]
    fn y_csv_parses_back() {
        let inst = sample_instance(&spec("0.4", "rademacher", 5, 3, 1)).unwrap();
        let mut buf = Vec::new();
        write_y_csv(&inst, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let vals: Vec<f64> = text.lines().skip(1).map(|l| l.parse().unwrap()).collect();
        assert_eq!(vals.as_slice(), inst.y().as_slice());
    }

    #[test]
    fn rejects_bad_specs() {
        let sp: SpectrumSpec<f64> = "0".parse().unwrap();
        assert!(InstanceSpec::new(0, 3, sp.clone(), Prior::Rademacher, 0.1, 0).is_err());
        assert!(InstanceSpec::new(3, 3, sp.clone(), Prior::Rademacher, 0.0, 0).is_err());
        assert!(InstanceSpec::from_ratio(-1.0, 3, sp, Prior::Rademacher, 0.1, 0).is_err());
    }
}
