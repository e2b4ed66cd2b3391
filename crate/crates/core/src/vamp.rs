//! Vector approximate message passing for `Y = A beta + Z`, `A = Phi / sqrt(p)`.
//!
//! The LMMSE stage works in the eigenbasis of `A^T A`, computed once per
//! instance, so every iteration costs two dense matrix-vector products.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::replica::PredictionReport;
use crate::scalar_channel::{Prior, ScalarChannel};
use crate::synth::{empirical_block_mmse, empirical_mse, ProblemInstance};

/// Where the denoiser input starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VampInit {
    /// `r1 = 0` with precision `gamma`.
    Uninformative { gamma: f64 },
    /// `r1 = beta0 + N(0, 1/gamma)`: starts next to the truth, for probing
    /// whether a bad fixed point is an algorithmic or a statistical barrier.
    Informative { gamma: f64 },
}

impl Default for VampInit {
    fn default() -> Self {
        VampInit::Uninformative { gamma: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VampConfig {
    pub max_iter: usize,
    /// Weight of the new message in the convex update, in `(0, 1]`.
    pub damping: f64,
    /// Precisions are kept in `[min_precision, 1/min_precision]`.
    pub min_precision: f64,
    /// Stop when `||x_t - x_{t-1}|| <= stop_tol ||x_{t-1}||`.
    pub stop_tol: f64,
    pub seed: u64,
    pub init: VampInit,
}

impl Default for VampConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            damping: 0.85,
            min_precision: 1e-8,
            stop_tol: 1e-8,
            seed: 0,
            init: VampInit::default(),
        }
    }
}

impl VampConfig {
    pub fn validate(&self) -> Result<()> {
        let gamma = match self.init {
            VampInit::Uninformative { gamma } | VampInit::Informative { gamma } => gamma,
        };
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Domain(format!(
                "damping {} not in (0, 1]",
                self.damping
            )));
        }
        if !(self.min_precision > 0.0 && self.min_precision < 1.0) {
            return Err(Error::Domain(format!(
                "min_precision {} not in (0, 1)",
                self.min_precision
            )));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::Domain("stop_tol must be positive".into()));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!(
                "initial precision {gamma} must be positive"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
    /// A message became non-finite; the trace stops at the last finite step.
    Diverged,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::Diverged => "diverged",
        })
    }
}

/// State after one full iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct VampStep {
    pub iter: usize,
    /// `||beta0 - x1||^2 / p` for the denoiser estimate.
    pub mse: f64,
    pub block_mse: Vec<f64>,
    /// Mean posterior variance of the denoiser, `alpha1 / gamma1`.
    pub denoiser_var: f64,
    /// Mean posterior variance of the LMMSE stage, `alpha2 / gamma2`.
    pub lmmse_var: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// Clamp events so far.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VampTrace {
    pub steps: Vec<VampStep>,
    pub estimate: DVector<f64>,
    pub termination: Termination,
}

impl VampTrace {
    pub fn final_mse(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.mse)
    }

    pub fn final_block_mse(&self) -> &[f64] {
        self.steps.last().map_or(&[], |s| s.block_mse.as_slice())
    }

    pub fn clamped(&self) -> usize {
        self.steps.last().map_or(0, |s| s.clamped)
    }

    /// Any increase of the MSE over the last `window` iterations.
    pub fn oscillates(&self, window: usize) -> bool {
        let n = self.steps.len();
        let tail = &self.steps[n.saturating_sub(window)..];
        tail.windows(2)
            .any(|w| w[1].mse > w[0].mse * (1.0 + 1e-9) + 1e-15)
    }

    /// CSV with columns `iter, mse, mse_block_1.., gamma1, gamma2, eta1,
    /// eta2, clamped`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let k = self.steps.first().map_or(0, |s| s.block_mse.len());
        write!(w, "iter,mse")?;
        for i in 1..=k {
            write!(w, ",mse_block_{i}")?;
        }
        writeln!(w, ",gamma1,gamma2,eta1,eta2,clamped")?;
        for s in &self.steps {
            write!(w, "{},{:e}", s.iter, s.mse)?;
            for b in &s.block_mse {
                write!(w, ",{b:e}")?;
            }
            writeln!(
                w,
                ",{:e},{:e},{:e},{:e},{}",
                s.gamma1, s.gamma2, s.eta1, s.eta2, s.clamped
            )?;
        }
        Ok(())
    }
}

/// `A^T A = V diag(d) V^T` and `V^T A^T y`, cached per instance.
#[derive(Debug, Clone)]
pub struct LmmseCache {
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    projected_aty: DVector<f64>,
}

impl LmmseCache {
    pub fn new(instance: &ProblemInstance) -> Result<Self> {
        let p = instance.p() as f64;
        let phi = instance.phi();
        let mut gram = phi.tr_mul(phi);
        gram /= p;
        let aty = phi.tr_mul(instance.y()) / p.sqrt();
        let eig = SymmetricEigen::try_new(gram, 1e-13, 10_000)
            .ok_or_else(|| Error::LinearAlgebra("eigendecomposition did not converge".into()))?;
        let eigvals = eig.eigenvalues.map(|d| d.max(0.0));
        let projected_aty = eig.eigenvectors.tr_mul(&aty);
        Ok(Self {
            eigvecs: eig.eigenvectors,
            eigvals,
            projected_aty,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    /// LMMSE estimate for prior `N(r, 1/gamma)` and noise precision
    /// `gamma_w`, with the mean of `gamma / (gamma_w d_i + gamma)`.
    fn estimate(&self, r: &DVector<f64>, gamma: f64, gamma_w: f64) -> (DVector<f64>, f64) {
        let mut z = self.eigvecs.tr_mul(r);
        let mut alpha = 0.0;
        for i in 0..z.len() {
            let s = 1.0 / (gamma_w * self.eigvals[i] + gamma);
            z[i] = s * (gamma_w * self.projected_aty[i] + gamma * z[i]);
            alpha += gamma * s;
        }
        (&self.eigvecs * z, alpha / r.len() as f64)
    }
}

struct Clamp {
    lo: f64,
    hi: f64,
    count: usize,
}

impl Clamp {
    fn apply(&mut self, x: f64) -> f64 {
        if x < self.lo {
            self.count += 1;
            self.lo
        } else if x > self.hi {
            self.count += 1;
            self.hi
        } else {
            x
        }
    }
}

fn mix(new: f64, old: f64, d: f64) -> f64 {
    d * new + (1.0 - d) * old
}

fn mix_vec(new: &DVector<f64>, old: &DVector<f64>, d: f64) -> DVector<f64> {
    new * d + old * (1.0 - d)
}

pub fn vamp_run(
    instance: &ProblemInstance,
    prior: &Prior<f64>,
    config: &VampConfig,
) -> Result<VampTrace> {
    let cache = LmmseCache::new(instance)?;
    vamp_run_cached(instance, &cache, prior, config)
}

/// [`vamp_run`] with a precomputed eigendecomposition.
pub fn vamp_run_cached(
    instance: &ProblemInstance,
    cache: &LmmseCache,
    prior: &Prior<f64>,
    config: &VampConfig,
) -> Result<VampTrace> {
    config.validate()?;
    let p = instance.p();
    if cache.eigvals.len() != p {
        return Err(Error::Dimension {
            expected: p,
            got: cache.eigvals.len(),
        });
    }
    let channel = ScalarChannel::with_default_rule(prior.clone());
    let gamma_w = 1.0 / instance.sigma2();
    let d = config.damping;
    let mut clamp = Clamp {
        lo: config.min_precision,
        hi: 1.0 / config.min_precision,
        count: 0,
    };

    let (mut r1, mut gamma1) = match config.init {
        VampInit::Uninformative { gamma } => (DVector::from_element(p, prior.mean()), gamma),
        VampInit::Informative { gamma } => {
            let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
            let sd = gamma.sqrt().recip();
            let noise = DVector::from_fn(p, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            });
            (instance.beta0() + noise, gamma)
        }
    };
    let mut r2 = DVector::zeros(p);
    let mut gamma2 = 0.0;
    let mut x1 = DVector::zeros(p);
    let mut steps = Vec::new();
    let mut termination = Termination::MaxIter;

    for iter in 1..=config.max_iter {
        let sg = gamma1.sqrt();
        let mut var_sum = 0.0;
        let mut x1_new = DVector::zeros(p);
        for j in 0..p {
            let post = channel.denoise(sg * r1[j], gamma1);
            x1_new[j] = post.mean;
            var_sum += post.variance;
        }
        let denoiser_var = var_sum / p as f64;
        let eta1 = clamp.apply(1.0 / denoiser_var);
        let g2_new = clamp.apply(eta1 - gamma1);
        let r2_new = (&x1_new * eta1 - &r1 * gamma1) / g2_new;
        if iter == 1 {
            r2 = r2_new;
            gamma2 = g2_new;
        } else {
            r2 = mix_vec(&r2_new, &r2, d);
            gamma2 = mix(g2_new, gamma2, d);
        }

        let (x2, alpha2) = cache.estimate(&r2, gamma2, gamma_w);
        let lmmse_var = alpha2 / gamma2;
        let eta2 = clamp.apply(gamma2 / alpha2);
        let g1_new = clamp.apply(eta2 - gamma2);
        let r1_new = (&x2 * eta2 - &r2 * gamma2) / g1_new;
        r1 = mix_vec(&r1_new, &r1, d);
        gamma1 = mix(g1_new, gamma1, d);

        let finite = x1_new.iter().all(|v| v.is_finite())
            && r1.iter().all(|v| v.is_finite())
            && gamma1.is_finite()
            && gamma2.is_finite();
        if !finite {
            termination = Termination::Diverged;
            break;
        }
        let change = (&x1_new - &x1).norm();
        let scale = x1.norm();
        x1 = x1_new;
        steps.push(VampStep {
            iter,
            mse: empirical_mse(&x1, instance)?,
            block_mse: empirical_block_mmse(&x1, instance)?,
            denoiser_var,
            lmmse_var,
            gamma1,
            gamma2,
            eta1,
            eta2,
            clamped: clamp.count,
        });
        if iter > 1 && change <= config.stop_tol * scale {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(VampTrace {
        steps,
        estimate: x1,
        termination,
    })
}

/// Right rotation applied to the design.
#[derive(Debug, Clone, PartialEq)]
pub enum Rotation {
    Identity,
    /// Haar orthogonal matrix drawn from this seed.
    Haar {
        seed: u64,
    },
    Explicit(DMatrix<f64>),
}

/// Haar-distributed orthogonal `p x p` matrix: QR of a Gaussian matrix with
/// the signs of `diag(R)` moved into `Q`.
pub fn haar_orthogonal(p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Phi' = Phi U`, `beta0' = U^T beta0`; `Y` is carried over unchanged.
pub fn rotate_instance(instance: &ProblemInstance, rotation: &Rotation) -> Result<ProblemInstance> {
    let u = match rotation {
        Rotation::Identity => return Ok(instance.clone()),
        Rotation::Haar { seed } => haar_orthogonal(instance.p(), *seed),
        Rotation::Explicit(u) => {
            if u.nrows() != instance.p() || u.ncols() != instance.p() {
                return Err(Error::Dimension {
                    expected: instance.p(),
                    got: u.nrows().max(u.ncols()),
                });
            }
            u.clone()
        }
    };
    let phi = instance.phi() * &u;
    let beta0 = u.tr_mul(instance.beta0());
    Ok(instance.with_design(phi, beta0))
}

/// Haar rotation for Gaussian-prior instances, whose law is invariant under it.
pub fn rotate_gaussian_instance(instance: &ProblemInstance, seed: u64) -> Result<ProblemInstance> {
    if !instance.spec().prior.is_gaussian() {
        return Err(Error::Prior(format!(
            "rotation preserves the law only for a gaussian prior, got {}",
            instance.spec().prior
        )));
    }
    rotate_instance(instance, &Rotation::Haar { seed })
}

/// Spread of final MSEs across runs at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub runs: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
    /// Share of runs whose final MSE is within 10% of the prediction.
    pub within_10pct: f64,
    /// Share of runs whose MSE rose during the last 20 iterations.
    pub oscillating: f64,
    pub diverged: usize,
}

impl StabilityReport {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

/// Mean, min, max and sample std of a non-empty slice.
pub fn summarize(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, min, max, var.sqrt())
}

pub fn stability_report(
    traces: &[VampTrace],
    prediction: &PredictionReport<f64>,
) -> Result<StabilityReport> {
    if traces.len() < 2 {
        return Err(Error::Domain("stability needs at least two runs".into()));
    }
    let finals: Vec<f64> = traces.iter().map(VampTrace::final_mse).collect();
    let (mean, min, max, std) = summarize(&finals);
    let target = prediction.mmse_total;
    let n = traces.len() as f64;
    let close = finals
        .iter()
        .filter(|&&m| (m - target).abs() <= 0.1 * target.abs())
        .count();
    let osc = traces.iter().filter(|t| t.oscillates(20)).count();
    Ok(StabilityReport {
        runs: traces.len(),
        mean,
        min,
        max,
        std,
        within_10pct: close as f64 / n,
        oscillating: osc as f64 / n,
        diverged: traces
            .iter()
            .filter(|t| t.termination == Termination::Diverged)
            .count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{exact_gaussian_posterior, sample_instance, InstanceSpec};

    fn instance(
        spectrum: &str,
        prior: &str,
        c: f64,
        p: usize,
        sigma2: f64,
        seed: u64,
    ) -> ProblemInstance {
        let spec = InstanceSpec::from_ratio(
            c,
            p,
            spectrum.parse().unwrap(),
            prior.parse().unwrap(),
            sigma2,
            seed,
        )
        .unwrap();
        sample_instance(&spec).unwrap()
    }

    #[test]
    fn huge_noise_gives_prior_mean() {
        let inst = instance("0", "rademacher", 1.0, 64, 1e4, 1);
        let t = vamp_run(&inst, &Prior::Rademacher, &VampConfig::default()).unwrap();
        assert!(t.estimate.amax() < 0.05);
        assert!((t.final_mse() - 1.0).abs() < 0.05);
    }

    #[test]
    fn gaussian_prior_reaches_exact_posterior() {
        let inst = instance("0.9:0.5,0.1:0.5", "gaussian", 2.0, 80, 0.1, 4);
        let prior = Prior::gaussian(1.0).unwrap();
        let rot = rotate_gaussian_instance(&inst, 11).unwrap();
        let exact = exact_gaussian_posterior(&rot, &prior).unwrap();
        let t = vamp_run(&rot, &prior, &VampConfig::default()).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        // Gaussian VAMP's fixed point is the exact LMMSE estimate.
        assert!((&t.estimate - &exact.mean).amax() < 1e-6);
    }

    #[test]
    fn identity_rotation_is_bitwise_noop() {
        let inst = instance("0.5", "gaussian", 1.5, 10, 0.1, 2);
        assert_eq!(rotate_instance(&inst, &Rotation::Identity).unwrap(), inst);
    }

    #[test]
    fn rotation_preserves_measurements() {
        let inst = instance("0.7", "gaussian", 1.5, 12, 0.1, 2);
        let rot = rotate_gaussian_instance(&inst, 5).unwrap();
        let y = rot.phi() * rot.beta0() / (12f64).sqrt() + rot.noise();
        assert!((y - inst.y()).amax() < 1e-10);
        assert!((rot.beta0().norm() - inst.beta0().norm()).abs() < 1e-10);
        let bad = instance("0.7", "rademacher", 1.5, 12, 0.1, 2);
        assert!(rotate_gaussian_instance(&bad, 5).is_err());
    }

    #[test]
    fn haar_matrix_is_orthogonal() {
        let u = haar_orthogonal(20, 3);
        assert!((u.tr_mul(&u) - DMatrix::identity(20, 20)).amax() < 1e-12);
    }

    #[test]
    fn deterministic_and_csv_shape() {
        let inst = instance("0.9,0.1", "rademacher", 2.0, 60, 0.1, 8);
        let cfg = VampConfig::default();
        let a = vamp_run(&inst, &Prior::Rademacher, &cfg).unwrap();
        let b = vamp_run(&inst, &Prior::Rademacher, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.steps.len() <= cfg.max_iter);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iter,mse,mse_block_1,mse_block_2,gamma1,gamma2,eta1,eta2,clamped"
        );
        assert_eq!(lines.count(), a.steps.len());
    }

    #[test]
    fn stability_of_identical_traces() {
        let inst = instance("0", "rademacher", 2.0, 40, 0.1, 1);
        let t = vamp_run(&inst, &Prior::Rademacher, &VampConfig::default()).unwrap();
        let pred = PredictionReport {
            mmse_per_block: vec![t.final_mse()],
            mmse_total: t.final_mse(),
            ymmse: 0.0,
            mutual_info: 0.0,
        };
        let rep = stability_report(&[t.clone(), t.clone()], &pred).unwrap();
        assert_eq!(rep.spread(), 0.0);
        assert_eq!(rep.std, 0.0);
        assert_eq!(rep.within_10pct, 1.0);
        assert!(stability_report(&[t], &pred).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            VampConfig {
                damping: 0.0,
                ..Default::default()
            },
            VampConfig {
                damping: 1.5,
                ..Default::default()
            },
            VampConfig {
                max_iter: 0,
                ..Default::default()
            },
            VampConfig {
                min_precision: 0.0,
                ..Default::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
