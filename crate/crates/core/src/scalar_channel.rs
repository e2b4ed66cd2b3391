//! The scalar Gaussian channel `Y = sqrt(r) * beta + Z`, `Z ~ N(0, 1)`.
//!
//! Mutual information is in nats. For discrete priors every expectation over
//! the channel output is a one-dimensional Gaussian integral evaluated with a
//! [`GaussianExpectation`] rule, and all posterior weights go through
//! log-sum-exp so that large `r` does not overflow.
//!
//! The Gaussian prior is accepted for convenience even though the asymptotic
//! theory assumes a compactly supported prior.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quadrature::{GaussianExpectation, GaussianRule};
use crate::real::log_sum_exp;
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePrior<T> {
    atoms: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> DiscretePrior<T> {
    /// Weights are normalized to one.
    pub fn new(pairs: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        let (atoms, raw): (Vec<T>, Vec<T>) = pairs.into_iter().unzip();
        if atoms.is_empty() {
            return Err(Error::Prior(
                "discrete prior needs at least one atom".into(),
            ));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::Prior("discrete prior atoms must be finite".into()));
        }
        if raw.iter().any(|w| !(*w > T::zero() && w.is_finite())) {
            return Err(Error::Prior(
                "discrete prior weights must be positive".into(),
            ));
        }
        let total = raw.iter().fold(T::zero(), |a, &w| a + w);
        Ok(Self {
            atoms,
            weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn atoms(&self) -> &[T] {
        &self.atoms
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

/// Signal prior `P0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior<T> {
    /// Uniform on `{-1, +1}`.
    Rademacher,
    /// `N(0, rho)`.
    Gaussian {
        rho: T,
    },
    Discrete(DiscretePrior<T>),
}

impl<T: Real> Prior<T> {
    pub fn gaussian(rho: T) -> Result<Self> {
        if !(rho > T::zero() && rho.is_finite()) {
            return Err(Error::Prior(format!(
                "gaussian variance {rho} must be positive"
            )));
        }
        Ok(Prior::Gaussian { rho })
    }

    pub fn discrete(pairs: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        DiscretePrior::new(pairs).map(Prior::Discrete)
    }

    /// Second moment `E beta^2`.
    pub fn rho(&self) -> T {
        match self {
            Prior::Rademacher => T::one(),
            Prior::Gaussian { rho } => *rho,
            Prior::Discrete(d) => d
                .atoms
                .iter()
                .zip(&d.weights)
                .fold(T::zero(), |acc, (&a, &w)| acc + w * a * a),
        }
    }

    pub fn mean(&self) -> T {
        match self {
            Prior::Rademacher | Prior::Gaussian { .. } => T::zero(),
            Prior::Discrete(d) => d
                .atoms
                .iter()
                .zip(&d.weights)
                .fold(T::zero(), |acc, (&a, &w)| acc + w * a),
        }
    }

    pub fn variance(&self) -> T {
        let m = self.mean();
        self.rho() - m * m
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Prior::Gaussian { .. })
    }

    /// Short identifier used in CSV output.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

/// Posterior mean and variance of `beta` given one channel output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior<T> {
    pub mean: T,
    pub variance: T,
}

/// A prior together with the integration rule used for channel averages.
#[derive(Debug, Clone)]
pub struct ScalarChannel<T> {
    prior: Prior<T>,
    gauss: GaussianExpectation<T>,
}

/// `ln cosh(x)` without overflow.
fn ln_cosh<T: Real>(x: T) -> T {
    let a = x.abs();
    a + (T::lit(-2.0) * a).exp().ln_1p() - T::LN_2()
}

impl<T: Real> ScalarChannel<T> {
    pub fn new(prior: Prior<T>, rule: GaussianRule) -> Self {
        Self {
            prior,
            gauss: GaussianExpectation::new(rule),
        }
    }

    pub fn with_default_rule(prior: Prior<T>) -> Self {
        Self::new(prior, GaussianRule::default())
    }

    pub fn prior(&self) -> &Prior<T> {
        &self.prior
    }

    pub fn rule(&self) -> GaussianRule {
        self.gauss.rule()
    }

    /// `E (beta - E[beta | Y])^2`.
    pub fn mmse(&self, r: T) -> T {
        let r = r.max(T::zero());
        match &self.prior {
            Prior::Gaussian { rho } => *rho / (T::one() + *rho * r),
            Prior::Rademacher => {
                if r == T::zero() {
                    return T::one();
                }
                let sr = r.sqrt();
                let e = self.gauss.expect(|z| {
                    let t = (r + sr * z).tanh();
                    t * t
                });
                (T::one() - e).max(T::zero()).min(T::one())
            }
            Prior::Discrete(d) => {
                if r == T::zero() {
                    return self.prior.variance();
                }
                let sr = r.sqrt();
                let mut logits = vec![T::zero(); d.atoms.len()];
                let mut total = T::zero();
                for (&aj, &wj) in d.atoms.iter().zip(&d.weights) {
                    let e = self.gauss.expect(|z| {
                        let m = discrete_posterior(d, sr * aj + z, r, &mut logits).mean;
                        (aj - m) * (aj - m)
                    });
                    total += wj * e;
                }
                total.max(T::zero())
            }
        }
    }

    /// `I(beta; sqrt(r) beta + Z)` in nats.
    pub fn mutual_info(&self, r: T) -> T {
        let r = r.max(T::zero());
        if r == T::zero() {
            return T::zero();
        }
        match &self.prior {
            Prior::Gaussian { rho } => T::lit(0.5) * (*rho * r).ln_1p(),
            Prior::Rademacher => {
                let sr = r.sqrt();
                let e = self.gauss.expect(|z| ln_cosh(r + sr * z));
                (r - e).max(T::zero())
            }
            Prior::Discrete(d) => {
                let sr = r.sqrt();
                let half = T::lit(0.5);
                let log_w: Vec<T> = d.weights.iter().map(|w| w.ln()).collect();
                let mut terms = vec![T::zero(); d.atoms.len()];
                let mut total = T::zero();
                for (&aj, &wj) in d.atoms.iter().zip(&d.weights) {
                    let e = self.gauss.expect(|z| {
                        for ((t, &ak), &lw) in terms.iter_mut().zip(&d.atoms).zip(&log_w) {
                            let diff = ak - aj;
                            *t = lw + sr * diff * z - half * r * diff * diff;
                        }
                        log_sum_exp(&terms)
                    });
                    total -= wj * e;
                }
                total.max(T::zero())
            }
        }
    }

    /// `E[beta | sqrt(r) beta + Z = y]` and the posterior variance.
    pub fn denoise(&self, y: T, r: T) -> Posterior<T> {
        let r = r.max(T::zero());
        match &self.prior {
            Prior::Gaussian { rho } => {
                let denom = T::one() + *rho * r;
                Posterior {
                    mean: *rho * r.sqrt() * y / denom,
                    variance: *rho / denom,
                }
            }
            Prior::Rademacher => {
                let m = (r.sqrt() * y).tanh();
                Posterior {
                    mean: m,
                    variance: (T::one() - m * m).max(T::zero()),
                }
            }
            Prior::Discrete(d) => {
                let mut logits = vec![T::zero(); d.atoms.len()];
                discrete_posterior(d, y, r, &mut logits)
            }
        }
    }
}

fn discrete_posterior<T: Real>(d: &DiscretePrior<T>, y: T, r: T, logits: &mut [T]) -> Posterior<T> {
    let sr = r.sqrt();
    let half = T::lit(0.5);
    for ((l, &a), &w) in logits.iter_mut().zip(&d.atoms).zip(&d.weights) {
        *l = w.ln() + sr * a * y - half * r * a * a;
    }
    let lse = log_sum_exp(logits);
    let mut m1 = T::zero();
    let mut m2 = T::zero();
    for (&l, &a) in logits.iter().zip(&d.atoms) {
        let p = (l - lse).exp();
        m1 += p * a;
        m2 += p * a * a;
    }
    Posterior {
        mean: m1,
        variance: (m2 - m1 * m1).max(T::zero()),
    }
}

pub fn scalar_mmse<T: Real>(prior: &Prior<T>, r: T) -> T {
    ScalarChannel::with_default_rule(prior.clone()).mmse(r)
}

pub fn scalar_mutual_info<T: Real>(prior: &Prior<T>, r: T) -> T {
    ScalarChannel::with_default_rule(prior.clone()).mutual_info(r)
}

pub fn posterior_mean_denoiser<T: Real>(prior: &Prior<T>, y: T, r: T) -> Posterior<T> {
    ScalarChannel::with_default_rule(prior.clone()).denoise(y, r)
}

impl<T: Real> fmt::Display for Prior<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Rademacher => f.write_str("rademacher"),
            Prior::Gaussian { rho } => write!(f, "gaussian({rho})"),
            Prior::Discrete(d) => {
                f.write_str("discrete(")?;
                for (i, (a, w)) in d.atoms.iter().zip(&d.weights).enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}:{w}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl<T: Real> FromStr for Prior<T> {
    type Err = Error;

    /// `rademacher`, `gaussian`, `gaussian(rho)`, `discrete(a1:w1, a2:w2, ...)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let lower = t.to_ascii_lowercase();
        let number = |x: &str| -> Result<T> {
            x.trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|_| Error::parse(s, format!("`{}` is not a number", x.trim())))
        };
        if lower == "rademacher" {
            return Ok(Prior::Rademacher);
        }
        if lower == "gaussian" {
            return Prior::gaussian(T::one());
        }
        let call = |name: &str| -> Option<String> {
            lower
                .strip_prefix(name)
                .map(str::trim_start)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(str::to_string)
        };
        if let Some(body) = call("gaussian") {
            return Prior::gaussian(number(&body)?);
        }
        if let Some(body) = call("discrete") {
            let mut pairs = Vec::new();
            for item in body.split(',') {
                let (a, w) = item
                    .split_once(':')
                    .ok_or_else(|| Error::parse(s, "discrete atoms are written `value:weight`"))?;
                pairs.push((number(a)?, number(w)?));
            }
            return Prior::discrete(pairs);
        }
        Err(Error::parse(
            s,
            "expected rademacher, gaussian(rho) or discrete(a:w, ...)",
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn priors() -> Vec<Prior<f64>> {
        vec![
            Prior::Rademacher,
            Prior::gaussian(1.0).unwrap(),
            Prior::gaussian(2.5).unwrap(),
            Prior::discrete([(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]).unwrap(),
            Prior::discrete([(-2.0, 0.2), (0.5, 0.8)]).unwrap(),
        ]
    }

    #[test]
    fn zero_snr_limits() {
        for p in priors() {
            let ch = ScalarChannel::with_default_rule(p.clone());
            assert!((ch.mmse(0.0) - p.variance()).abs() < 1e-14, "{p}");
            assert_eq!(ch.mutual_info(0.0), 0.0);
        }
        assert_eq!(scalar_mmse(&Prior::Rademacher, 0.0), 1.0);
    }

    #[test]
    fn gaussian_closed_forms() {
        let p = Prior::<f64>::gaussian(2.0).unwrap();
        for &r in &[0.1, 1.0, 7.0] {
            assert!((scalar_mmse(&p, r) - 2.0 / (1.0 + 2.0 * r)).abs() < 1e-15);
            assert!((scalar_mutual_info(&p, r) - 0.5 * (1.0 + 2.0 * r).ln()).abs() < 1e-15);
        }
        let post = posterior_mean_denoiser(&Prior::<f64>::gaussian(1.0).unwrap(), 2.0, 1.0);
        assert!((post.mean - 1.0).abs() < 1e-15);
        assert!((post.variance - 0.5).abs() < 1e-15);
    }

    #[test]
    fn denoiser_examples() {
        let post = posterior_mean_denoiser(&Prior::Rademacher, 0.0, 3.7);
        assert_eq!(post.mean, 0.0);
        assert_eq!(post.variance, 1.0);
        let two = Prior::discrete([(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let post = posterior_mean_denoiser(&two, 1.5, 4.0);
        let t = 3.0f64.tanh();
        assert!((post.mean - t).abs() < 1e-15);
        assert!((post.variance - (1.0 - t * t)).abs() < 1e-14);
    }

    #[test]
    fn discrete_two_point_matches_rademacher() {
        let two =
            ScalarChannel::with_default_rule(Prior::discrete([(-1.0, 1.0), (1.0, 1.0)]).unwrap());
        let rad = ScalarChannel::with_default_rule(Prior::<f64>::Rademacher);
        for &r in &[0.05, 0.5, 2.0, 9.0] {
            assert!((two.mmse(r) - rad.mmse(r)).abs() < 1e-12, "r={r}");
            assert!(
                (two.mutual_info(r) - rad.mutual_info(r)).abs() < 1e-12,
                "r={r}"
            );
        }
    }

    #[test]
    fn huge_snr_is_stable() {
        for p in priors() {
            let ch = ScalarChannel::with_default_rule(p.clone());
            for &r in &[700.0, 5e3, 1e6] {
                let m = ch.mmse(r);
                let i = ch.mutual_info(r);
                assert!(m.is_finite() && i.is_finite(), "{p} r={r}");
                if !p.is_gaussian() {
                    assert!(m < 1e-6, "{p} r={r} mmse={m}");
                }
            }
            let post = ch.denoise(40.0, 1e4);
            assert!(post.mean.is_finite() && post.variance.is_finite());
        }
    }

    #[test]
    fn rademacher_monotone_and_bounded() {
        let ch = ScalarChannel::with_default_rule(Prior::<f64>::Rademacher);
        let mut prev = 1.0;
        for i in 1..200 {
            let m = ch.mmse(i as f64 * 0.05);
            assert!((0.0..=1.0).contains(&m));
            assert!(m <= prev + 1e-15);
            prev = m;
        }
    }

    #[test]
    fn hermite_rule_is_selectable() {
        let gh = ScalarChannel::new(
            Prior::<f64>::Rademacher,
            GaussianRule::GaussHermite { nodes: 61 },
        );
        let tr = ScalarChannel::with_default_rule(Prior::<f64>::Rademacher);
        assert!((gh.mmse(0.5) - tr.mmse(0.5)).abs() < 1e-10);
        assert_eq!(gh.rule(), GaussianRule::GaussHermite { nodes: 61 });
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(
            "rademacher".parse::<Prior<f64>>().unwrap(),
            Prior::Rademacher
        );
        assert_eq!(
            "Gaussian(2)".parse::<Prior<f64>>().unwrap(),
            Prior::Gaussian { rho: 2.0 }
        );
        assert_eq!(
            "gaussian".parse::<Prior<f64>>().unwrap(),
            Prior::Gaussian { rho: 1.0 }
        );
        let d: Prior<f64> = "discrete(-1:1, 1:3)".parse().unwrap();
        assert_eq!(d.to_string(), "discrete(-1:0.25,1:0.75)");
        assert_eq!(d.to_string().parse::<Prior<f64>>().unwrap(), d);
        assert!((d.rho() - 1.0).abs() < 1e-15);
        assert!("gaussian(-1)".parse::<Prior<f64>>().is_err());
        assert!("laplace(1)".parse::<Prior<f64>>().is_err());
        assert!("discrete(1)".parse::<Prior<f64>>().is_err());
    }

    #[test]
    fn f32_channel_agrees_with_f64() {
        let c32 = ScalarChannel::with_default_rule(Prior::<f32>::Rademacher);
        let c64 = ScalarChannel::with_default_rule(Prior::<f64>::Rademacher);
        for &r in &[0.3f32, 1.0, 4.0] {
            assert!((c32.mmse(r) as f64 - c64.mmse(r as f64)).abs() < 1e-5);
            assert!((c32.mutual_info(r) as f64 - c64.mutual_info(r as f64)).abs() < 1e-5);
        }
    }
}
