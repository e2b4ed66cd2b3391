//! Fixed quadrature rules.
//!
//! Nodes and weights are always computed in `f64` and then cast, so a rule of a
//! given order is bit-identical between runs regardless of the scalar type.

use std::f64::consts::PI;

use crate::Real;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, via Newton iteration on `P_n`.
pub fn gauss_legendre_f64(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Probabilists' Gauss-Hermite rule: nodes `z_i`, weights `w_i` with
/// `sum_i w_i f(z_i) ~ E f(Z)`, `Z ~ N(0, 1)`.
pub fn gauss_hermite_f64(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    // Orthonormal physicists' recurrence, initial guesses as in the classical routine.
    let pim4 = PI.powf(-0.25);
    let mut nodes = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0].0,
            3 => 1.91 * z - 0.91 * nodes[1].0,
            _ => 2.0 * z - nodes[i - 2].0,
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let w = 2.0 / (pp * pp);
        nodes[i] = (z, w);
        nodes[n - 1 - i] = (-z, w);
    }
    // Convert exp(-x^2) weights to the standard normal measure.
    let scale = 1.0 / PI.sqrt();
    nodes
        .into_iter()
        .rev()
        .map(|(x, w)| (x * std::f64::consts::SQRT_2, w * scale))
        .collect()
}

/// `(1/pi) * integral over [0, pi]` evaluated with a Gauss-Legendre rule.
///
/// The weights already carry the `1/pi` normalization, so they sum to one and
/// `mean(|_| 1) == 1` up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature<T> {
    theta: Vec<T>,
    cos_theta: Vec<T>,
    // sin^2(theta / 2), for cancellation-free 1 - 2 l cos(theta) + l^2
    sin_half_sq: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> AngularQuadrature<T> {
    pub const DEFAULT_NODES: usize = 2048;

    pub fn new(nodes: usize) -> Self {
        assert!(nodes >= 2, "angular quadrature needs at least two nodes");
        let rule = gauss_legendre_f64(nodes);
        let mut theta = Vec::with_capacity(nodes);
        let mut cos_theta = Vec::with_capacity(nodes);
        let mut sin_half_sq = Vec::with_capacity(nodes);
        let mut weights = Vec::with_capacity(nodes);
        for (x, w) in rule {
            let t = 0.5 * PI * (x + 1.0);
            theta.push(T::lit(t));
            cos_theta.push(T::lit(t.cos()));
            sin_half_sq.push(T::lit((0.5 * t).sin().powi(2)));
            // (1/pi) * (pi/2) * w
            weights.push(T::lit(0.5 * w));
        }
        Self {
            theta,
            cos_theta,
            sin_half_sq,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn cos_theta(&self) -> &[T] {
        &self.cos_theta
    }

    pub fn sin_half_sq(&self) -> &[T] {
        &self.sin_half_sq
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `(1/pi) * int_0^pi f(theta) dtheta`.
    pub fn mean<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        self.theta
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&t, &w)| acc + w * f(t))
    }
}

impl<T: Real> Default for AngularQuadrature<T> {
    fn default() -> Self {
        Self::new(Self::DEFAULT_NODES)
    }
}

/// How to approximate `E f(Z)` for a standard normal `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussianRule {
    /// Trapezoid rule on `[-half_width, half_width]`. Converges geometrically for
    /// the analytic integrands of the scalar channel.
    Trapezoid {
        points: usize,
        half_width: f64,
    },
    GaussHermite {
        nodes: usize,
    },
}

impl Default for GaussianRule {
    fn default() -> Self {
        GaussianRule::Trapezoid {
            points: 801,
            half_width: 10.0,
        }
    }
}

/// Precomputed nodes for expectations over a standard normal variable.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianExpectation<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
    rule: GaussianRule,
}

impl<T: Real> GaussianExpectation<T> {
    pub fn new(rule: GaussianRule) -> Self {
        let pairs: Vec<(f64, f64)> = match rule {
            GaussianRule::Trapezoid { points, half_width } => {
                assert!(points >= 3 && half_width > 0.0, "invalid trapezoid rule");
                let h = 2.0 * half_width / (points - 1) as f64;
                let raw: Vec<(f64, f64)> = (0..points)
                    .map(|i| {
                        let z = -half_width + h * i as f64;
                        let end = if i == 0 || i + 1 == points { 0.5 } else { 1.0 };
                        (z, end * h * (-0.5 * z * z).exp())
                    })
                    .collect();
                let total: f64 = raw.iter().map(|(_, w)| w).sum();
                raw.into_iter().map(|(z, w)| (z, w / total)).collect()
            }
            GaussianRule::GaussHermite { nodes } => gauss_hermite_f64(nodes),
        };
        Self {
            nodes: pairs.iter().map(|&(z, _)| T::lit(z)).collect(),
            weights: pairs.iter().map(|&(_, w)| T::lit(w)).collect(),
            rule,
        }
    }

    pub fn rule(&self) -> GaussianRule {
        self.rule
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn expect<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&z, &w)| acc + w * f(z))
    }
}

impl<T: Real> Default for GaussianExpectation<T> {
    fn default() -> Self {
        Self::new(GaussianRule::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in [2usize, 5, 16, 64] {
            let rule = gauss_legendre_f64(n);
            let wsum: f64 = rule.iter().map(|(_, w)| w).sum();
            assert!((wsum - 2.0).abs() < 1e-13, "n={n}");
            // degree 2n-1 monomial integral over [-1,1]
            let deg = 2 * n - 2;
            let got: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
            let want = 2.0 / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-12, "n={n} got={got} want={want}");
        }
    }

    #[test]
    fn legendre_nodes_sorted_and_symmetric() {
        let rule = gauss_legendre_f64(2048);
        assert!(rule.windows(2).all(|w| w[0].0 < w[1].0));
        for i in 0..rule.len() {
            assert!((rule[i].0 + rule[rule.len() - 1 - i].0).abs() < 1e-15);
        }
    }

    #[test]
    fn hermite_matches_normal_moments() {
        for n in [5usize, 20, 61] {
            let rule = gauss_hermite_f64(n);
            let m0: f64 = rule.iter().map(|(_, w)| w).sum();
            let m2: f64 = rule.iter().map(|(z, w)| w * z * z).sum();
            let m4: f64 = rule.iter().map(|(z, w)| w * z.powi(4)).sum();
            assert!((m0 - 1.0).abs() < 1e-12, "n={n}");
            assert!((m2 - 1.0).abs() < 1e-11, "n={n}");
            assert!((m4 - 3.0).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn trapezoid_matches_normal_moments() {
        let e: GaussianExpectation<f64> = GaussianExpectation::default();
        assert!((e.expect(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((e.expect(|z| z * z) - 1.0).abs() < 1e-12);
        assert!((e.expect(|z| z.powi(4)) - 3.0).abs() < 1e-11);
        assert!((e.expect(|z| z.cos()) - (-0.5f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn angular_mean_of_cosine_powers() {
        let q: AngularQuadrature<f64> = AngularQuadrature::new(64);
        assert!((q.mean(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!(q.mean(|t| t.cos()).abs() < 1e-14);
        assert!((q.mean(|t| t.cos().powi(2)) - 0.5).abs() < 1e-14);
        assert!((q.mean(|t| t) - PI / 2.0).abs() < 1e-13);
    }
}
