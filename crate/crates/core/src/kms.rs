//! Kac-Murdock-Szegő covariances and the spectral integrals built on them.
//!
//! The covariance of a design column with AR(1) coefficient `lambda` is the
//! Toeplitz matrix `lambda^|mu-nu| / (1 - lambda^2)`. Its eigenvalues are
//! asymptotically distributed as `delta(Theta, lambda)` with `Theta` uniform on
//! `[0, pi]`, which is why every asymptotic formula in this crate reduces to
//! angular averages of [`generating_function`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quadrature::AngularQuadrature;
use crate::Real;

/// Largest KMS matrix that will be materialized densely.
pub const MAX_DENSE_DIM: usize = 4096;

/// `delta(theta, lambda) = 1 / (1 - 2 lambda cos(theta) + lambda^2)`.
pub fn generating_function<T: Real>(theta: T, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    if !(theta >= T::zero() && theta <= T::PI()) {
        return Err(Error::Domain(format!("theta = {theta} outside [0, pi]")));
    }
    let half = (T::lit(0.5) * theta).sin();
    Ok(delta_from_sin_half_sq(half * half, lambda))
}

/// `1 - 2 l cos(theta) + l^2 = (1 - l)^2 + 4 l sin^2(theta/2)`; the right-hand
/// side has no cancellation for `l` near one.
#[inline]
pub(crate) fn delta_from_sin_half_sq<T: Real>(sin_half_sq: T, lambda: T) -> T {
    let gap = T::one() - lambda;
    T::one() / (gap * gap + T::lit(4.0) * lambda * sin_half_sq)
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if lambda >= T::zero() && lambda < T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "AR coefficient {lambda} outside [0, 1)"
        )))
    }
}

/// `(1/pi) * int_0^pi f(theta) dtheta` with a Gauss-Legendre rule of `nodes` points.
pub fn spectral_integral<T: Real, F: FnMut(T) -> T>(integrand: F, nodes: usize) -> T {
    AngularQuadrature::new(nodes).mean(integrand)
}

/// Dense KMS covariance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KmsMatrix<T> {
    lambda: T,
    dim: usize,
    entries: Vec<T>,
}

pub fn kms_matrix<T: Real>(lambda: T, dim: usize) -> Result<KmsMatrix<T>> {
    check_lambda(lambda)?;
    if dim == 0 || dim > MAX_DENSE_DIM {
        return Err(Error::Domain(format!(
            "KMS dimension {dim} outside 1..={MAX_DENSE_DIM}"
        )));
    }
    let scale = T::one() / (T::one() - lambda * lambda);
    // powers[d] = lambda^d / (1 - lambda^2)
    let mut powers = Vec::with_capacity(dim);
    for d in 0..dim {
        powers.push(lambda.powi(d as i32) * scale);
    }
    let mut entries = Vec::with_capacity(dim * dim);
    for mu in 0..dim {
        for nu in 0..dim {
            entries.push(powers[mu.abs_diff(nu)]);
        }
    }
    Ok(KmsMatrix {
        lambda,
        dim,
        entries,
    })
}

impl<T: Real> KmsMatrix<T> {
    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, mu: usize, nu: usize) -> T {
        self.entries[mu * self.dim + nu]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn trace(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, i| acc + self.entry(i, i))
    }
}

impl KmsMatrix<f64> {
    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = nalgebra::SymmetricEigen::new(self.to_dmatrix());
        let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        values.sort_by(|a, b| a.total_cmp(b));
        values
    }
}

/// CDF of `delta(Theta, lambda)` for `Theta ~ Uniform[0, pi]`.
pub fn pushforward_cdf(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if x >= 1.0 { 1.0 } else { 0.0 };
    }
    let lo = 1.0 / ((1.0 + lambda) * (1.0 + lambda));
    let hi = 1.0 / ((1.0 - lambda) * (1.0 - lambda));
    if x <= lo {
        return 0.0;
    }
    if x >= hi {
        return 1.0;
    }
    // delta is decreasing in theta: P(delta <= x) = P(Theta >= theta_x)
    let cos = ((1.0 + lambda * lambda - 1.0 / x) / (2.0 * lambda)).clamp(-1.0, 1.0);
    1.0 - cos.acos() / std::f64::consts::PI
}

/// Kolmogorov distance between the empirical CDF of `sorted` and the
/// angular pushforward law of `delta(., lambda)`.
pub fn kolmogorov_distance_to_law(sorted: &[f64], lambda: f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = pushforward_cdf(x, lambda);
            let above = ((i + 1) as f64 / n - f).abs();
            let below = (f - i as f64 / n).abs();
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// One eigenvalue atom `(lambda_i, l_i)` of the AR coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom<T> {
    pub lambda: T,
    pub weight: T,
}

/// Finitely many distinct AR coefficients with limiting proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpectrum<T> {
    atoms: Vec<Atom<T>>,
    original_weight_sum: T,
}

impl<T: Real> DiscreteSpectrum<T> {
    /// Weights are normalized to sum to one; the raw sum is kept for reference.
    pub fn new(atoms: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        let raw: Vec<(T, T)> = atoms.into_iter().collect();
        if raw.is_empty() {
            return Err(Error::Spectrum("no atoms".into()));
        }
        let mut sum = T::zero();
        for &(lambda, weight) in &raw {
            check_lambda(lambda).map_err(|e| Error::Spectrum(e.to_string()))?;
            if !(weight > T::zero() && weight.is_finite()) {
                return Err(Error::Spectrum(format!(
                    "weight {weight} of atom {lambda} must be positive"
                )));
            }
            sum += weight;
        }
        Ok(Self {
            atoms: raw
                .into_iter()
                .map(|(lambda, weight)| Atom {
                    lambda,
                    weight: weight / sum,
                })
                .collect(),
            original_weight_sum: sum,
        })
    }

    pub fn single(lambda: T) -> Result<Self> {
        Self::new([(lambda, T::one())])
    }

    /// Equal weights on every listed coefficient.
    pub fn uniform_over(lambdas: &[T]) -> Result<Self> {
        Self::new(lambdas.iter().map(|&l| (l, T::one())))
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn original_weight_sum(&self) -> T {
        self.original_weight_sum
    }

    pub fn weights(&self) -> Vec<T> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn lambdas(&self) -> Vec<T> {
        self.atoms.iter().map(|a| a.lambda).collect()
    }

    pub fn max_lambda(&self) -> T {
        self.atoms
            .iter()
            .map(|a| a.lambda)
            .fold(T::zero(), |m, l| if l > m { l } else { m })
    }

    pub fn min_lambda(&self) -> T {
        self.atoms
            .iter()
            .map(|a| a.lambda)
            .fold(T::one(), |m, l| if l < m { l } else { m })
    }

    fn mass_in(&self, lo: T, hi: T, closed: bool) -> T {
        self.atoms
            .iter()
            .filter(|a| a.lambda >= lo && (a.lambda < hi || (closed && a.lambda <= hi)))
            .fold(T::zero(), |acc, a| acc + a.weight)
    }

    fn quantile(&self, u: T) -> T {
        let mut sorted = self.atoms.clone();
        sorted.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).expect("finite lambdas"));
        let mut acc = T::zero();
        for a in &sorted {
            acc += a.weight;
            if u <= acc {
                return a.lambda;
            }
        }
        sorted.last().expect("non-empty").lambda
    }
}

/// Limiting eigenvalue law given as a measure on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub enum ContinuousSpectrum<T> {
    Uniform {
        a: T,
        b: T,
    },
    Triangular {
        a: T,
        mode: T,
        b: T,
    },
    /// Point masses written in measure form; useful to cross-check the
    /// discretization against the discrete path.
    Atomic(DiscreteSpectrum<T>),
}

impl<T: Real> ContinuousSpectrum<T> {
    pub fn uniform(a: T, b: T) -> Result<Self> {
        check_lambda(a).map_err(|e| Error::Spectrum(e.to_string()))?;
        check_lambda(b).map_err(|e| Error::Spectrum(e.to_string()))?;
        if !(a < b) {
            return Err(Error::Spectrum(format!("uniform({a},{b}) needs a < b")));
        }
        Ok(ContinuousSpectrum::Uniform { a, b })
    }

    pub fn triangular(a: T, mode: T, b: T) -> Result<Self> {
        check_lambda(a).map_err(|e| Error::Spectrum(e.to_string()))?;
        check_lambda(b).map_err(|e| Error::Spectrum(e.to_string()))?;
        if !(a < b && mode >= a && mode <= b) {
            return Err(Error::Spectrum(format!(
                "triangular({a},{mode},{b}) needs a <= mode <= b and a < b"
            )));
        }
        Ok(ContinuousSpectrum::Triangular { a, mode, b })
    }

    pub fn support(&self) -> (T, T) {
        match self {
            ContinuousSpectrum::Uniform { a, b } | ContinuousSpectrum::Triangular { a, b, .. } => {
                (*a, *b)
            }
            ContinuousSpectrum::Atomic(d) => (d.min_lambda(), d.max_lambda()),
        }
    }

    /// `eta[a, x)`.
    pub fn cdf_left(&self, x: T) -> T {
        match *self {
            ContinuousSpectrum::Uniform { a, b } => {
                ((x - a) / (b - a)).max(T::zero()).min(T::one())
            }
            ContinuousSpectrum::Triangular { a, mode, b } => {
                if x <= a {
                    T::zero()
                } else if x >= b {
                    T::one()
                } else if x <= mode {
                    (x - a) * (x - a) / ((b - a) * (mode - a))
                } else {
                    T::one() - (b - x) * (b - x) / ((b - a) * (b - mode))
                }
            }
            ContinuousSpectrum::Atomic(ref d) => d.mass_in(T::neg_infinity(), x, false),
        }
    }

    /// `eta[lo, hi)`, or `eta[lo, hi]` when `closed`.
    pub fn mass(&self, lo: T, hi: T, closed: bool) -> T {
        match self {
            ContinuousSpectrum::Atomic(d) => d.mass_in(lo, hi, closed),
            _ => (self.cdf_left(hi) - self.cdf_left(lo)).max(T::zero()),
        }
    }

    /// Left-continuous inverse CDF, `u` in `[0, 1]`.
    pub fn quantile(&self, u: T) -> T {
        let u = u.max(T::zero()).min(T::one());
        match *self {
            ContinuousSpectrum::Uniform { a, b } => a + u * (b - a),
            ContinuousSpectrum::Triangular { a, mode, b } => {
                let split = (mode - a) / (b - a);
                if u <= split {
                    a + (u * (b - a) * (mode - a)).sqrt()
                } else {
                    b - ((T::one() - u) * (b - a) * (b - mode)).sqrt()
                }
            }
            ContinuousSpectrum::Atomic(ref d) => d.quantile(u),
        }
    }

    /// Splits `[a, b]` into `k` equal cells `[alpha_{i-1}, alpha_i)` (the last
    /// one closed) and puts each cell's mass on its left endpoint. Empty cells
    /// are dropped.
    pub fn discretize(&self, k: usize) -> Result<DiscreteSpectrum<T>> {
        if k == 0 {
            return Err(Error::Spectrum("k_bins must be positive".into()));
        }
        let (a, b) = self.support();
        let kf = T::from_usize_lossy(k);
        let edge = |i: usize| a + T::from_usize_lossy(i) * (b - a) / kf;
        let mut atoms = Vec::with_capacity(k);
        for i in 1..=k {
            let lo = edge(i - 1);
            let hi = if i == k { b } else { edge(i) };
            let m = self.mass(lo, hi, i == k);
            if m > T::zero() {
                atoms.push((lo, m));
            }
        }
        DiscreteSpectrum::new(atoms)
    }
}

/// Eigenvalue profile of the AR coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumSpec<T> {
    Discrete(DiscreteSpectrum<T>),
    Continuous(ContinuousSpectrum<T>),
}

impl<T: Real> SpectrumSpec<T> {
    pub fn single(lambda: T) -> Result<Self> {
        DiscreteSpectrum::single(lambda).map(SpectrumSpec::Discrete)
    }

    pub fn discrete(atoms: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        DiscreteSpectrum::new(atoms).map(SpectrumSpec::Discrete)
    }

    pub fn as_discrete(&self) -> Option<&DiscreteSpectrum<T>> {
        match self {
            SpectrumSpec::Discrete(d) => Some(d),
            SpectrumSpec::Continuous(_) => None,
        }
    }

    /// The discrete profile itself, or the `k_bins` left-endpoint discretization.
    pub fn to_discrete(&self, k_bins: usize) -> Result<DiscreteSpectrum<T>> {
        match self {
            SpectrumSpec::Discrete(d) => Ok(d.clone()),
            SpectrumSpec::Continuous(c) => c.discretize(k_bins),
        }
    }

    pub fn upper_support(&self) -> T {
        match self {
            SpectrumSpec::Discrete(d) => d.max_lambda(),
            SpectrumSpec::Continuous(c) => c.support().1,
        }
    }
}

/// Angular grid with `delta_i(theta_n)` tabulated for every atom.
///
/// All replica-side spectral integrals are weighted sums over this table.
#[derive(Debug, Clone)]
pub struct SpectralTable<T> {
    quad_weights: Vec<T>,
    // delta[i][n] = delta(theta_n, lambda_i)
    delta: Vec<Vec<T>>,
    atom_weights: Vec<T>,
}

impl<T: Real> SpectralTable<T> {
    pub fn new(spectrum: &DiscreteSpectrum<T>, quad: &AngularQuadrature<T>) -> Self {
        let delta = spectrum
            .atoms()
            .iter()
            .map(|a| {
                quad.sin_half_sq()
                    .iter()
                    .map(|&s| delta_from_sin_half_sq(s, a.lambda))
                    .collect()
            })
            .collect();
        Self {
            quad_weights: quad.weights().to_vec(),
            delta,
            atom_weights: spectrum.weights(),
        }
    }

    pub fn atoms(&self) -> usize {
        self.delta.len()
    }

    pub fn atom_weights(&self) -> &[T] {
        &self.atom_weights
    }

    fn check(&self, r2: &[T]) -> Result<()> {
        if r2.len() != self.atoms() {
            return Err(Error::Dimension {
                expected: self.atoms(),
                got: r2.len(),
            });
        }
        Ok(())
    }

    /// `S(theta_n) = sum_i l_i delta_i(theta_n) r2_i`.
    fn mixture(&self, r2: &[T], n: usize) -> T {
        self.delta
            .iter()
            .zip(&self.atom_weights)
            .zip(r2)
            .fold(T::zero(), |acc, ((d, &l), &r)| acc + l * d[n] * r)
    }

    /// `r1_i = (c/pi) int delta_i / (S + sigma^2)`.
    pub fn r1_map(&self, r2: &[T], c: T, sigma2: T) -> Result<Vec<T>> {
        self.check(r2)?;
        let mut out = vec![T::zero(); self.atoms()];
        for (n, &w) in self.quad_weights.iter().enumerate() {
            let inv = w / (self.mixture(r2, n) + sigma2);
            for (o, d) in out.iter_mut().zip(&self.delta) {
                *o += d[n] * inv;
            }
        }
        Ok(out.into_iter().map(|v| c * v).collect())
    }

    /// `(1/pi) int ln(S / sigma^2 + 1)`.
    pub fn log_term(&self, r2: &[T], sigma2: T) -> Result<T> {
        self.check(r2)?;
        Ok(self
            .quad_weights
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (n, &w)| {
                acc + w * (self.mixture(r2, n) / sigma2).ln_1p()
            }))
    }

    /// `(sigma^2/pi) int S / (S + sigma^2)`.
    pub fn ymmse(&self, r2: &[T], sigma2: T) -> Result<T> {
        self.check(r2)?;
        let mean = self
            .quad_weights
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (n, &w)| {
                let s = self.mixture(r2, n);
                acc + w * s / (s + sigma2)
            });
        Ok(sigma2 * mean)
    }
}

/// `r1_i = (c/pi) int_0^pi delta_i(theta) / (sum_j l_j r2_j delta_j(theta) + sigma^2) dtheta`.
pub fn r1_map<T: Real>(
    r2: &[T],
    spectrum: &SpectrumSpec<T>,
    c: T,
    sigma2: T,
    quad: &AngularQuadrature<T>,
) -> Result<Vec<T>> {
    let discrete = spectrum.as_discrete().ok_or_else(|| {
        Error::Spectrum("r1_map needs a discrete spectrum; discretize the measure first".into())
    })?;
    if !(c > T::zero() && sigma2 > T::zero()) {
        return Err(Error::Domain(format!(
            "c = {c} and sigma2 = {sigma2} must be positive"
        )));
    }
    if r2.iter().any(|&r| !(r >= T::zero())) {
        return Err(Error::Domain("r2 entries must be nonnegative".into()));
    }
    SpectralTable::new(discrete, quad).r1_map(r2, c, sigma2)
}

/// Single-atom closed form `c / sqrt((Q + (1-l)^2 s2)(Q + (1+l)^2 s2))`.
pub fn single_atom_r1_closed_form<T: Real>(q: T, lambda: T, c: T, sigma2: T) -> T {
    let lo = (T::one() - lambda) * (T::one() - lambda) * sigma2;
    let hi = (T::one() + lambda) * (T::one() + lambda) * sigma2;
    c / ((q + lo) * (q + hi)).sqrt()
}

// ---------------------------------------------------------------------------
// Text format: `0.9:0.5,0.1:0.5`, `0.9,0.8,0.7`, `uniform(a,b)`,
// `triangular(a,mode,b)`, `atomic(0.1:0.5,0.9:0.5)`.

fn parse_number<T: Real>(s: &str, whole: &str) -> Result<T> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(whole, format!("`{}` is not a number", s.trim())))?;
    Ok(T::lit(v))
}

fn parse_atom_list<T: Real>(body: &str, whole: &str) -> Result<DiscreteSpectrum<T>> {
    let mut atoms = Vec::new();
    for item in body.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(Error::parse(whole, "empty atom"));
        }
        match item.split_once(':') {
            Some((l, w)) => atoms.push((parse_number(l, whole)?, parse_number(w, whole)?)),
            None => atoms.push((parse_number(item, whole)?, T::one())),
        }
    }
    DiscreteSpectrum::new(atoms)
}

fn parse_call<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    let rest = s.strip_prefix(name)?.trim_start();
    rest.strip_prefix('(')?.strip_suffix(')')
}

impl<T: Real> FromStr for SpectrumSpec<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(body) = parse_call(t, "uniform") {
            let args: Vec<&str> = body.split(',').collect();
            if args.len() != 2 {
                return Err(Error::parse(s, "uniform takes (a, b)"));
            }
            return ContinuousSpectrum::uniform(
                parse_number(args[0], s)?,
                parse_number(args[1], s)?,
            )
            .map(SpectrumSpec::Continuous);
        }
        if let Some(body) = parse_call(t, "triangular") {
            let args: Vec<&str> = body.split(',').collect();
            if args.len() != 3 {
                return Err(Error::parse(s, "triangular takes (a, mode, b)"));
            }
            return ContinuousSpectrum::triangular(
                parse_number(args[0], s)?,
                parse_number(args[1], s)?,
                parse_number(args[2], s)?,
            )
            .map(SpectrumSpec::Continuous);
        }
        if let Some(body) = parse_call(t, "atomic") {
            return parse_atom_list(body, s)
                .map(|d| SpectrumSpec::Continuous(ContinuousSpectrum::Atomic(d)));
        }
        if t.contains('(') {
            return Err(Error::parse(
                s,
                "unknown spectrum; expected `l:w,...`, uniform(a,b), triangular(a,m,b) or atomic(...)",
            ));
        }
        parse_atom_list(t, s).map(SpectrumSpec::Discrete)
    }
}

impl<T: Real> fmt::Display for DiscreteSpectrum<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", a.lambda, a.weight)?;
        }
        Ok(())
    }
}

impl<T: Real> fmt::Display for SpectrumSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumSpec::Discrete(d) => write!(f, "{d}"),
            SpectrumSpec::Continuous(ContinuousSpectrum::Uniform { a, b }) => {
                write!(f, "uniform({a},{b})")
            }
            SpectrumSpec::Continuous(ContinuousSpectrum::Triangular { a, mode, b }) => {
                write!(f, "triangular({a},{mode},{b})")
            }
            SpectrumSpec::Continuous(ContinuousSpectrum::Atomic(d)) => write!(f, "atomic({d})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generating_function_examples() {
        assert_eq!(generating_function(1.3_f64, 0.0).unwrap(), 1.0);
        assert!((generating_function(0.0_f64, 0.5).unwrap() - 4.0).abs() < 1e-15);
        let v = generating_function(std::f64::consts::PI, 0.5).unwrap();
        assert!((v - 4.0 / 9.0).abs() < 1e-15);
        assert!(generating_function(0.1_f64, 1.0).is_err());
        assert!(generating_function(-0.1_f64, 0.5).is_err());
    }

    #[test]
    fn generating_function_bounds() {
        for &lambda in &[0.0, 0.3, 0.9, 0.99] {
            let lo = 1.0 / ((1.0 + lambda) * (1.0 + lambda));
            let hi = 1.0 / ((1.0 - lambda) * (1.0 - lambda));
            for i in 0..=100 {
                let theta = std::f64::consts::PI * i as f64 / 100.0;
                let d = generating_function(theta, lambda).unwrap();
                assert!(d >= lo * (1.0 - 1e-14) && d <= hi * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn kms_small_examples() {
        let id = kms_matrix(0.0_f64, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(id.entry(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        let m = kms_matrix(0.5_f64, 2).unwrap();
        assert!((m.entry(0, 0) - 4.0 / 3.0).abs() < 1e-15);
        assert!((m.entry(0, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.entry(0, 1), m.entry(1, 0));
        assert!(kms_matrix(0.5_f64, 0).is_err());
        assert!(kms_matrix(1.0_f64, 4).is_err());
        assert!(kms_matrix(0.5_f64, MAX_DENSE_DIM + 1).is_err());
    }

    #[test]
    fn kms_is_toeplitz_with_constant_diagonal() {
        let m = kms_matrix(0.7_f64, 17).unwrap();
        let diag = 1.0 / (1.0 - 0.49);
        for i in 0..17 {
            assert!((m.entry(i, i) - diag).abs() < 1e-14);
            for j in 0..17 {
                assert_eq!(m.entry(i, j), m.entry(j, i));
                if i > 0 && j > 0 {
                    assert_eq!(m.entry(i, j), m.entry(i - 1, j - 1));
                }
            }
        }
        assert!(m.eigenvalues()[0] > 0.0);
    }

    #[test]
    fn eigenvalues_lie_in_symbol_range() {
        for &lambda in &[0.0, 0.3, 0.5, 0.9] {
            let eig = kms_matrix(lambda, 64).unwrap().eigenvalues();
            let lo = 1.0 / ((1.0 + lambda) * (1.0 + lambda));
            let hi = 1.0 / ((1.0 - lambda) * (1.0 - lambda));
            assert!(eig.iter().all(|&e| e >= lo - 1e-10 && e <= hi + 1e-10));
        }
    }

    #[test]
    fn kolmogorov_distance_shrinks_with_dimension() {
        for &lambda in &[0.3, 0.5, 0.9] {
            let d64 =
                kolmogorov_distance_to_law(&kms_matrix(lambda, 64).unwrap().eigenvalues(), lambda);
            let d256 =
                kolmogorov_distance_to_law(&kms_matrix(lambda, 256).unwrap().eigenvalues(), lambda);
            assert!(d256 < d64, "lambda={lambda}: {d256} !< {d64}");
            assert!(d256 < 0.05);
        }
    }

    #[test]
    fn spectral_integral_examples() {
        assert!((spectral_integral(|_| 1.0_f64, 16) - 1.0).abs() < 1e-14);
        let v = spectral_integral(|t| generating_function(t, 0.5_f64).unwrap(), 2048);
        assert!((v - 4.0 / 3.0).abs() < 1e-12);
        // trace(K)/N is exactly the diagonal 1/(1 - lambda^2)
        let m = kms_matrix(0.5_f64, 300).unwrap();
        assert!((m.trace() / 300.0 - v).abs() < 1e-12);
    }

    #[test]
    fn spectral_integral_node_convergence() {
        let f = |t: f64| (generating_function(t, 0.9).unwrap() * 0.1 / 0.1 + 1.0).ln();
        let coarse = spectral_integral(f, 2048);
        let fine = spectral_integral(f, 8192);
        assert!((coarse - fine).abs() < 1e-10);
    }

    #[test]
    fn r1_map_single_atom_reductions() {
        let quad = AngularQuadrature::<f64>::default();
        let s = SpectrumSpec::single(0.0).unwrap();
        let r1 = r1_map(&[0.4], &s, 2.0, 0.1, &quad).unwrap();
        assert!((r1[0] - 2.0 / 0.5).abs() < 1e-12);

        let s = SpectrumSpec::discrete([(0.9, 0.5), (0.1, 0.5)]).unwrap();
        let r1 = r1_map(&[0.0, 0.0], &s, 1.5, 0.2, &quad).unwrap();
        assert!((r1[0] - 1.5 / (0.2 * (1.0 - 0.81))).abs() < 1e-9);
        assert!((r1[1] - 1.5 / (0.2 * (1.0 - 0.01))).abs() < 1e-9);
    }

    #[test]
    fn r1_map_rejects_bad_inputs() {
        let quad = AngularQuadrature::<f64>::new(32);
        let s = SpectrumSpec::single(0.5).unwrap();
        assert!(r1_map(&[0.1, 0.2], &s, 1.0, 0.1, &quad).is_err());
        assert!(r1_map(&[-0.1], &s, 1.0, 0.1, &quad).is_err());
        assert!(r1_map(&[0.1], &s, 0.0, 0.1, &quad).is_err());
        let u: SpectrumSpec<f64> = "uniform(0.1,0.9)".parse().unwrap();
        assert!(r1_map(&[0.1], &u, 1.0, 0.1, &quad).is_err());
    }

    #[test]
    fn weights_are_normalized() {
        let d = DiscreteSpectrum::new([(0.9, 2.0), (0.1, 6.0)]).unwrap();
        assert_eq!(d.weights(), vec![0.25, 0.75]);
        assert_eq!(d.original_weight_sum(), 8.0);
        assert!(DiscreteSpectrum::new([(0.9_f64, 0.0)]).is_err());
        assert!(DiscreteSpectrum::new([(1.2_f64, 1.0)]).is_err());
        assert!(DiscreteSpectrum::<f64>::new([]).is_err());
    }

    #[test]
    fn parse_and_display() {
        let s: SpectrumSpec<f64> = "0.9:0.5, 0.1:0.5".parse().unwrap();
        assert_eq!(s.to_string(), "0.9:0.5,0.1:0.5");
        let e: SpectrumSpec<f64> = "0.9,0.8,0.7".parse().unwrap();
        let d = e.as_discrete().unwrap();
        assert_eq!(d.len(), 3);
        assert!((d.weights()[0] - 1.0 / 3.0).abs() < 1e-15);
        let u: SpectrumSpec<f64> = "uniform(0.1, 0.9)".parse().unwrap();
        assert_eq!(u.to_string(), "uniform(0.1,0.9)");
        let t: SpectrumSpec<f64> = "triangular(0,0.5,0.9)".parse().unwrap();
        assert_eq!(t.to_string().parse::<SpectrumSpec<f64>>().unwrap(), t);
        let a: SpectrumSpec<f64> = "atomic(0.1:1,0.9:1)".parse().unwrap();
        assert_eq!(a.to_string(), "atomic(0.1:0.5,0.9:0.5)");
        assert!("beta(1,2)".parse::<SpectrumSpec<f64>>().is_err());
        assert!("0.9:x".parse::<SpectrumSpec<f64>>().is_err());
        assert!("".parse::<SpectrumSpec<f64>>().is_err());
        assert!("uniform(0.5,0.2)".parse::<SpectrumSpec<f64>>().is_err());
    }

    #[test]
    fn discretization_uses_left_endpoints() {
        let u = ContinuousSpectrum::uniform(0.1_f64, 0.9).unwrap();
        let d = u.discretize(4).unwrap();
        let lambdas = d.lambdas();
        for (i, l) in lambdas.iter().enumerate() {
            assert!((l - (0.1 + 0.2 * i as f64)).abs() < 1e-15);
        }
        assert!(d.weights().iter().all(|w| (w - 0.25).abs() < 1e-12));

        let point = ContinuousSpectrum::Atomic(DiscreteSpectrum::single(0.4_f64).unwrap());
        let d = point.discretize(1).unwrap();
        assert_eq!(d.lambdas(), vec![0.4]);
        assert_eq!(d.weights(), vec![1.0]);

        let two = ContinuousSpectrum::Atomic(
            DiscreteSpectrum::new([(0.1_f64, 0.5), (0.9, 0.5)]).unwrap(),
        );
        let d = two.discretize(16).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d.lambdas()[0] - 0.1).abs() < 1e-15);
        assert!((d.lambdas()[1] - 0.85).abs() < 1e-12);
    }

    #[test]
    fn triangular_quantile_inverts_cdf() {
        let t = ContinuousSpectrum::triangular(0.1_f64, 0.3, 0.9).unwrap();
        for i in 1..20 {
            let u = i as f64 / 20.0;
            let x = t.quantile(u);
            assert!((t.cdf_left(x) - u).abs() < 1e-12);
        }
    }
}
