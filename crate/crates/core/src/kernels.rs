//! Similarity kernels over behavioral embeddings and the Gram-matrix algebra
//! built on them: determinant, log-determinant, and the analytic gradient of
//! the log-determinant with respect to each embedding.
//!
//! All kernels in the zoo have `k(x, x) = 1`, so every Gram matrix has a unit
//! diagonal and its determinant lies in `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, DvdError, Result};

/// Jitter ladder used when a Cholesky factorization fails.
const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-8;

/// Determinants at or below this value are reported as `-inf` by [`GramMatrix::logdet`].
pub const LOGDET_UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    SquaredExponential,
    Exponential,
    LinearNormalized,
    RationalQuadratic,
    Matern32,
    Matern52,
}

impl KernelKind {
    pub const ALL: [KernelKind; 6] = [
        KernelKind::SquaredExponential,
        KernelKind::Exponential,
        KernelKind::LinearNormalized,
        KernelKind::RationalQuadratic,
        KernelKind::Matern32,
        KernelKind::Matern52,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::SquaredExponential => "se",
            KernelKind::Exponential => "exp",
            KernelKind::LinearNormalized => "linear",
            KernelKind::RationalQuadratic => "rq",
            KernelKind::Matern32 => "matern32",
            KernelKind::Matern52 => "matern52",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|k| k.name()).collect()
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = DvdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" | "squared_exponential" | "rbf" => Ok(KernelKind::SquaredExponential),
            "exp" | "exponential" => Ok(KernelKind::Exponential),
            "linear" | "linear_normalized" | "cosine" => Ok(KernelKind::LinearNormalized),
            "rq" | "rational_quadratic" => Ok(KernelKind::RationalQuadratic),
            "matern32" => Ok(KernelKind::Matern32),
            "matern52" => Ok(KernelKind::Matern52),
            other => Err(DvdError::InvalidArgument(format!(
                "unknown kernel '{other}', expected one of: {}",
                KernelKind::names().join(", ")
            ))),
        }
    }
}

/// A kernel kind together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub length_scale: f64,
    /// Shape parameter, only read by [`KernelKind::RationalQuadratic`].
    pub rq_alpha: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            kind: KernelKind::SquaredExponential,
            length_scale: 1.0,
            rq_alpha: 1.0,
        }
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

impl KernelSpec {
    pub fn new(kind: KernelKind, length_scale: f64) -> Result<Self> {
        let spec = KernelSpec {
            kind,
            length_scale,
            ..Default::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_rq_alpha(mut self, alpha: f64) -> Result<Self> {
        self.rq_alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(DvdError::InvalidArgument(format!(
                "length_scale must be positive, got {}",
                self.length_scale
            )));
        }
        if !(self.rq_alpha > 0.0 && self.rq_alpha.is_finite()) {
            return Err(DvdError::InvalidArgument(format!(
                "rq_alpha must be positive, got {}",
                self.rq_alpha
            )));
        }
        Ok(())
    }

    /// Evaluates `k(x, y)`, checking dimensions and finiteness.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.validate()?;
        if x.len() != y.len() {
            return Err(DvdError::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        check_finite(x, "kernel argument x")?;
        check_finite(y, "kernel argument y")?;
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluates `k(x, y)` without validation. Inputs must have equal length.
    pub fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let l = self.length_scale;
        match self.kind {
            KernelKind::SquaredExponential => (-sq_dist(x, y) / (2.0 * l * l)).exp(),
            KernelKind::Exponential => (-sq_dist(x, y).sqrt() / l).exp(),
            KernelKind::RationalQuadratic => {
                let a = self.rq_alpha;
                (1.0 + sq_dist(x, y) / (2.0 * a * l * l)).powf(-a)
            }
            KernelKind::Matern32 => {
                let s = 3f64.sqrt() * sq_dist(x, y).sqrt() / l;
                (1.0 + s) * (-s).exp()
            }
            KernelKind::Matern52 => {
                let s = 5f64.sqrt() * sq_dist(x, y).sqrt() / l;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
            KernelKind::LinearNormalized => {
                if x == y {
                    return 1.0;
                }
                let nx = dot(x, x).sqrt();
                let ny = dot(y, y).sqrt();
                match (nx > 0.0, ny > 0.0) {
                    (true, true) => (dot(x, y) / (nx * ny)).clamp(-1.0, 1.0),
                    (false, false) => 1.0,
                    _ => 0.0,
                }
            }
        }
    }

    /// Gradient of `k(x, y)` with respect to `x`.
    ///
    /// Kernels that are not differentiable at `x = y` (exponential) or at the
    /// origin (normalized linear) return the zero vector there.
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let l = self.length_scale;
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let r2 = sq_dist(x, y);
        let scale = match self.kind {
            KernelKind::SquaredExponential => -(-r2 / (2.0 * l * l)).exp() / (l * l),
            KernelKind::Exponential => {
                let r = r2.sqrt();
                if r == 0.0 {
                    0.0
                } else {
                    -(-r / l).exp() / (l * r)
                }
            }
            KernelKind::RationalQuadratic => {
                let a = self.rq_alpha;
                -(1.0 + r2 / (2.0 * a * l * l)).powf(-a - 1.0) / (l * l)
            }
            KernelKind::Matern32 => {
                let s = 3f64.sqrt() * r2.sqrt() / l;
                -3.0 / (l * l) * (-s).exp()
            }
            KernelKind::Matern52 => {
                let s = 5f64.sqrt() * r2.sqrt() / l;
                -5.0 / (3.0 * l * l) * (1.0 + s) * (-s).exp()
            }
            KernelKind::LinearNormalized => {
                let nx = dot(x, x).sqrt();
                let ny = dot(y, y).sqrt();
                if nx == 0.0 || ny == 0.0 {
                    return vec![0.0; x.len()];
                }
                let k = dot(x, y) / (nx * ny);
                return x
                    .iter()
                    .zip(y)
                    .map(|(xi, yi)| yi / (nx * ny) - k * xi / (nx * nx))
                    .collect();
            }
        };
        diff.into_iter().map(|d| scale * d).collect()
    }
}

/// Symmetric `M x M` kernel matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    size: usize,
    entries: Vec<f64>,
}

/// Lower-triangular Cholesky factor of a (possibly jittered) Gram matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    size: usize,
    lower: Vec<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Diagonal jitter that was added to make the factorization succeed.
    pub fn jitter_used(&self) -> f64 {
        self.jitter
    }

    pub fn log_det(&self) -> f64 {
        (0..self.size)
            .map(|i| self.lower[i * self.size + i].ln())
            .sum::<f64>()
            * 2.0
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.size;
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= l[i * n + j] * y[j];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= l[j * n + i] * y[j];
            }
            y[i] = s / l[i * n + i];
        }
        y
    }

    /// Full inverse of the factored matrix, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.size;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.solve(&e);
            for r in 0..n {
                inv[r * n + c] = col[r];
            }
        }
        inv
    }
}

fn cholesky_in_place(n: usize, a: &[f64], jitter: f64) -> Option<Vec<f64>> {
    // Pivots at round-off level mean the matrix is numerically singular.
    let pivot_tol = 16.0 * n as f64 * f64::EPSILON;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            if i == j {
                s += jitter;
            }
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            if i == j {
                if !(s > pivot_tol) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

impl GramMatrix {
    /// Wraps explicit entries. The matrix must be square, finite and symmetric.
    pub fn from_entries(size: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != size * size {
            return Err(DvdError::DimensionMismatch {
                expected: size * size,
                got: entries.len(),
            });
        }
        check_finite(&entries, "gram matrix entries")?;
        for i in 0..size {
            for j in 0..i {
                if (entries[i * size + j] - entries[j * size + i]).abs() > 1e-12 {
                    return Err(DvdError::InvalidArgument(format!(
                        "gram matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(GramMatrix { size, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn unit_diagonal(&self) -> bool {
        (0..self.size).all(|i| self.get(i, i) == 1.0)
    }

    /// Cholesky factorization, escalating diagonal jitter from 1e-12 to 1e-8
    /// (x10 per retry) when the plain factorization fails.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let n = self.size;
        if let Some(lower) = cholesky_in_place(n, &self.entries, 0.0) {
            return Some(Cholesky {
                size: n,
                lower,
                jitter: 0.0,
            });
        }
        let mut jitter = JITTER_START;
        while jitter <= JITTER_MAX * (1.0 + 1e-9) {
            if let Some(lower) = cholesky_in_place(n, &self.entries, jitter) {
                return Some(Cholesky {
                    size: n,
                    lower,
                    jitter,
                });
            }
            jitter *= 10.0;
        }
        None
    }

    /// Determinant. A matrix that only factors with jitter is numerically
    /// singular and reports 0.
    pub fn det(&self) -> f64 {
        let det = match self.cholesky() {
            Some(c) if c.jitter == 0.0 => c.log_det().exp(),
            _ => 0.0,
        };
        if self.unit_diagonal() {
            det.clamp(0.0, 1.0)
        } else {
            det.max(0.0)
        }
    }

    /// Natural log of the determinant, `-inf` when the determinant is at or
    /// below [`LOGDET_UNDERFLOW`].
    pub fn logdet(&self) -> f64 {
        match self.cholesky() {
            Some(c) if c.jitter == 0.0 => {
                let ld = c.log_det();
                if ld <= LOGDET_UNDERFLOW.ln() {
                    f64::NEG_INFINITY
                } else if self.unit_diagonal() {
                    ld.min(0.0)
                } else {
                    ld
                }
            }
            _ => f64::NEG_INFINITY,
        }
    }
}

fn check_embeddings(embeddings: &[Vec<f64>]) -> Result<usize> {
    let first = embeddings
        .first()
        .ok_or_else(|| DvdError::InvalidArgument("need at least one embedding".into()))?;
    let dim = first.len();
    for e in embeddings {
        if e.len() != dim {
            return Err(DvdError::DimensionMismatch {
                expected: dim,
                got: e.len(),
            });
        }
        check_finite(e, "embedding")?;
    }
    Ok(dim)
}

/// Builds the kernel matrix `K[i][j] = k(e_i, e_j)`.
pub fn gram(spec: &KernelSpec, embeddings: &[Vec<f64>]) -> Result<GramMatrix> {
    spec.validate()?;
    check_embeddings(embeddings)?;
    let m = embeddings.len();
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        entries[i * m + i] = 1.0;
        for j in 0..i {
            let k = spec.eval_unchecked(&embeddings[i], &embeddings[j]);
            entries[i * m + j] = k;
            entries[j * m + i] = k;
        }
    }
    Ok(GramMatrix { size: m, entries })
}

/// Gradient of `log det K` with respect to every embedding.
///
/// With `W = K^{-1}`, the gradient for embedding `m` is
/// `2 * sum_{b != m} W[m][b] * dk(e_m, e_b)/de_m`; the diagonal is constant.
pub fn grad_logdet_embeddings(spec: &KernelSpec, embeddings: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let g = gram(spec, embeddings)?;
    let m = g.size();
    let dim = embeddings[0].len();
    let chol = match g.cholesky() {
        Some(c) if c.jitter == 0.0 => c,
        _ => return Err(DvdError::RankDeficient),
    };
    let inv = chol.inverse();
    let mut grads = vec![vec![0.0; dim]; m];
    for (a, grad) in grads.iter_mut().enumerate() {
        for b in 0..m {
            if a == b {
                continue;
            }
            let w = 2.0 * inv[a * m + b];
            for (acc, d) in grad
                .iter_mut()
                .zip(spec.grad_x(&embeddings[a], &embeddings[b]))
            {
                *acc += w * d;
            }
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn se() -> KernelSpec {
        KernelSpec::default()
    }

    /// Laplace expansion; independent of the Cholesky path.
    fn cofactor_det(n: usize, a: &[f64]) -> f64 {
        if n == 1 {
            return a[0];
        }
        let mut total = 0.0;
        for c in 0..n {
            let mut minor = Vec::with_capacity((n - 1) * (n - 1));
            for r in 1..n {
                for cc in 0..n {
                    if cc != c {
                        minor.push(a[r * n + cc]);
                    }
                }
            }
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * a[c] * cofactor_det(n - 1, &minor);
        }
        total
    }

    fn random_population(rng: &mut ChaCha8Rng, m: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| (0..dim).map(|_| rng.gen_range(-scale..scale)).collect())
            .collect()
    }

    #[test]
    fn se_identity_and_closed_form() {
        let x = [0.3, -1.2, 4.0];
        assert_eq!(se().eval(&x, &x).unwrap(), 1.0);
        // ||x - y||^2 = 2
        let v = se().eval(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn linear_orthogonal_and_zero_vector() {
        let lin = KernelSpec::new(KernelKind::LinearNormalized, 1.0).unwrap();
        assert_eq!(lin.eval(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert_eq!(lin.eval(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(lin.eval(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_bad_input() {
        assert!(matches!(
            se().eval(&[1.0], &[1.0, 2.0]),
            Err(DvdError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            se().eval(&[f64::NAN], &[1.0]),
            Err(DvdError::NonFinite(_))
        ));
        assert!(KernelSpec::new(KernelKind::SquaredExponential, 0.0).is_err());
        assert!(se().with_rq_alpha(-1.0).is_err());
    }

    #[test]
    fn gram_small_cases() {
        let g = gram(&se(), &[vec![0.5, 0.5]]).unwrap();
        assert_eq!(g.entries(), &[1.0]);
        let g = gram(&se(), &[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(g.entries(), &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            gram(&se(), &[vec![1.0], vec![1.0, 2.0]]),
            Err(DvdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn det_examples() {
        let id = GramMatrix::from_entries(3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        assert_eq!(id.det(), 1.0);
        assert_eq!(id.logdet(), 0.0);
        let half = GramMatrix::from_entries(2, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        assert!((half.det() - 0.75).abs() < 1e-15);
        assert!((half.logdet() - 0.75f64.ln()).abs() < 1e-12);
        assert!((half.logdet() + 0.287682).abs() < 1e-6);
        let dup = gram(&se(), &[vec![1.0, 0.0], vec![3.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(dup.det(), 0.0);
        assert_eq!(dup.logdet(), f64::NEG_INFINITY);
        let dup_chol = dup.cholesky().unwrap();
        assert!(dup_chol.jitter_used() > 0.0 && dup_chol.jitter_used() <= 1e-8);
    }

    #[test]
    fn from_entries_validation() {
        assert!(GramMatrix::from_entries(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(GramMatrix::from_entries(2, vec![1.0, f64::NAN, f64::NAN, 1.0]).is_err());
        assert!(GramMatrix::from_entries(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn det_matches_cofactor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in KernelKind::ALL {
            let spec = KernelSpec::new(kind, 1.3).unwrap();
            for m in 1..6 {
                let pop = random_population(&mut rng, m, 4, 1.5);
                let g = gram(&spec, &pop).unwrap();
                let oracle = cofactor_det(m, g.entries());
                assert!(
                    (g.det() - oracle.clamp(0.0, 1.0)).abs() < 1e-10,
                    "{kind} m={m}"
                );
            }
        }
    }

    #[test]
    fn grad_single_embedding_is_zero() {
        let g = grad_logdet_embeddings(&se(), &[vec![0.2, -0.7]]).unwrap();
        assert_eq!(g, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn grad_symmetric_pair_is_opposite() {
        let g = grad_logdet_embeddings(&se(), &[vec![0.3, -0.4], vec![-0.3, 0.4]]).unwrap();
        for (a, b) in g[0].iter().zip(&g[1]) {
            assert!((a + b).abs() < 1e-14);
        }
        // Moving apart increases log det.
        assert!(g[0][0] > 0.0 && g[0][1] < 0.0);
    }

    #[test]
    fn grad_singular_errors() {
        let r = grad_logdet_embeddings(&se(), &[vec![1.0], vec![1.0]]);
        assert_eq!(r, Err(DvdError::RankDeficient));
    }

    /// Central finite differences of `log det(gram(.))`.
    fn fd_grad(spec: &KernelSpec, pop: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; pop[0].len()]; pop.len()];
        for m in 0..pop.len() {
            for d in 0..pop[0].len() {
                let mut plus = pop.to_vec();
                let mut minus = pop.to_vec();
                plus[m][d] += h;
                minus[m][d] -= h;
                let lp = gram(spec, &plus).unwrap().cholesky().unwrap().log_det();
                let lm = gram(spec, &minus).unwrap().cholesky().unwrap().log_det();
                out[m][d] = (lp - lm) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn grad_matches_finite_differences_m3_dim6() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pop = random_population(&mut rng, 3, 6, 1.0);
        let analytic = grad_logdet_embeddings(&se(), &pop).unwrap();
        let numeric = fd_grad(&se(), &pop, 1e-5);
        let num: f64 = analytic
            .iter()
            .flatten()
            .zip(numeric.iter().flatten())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = numeric.iter().flatten().map(|b| b * b).sum::<f64>().sqrt();
        assert!(num / den < 1e-5, "relative error {}", num / den);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn det_is_permutation_invariant(seed in 0u64..10_000, m in 2usize..6, kind in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = KernelSpec::new(KernelKind::ALL[kind], 1.0).unwrap();
            let pop = random_population(&mut rng, m, 3, 1.0);
            let mut rev = pop.clone();
            rev.reverse();
            rev.rotate_left(1);
            let a = gram(&spec, &pop).unwrap().det();
            let b = gram(&spec, &rev).unwrap().det();
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300) || (a - b).abs() < 1e-14);
        }

        #[test]
        fn se_strictly_decreasing_in_distance(r1 in 0.0f64..5.0, dr in 1e-3f64..5.0) {
            let a = se().eval(&[r1, 0.0], &[0.0, 0.0]).unwrap();
            let b = se().eval(&[r1 + dr, 0.0], &[0.0, 0.0]).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn kernel_ranges(seed in 0u64..10_000, kind in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = KernelSpec::new(KernelKind::ALL[kind], 0.7).unwrap();
            let pop = random_population(&mut rng, 2, 5, 3.0);
            let v = spec.eval(&pop[0], &pop[1]).unwrap();
            prop_assert_eq!(spec.eval(&pop[0], &pop[0]).unwrap(), 1.0);
            if spec.kind == KernelKind::LinearNormalized {
                prop_assert!(v.abs() <= 1.0);
            } else {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn linear_rank_law() {
        let lin = KernelSpec::new(KernelKind::LinearNormalized, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis = random_population(&mut rng, 2, 8, 1.0);
        let pop: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                basis[0]
                    .iter()
                    .zip(&basis[1])
                    .map(|(u, v)| a * u + b * v)
                    .collect()
            })
            .collect();
        assert!(gram(&lin, &pop).unwrap().det() < 1e-9);
    }
}
