//! Population diversity as a kernel determinant, compared against the
//! pairwise-distance and novelty measures it replaces.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{DvdError, Result};
use crate::kernels::{gram, KernelKind, KernelSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiversityReport {
    pub determinant: f64,
    /// `None` encodes a log-determinant of negative infinity.
    pub log_determinant: Option<f64>,
    pub mean_pairwise_distance: f64,
    pub per_agent_novelty: Vec<f64>,
}

impl DiversityReport {
    pub fn compute(embeddings: &[Vec<f64>], spec: &KernelSpec) -> Result<Self> {
        let g = gram(spec, embeddings)?;
        let ld = g.logdet();
        Ok(DiversityReport {
            determinant: g.det(),
            log_determinant: ld.is_finite().then_some(ld),
            mean_pairwise_distance: mean_pairwise_distance(embeddings)?,
            per_agent_novelty: (0..embeddings.len())
                .map(|m| novelty(m, embeddings))
                .collect::<Result<_>>()?,
        })
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `det(K)` over the population's embeddings.
pub fn population_diversity(embeddings: &[Vec<f64>], spec: &KernelSpec) -> Result<f64> {
    Ok(gram(spec, embeddings)?.det())
}

/// `(1/M) * sum_i sum_{j>i} ||e_i - e_j||`.
pub fn mean_pairwise_distance(embeddings: &[Vec<f64>]) -> Result<f64> {
    let m = embeddings.len();
    if m < 2 {
        return Err(DvdError::InvalidArgument(
            "mean pairwise distance needs at least two embeddings".into(),
        ));
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            total += euclid(&embeddings[i], &embeddings[j]);
        }
    }
    Ok(total / m as f64)
}

/// Novelty of agent `index`: `(1/M) * sum_{j != index} ||e_index - e_j||`.
pub fn novelty(index: usize, embeddings: &[Vec<f64>]) -> Result<f64> {
    let m = embeddings.len();
    if m < 2 {
        return Err(DvdError::InvalidArgument(
            "novelty needs at least two embeddings".into(),
        ));
    }
    let me = embeddings
        .get(index)
        .ok_or(DvdError::IndexOutOfRange { index, len: m })?;
    Ok(novelty_against(
        me,
        embeddings
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != index)
            .map(|(_, e)| e),
        m,
    ))
}

/// Novelty of `candidate` against `others`, normalized by population size `m`.
pub fn novelty_against<'a, I>(candidate: &[f64], others: I, m: usize) -> f64
where
    I: IntoIterator<Item = &'a Vec<f64>>,
{
    others
        .into_iter()
        .map(|e| euclid(candidate, e))
        .sum::<f64>()
        / m as f64
}

/// Half the sum of pairwise squared distances over `l^2`. This is the
/// quantity that the naive linearization `exp(x) ~ 1 + x` of the 3x3
/// determinant suggests; it is not the first-order term (see
/// [`first_order_det_approx`]).
pub fn half_squared_distance_sum(embeddings: &[Vec<f64>], length_scale: f64) -> f64 {
    let m = embeddings.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let d = euclid(&embeddings[i], &embeddings[j]);
            total += d * d;
        }
    }
    0.5 * total / (length_scale * length_scale)
}

/// First-order expansion of `det(K)` for the squared-exponential kernel in
/// the squared pairwise distances.
///
/// Write `K = J + E` with `J` the all-ones matrix and
/// `E_ij = -||e_i - e_j||^2 / (2 l^2) + O(d^4)`. Then
/// `det(K) = det(J) + tr(adj(J) E) + O(d^4)`. For `M = 2`, `adj(J)` is
/// `[[1, -1], [-1, 1]]` and the first-order value is `||e_1 - e_2||^2 / l^2`,
/// proportional to the squared pairwise distance. For `M >= 3`, `J` has rank
/// one, so `adj(J) = 0` and the first-order term vanishes: `det(K) = O(d^4)`.
pub fn first_order_det_approx(embeddings: &[Vec<f64>], length_scale: f64) -> Result<f64> {
    let m = embeddings.len();
    if !(2..=3).contains(&m) {
        return Err(DvdError::InvalidArgument(format!(
            "first-order determinant approximation supports 2 <= M <= 3, got {m}"
        )));
    }
    if !(length_scale > 0.0) {
        return Err(DvdError::InvalidArgument(
            "length_scale must be positive".into(),
        ));
    }
    if m == 2 {
        let d = euclid(&embeddings[0], &embeddings[1]);
        Ok(d * d / (length_scale * length_scale))
    } else {
        Ok(0.0)
    }
}

/// Generates `k_clusters` clusters of `per_cluster` embeddings in `dim`
/// dimensions. Cluster `c` is centred at `c * separation` along the first
/// axis; members are offset by `spread` times a standard normal draw.
pub fn clustered_embeddings<R: Rng + ?Sized>(
    k_clusters: usize,
    per_cluster: usize,
    separation: f64,
    spread: f64,
    dim: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(k_clusters * per_cluster);
    for c in 0..k_clusters {
        for _ in 0..per_cluster {
            let mut e: Vec<f64> = (0..dim)
                .map(|_| spread * rng.sample::<f64, _>(StandardNormal))
                .collect();
            e[0] += c as f64 * separation;
            out.push(e);
        }
    }
    out
}

/// Clustered population under the SE kernel (`l = 1`).
///
/// Mean pairwise distance grows with `separation`, while the determinant is
/// capped by the within-cluster spread.
pub fn clustering_demo<R: Rng + ?Sized>(
    k_clusters: usize,
    per_cluster: usize,
    separation: f64,
    spread: f64,
    rng: &mut R,
) -> Result<DiversityReport> {
    if k_clusters < 2 || per_cluster < 2 {
        return Err(DvdError::InvalidArgument(
            "clustering demo needs at least 2 clusters of 2 agents".into(),
        ));
    }
    let e = clustered_embeddings(k_clusters, per_cluster, separation, spread, 4, rng);
    DiversityReport::compute(&e, &KernelSpec::default())
}

/// Product of within-cluster determinants: the value `det(K)` approaches
/// when clusters are far apart.
pub fn cluster_block_ceiling(
    embeddings: &[Vec<f64>],
    per_cluster: usize,
    spec: &KernelSpec,
) -> Result<f64> {
    embeddings
        .chunks(per_cluster)
        .map(|c| Ok(gram(spec, c)?.det()))
        .product()
}

/// `count` embeddings drawn from a random `rank`-dimensional subspace of
/// `R^dim`, scored with the normalized linear kernel.
pub fn hyperplane_demo<R: Rng + ?Sized>(
    count: usize,
    rank: usize,
    dim: usize,
    rng: &mut R,
) -> Result<DiversityReport> {
    if rank == 0 || rank > dim {
        return Err(DvdError::InvalidArgument("need 0 < rank <= dim".into()));
    }
    let basis: Vec<Vec<f64>> = (0..rank)
        .map(|_| {
            (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let e: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            let coef: Vec<f64> = (0..rank)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            (0..dim)
                .map(|d| basis.iter().zip(&coef).map(|(b, c)| b[d] * c).sum())
                .collect()
        })
        .collect();
    DiversityReport::compute(&e, &KernelSpec::new(KernelKind::LinearNormalized, 1.0)?)
}
