//! Local similarity scoring: descriptor similarity matrix, LSS-R
//! correspondence selection, and the normalized minutiae similarity score
//! used for both real and virtual minutiae.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::template::{Descriptor, Minutia, MinutiaSet};

/// Cosine similarities between all probe and gallery descriptors.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub rows: usize,
    pub cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

/// One-to-one minutiae pairings; `similarity` is the original descriptor
/// cosine of the pair (the relaxed score only ranks).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrespondencePair {
    pub probe: usize,
    pub gallery: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Correspondences {
    pub pairs: Vec<CorrespondencePair>,
}

impl Correspondences {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// LSS-R parameters. The defaults follow MCC-style magnitudes and are
/// exposed through the engine config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LssrParams {
    pub relaxation_iterations: usize,
    /// Relaxation mixing weight w_R in [0, 1].
    pub relaxation_weight: f64,
    /// Number of strongest pairs feeding each relaxation update.
    pub neighbor_count: usize,
    /// σ_d, pixels.
    pub distance_sigma: f64,
    /// σ_θ, radians.
    pub angle_sigma: f64,
    /// Cap on selected pairs; `None` means min(m_p, m_g).
    pub max_pairs: Option<usize>,
}

impl Default for LssrParams {
    fn default() -> Self {
        LssrParams {
            relaxation_iterations: 5,
            relaxation_weight: 0.5,
            neighbor_count: 5,
            distance_sigma: 30.0,
            angle_sigma: PI / 6.0,
            max_pairs: None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MatcherError {
    #[error("similarity matrix is {rows}×{cols} but minutiae counts are {probe}×{gallery}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        probe: usize,
        gallery: usize,
    },
}

/// value[i][j] = ⟨Dp[i], Dg[j]⟩ over unit descriptors, accumulated in f64.
pub fn descriptor_similarity_matrix(dp: &[Descriptor], dg: &[Descriptor]) -> SimilarityMatrix {
    let mut values = Vec::with_capacity(dp.len() * dg.len());
    for a in dp {
        for b in dg {
            values.push(a.dot(b));
        }
    }
    SimilarityMatrix {
        rows: dp.len(),
        cols: dg.len(),
        values,
    }
}

/// Magnitude of the circular difference between two angles, in [0, π].
#[inline]
fn circ_delta(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Pairwise geometry within one minutia set, row-major over (center, other):
/// inter-minutia distance, minutia-angle difference, and the angle between
/// the center's direction and the line joining the two.
struct PairGeometry {
    dist: f64,
    rel_theta: f64,
    rel_dir: f64,
}

fn pair_geometry(set: &[Minutia]) -> Vec<PairGeometry> {
    let n = set.len();
    let mut out = Vec::with_capacity(n * n);
    for a in set {
        for b in set {
            let dir = ((b.y - a.y) as f64).atan2((b.x - a.x) as f64);
            out.push(PairGeometry {
                dist: ((a.x - b.x) as f64).hypot((a.y - b.y) as f64),
                rel_theta: a.theta as f64 - b.theta as f64,
                rel_dir: a.theta as f64 - dir,
            });
        }
    }
    out
}

/// Geometric compatibility of candidate pairs a and b:
/// ρ = exp(−Δd²/2σ_d²)·exp(−Δα²/2σ_θ²)·exp(−Δβ²/2σ_θ²) with
/// Δd the inter-minutia distance difference, Δα the circular difference of
/// minutia-angle differences, and Δβ the circular difference of the angles
/// subtended by the inter-minutia direction. Scalar definition kept for the
/// reference oracle; production uses the precomputed-table form in `lssr`.
#[cfg(test)]
fn compatibility(
    pa: &Minutia,
    pb: &Minutia,
    ga: &Minutia,
    gb: &Minutia,
    params: &LssrParams,
) -> f64 {
    let dp = ((pa.x - pb.x) as f64).hypot((pa.y - pb.y) as f64);
    let dg = ((ga.x - gb.x) as f64).hypot((ga.y - gb.y) as f64);
    let dd = (dp - dg).abs();

    let da = circ_delta(
        pa.theta as f64 - pb.theta as f64,
        ga.theta as f64 - gb.theta as f64,
    );

    let dir_p = ((pb.y - pa.y) as f64).atan2((pb.x - pa.x) as f64);
    let dir_g = ((gb.y - ga.y) as f64).atan2((gb.x - ga.x) as f64);
    let db = circ_delta(pa.theta as f64 - dir_p, ga.theta as f64 - dir_g);

    let sd2 = 2.0 * params.distance_sigma * params.distance_sigma;
    let st2 = 2.0 * params.angle_sigma * params.angle_sigma;
    (-dd * dd / sd2).exp() * (-da * da / st2).exp() * (-db * db / st2).exp()
}

/// Relaxation over all candidate pairs followed by greedy one-to-one
/// selection by descending relaxed score (ties by ascending (probe, gallery)).
pub fn lssr(
    similarity: &SimilarityMatrix,
    probe: &[Minutia],
    gallery: &[Minutia],
    params: &LssrParams,
) -> Result<Correspondences, MatcherError> {
    if similarity.rows != probe.len() || similarity.cols != gallery.len() {
        return Err(MatcherError::DimensionMismatch {
            rows: similarity.rows,
            cols: similarity.cols,
            probe: probe.len(),
            gallery: gallery.len(),
        });
    }
    if probe.is_empty() || gallery.is_empty() {
        return Ok(Correspondences::default());
    }

    let n_pairs = probe.len() * gallery.len();
    let pair_at = |idx: usize| (idx / gallery.len(), idx % gallery.len());
    let mut scores: Vec<f64> = similarity.values.clone();

    let probe_geom = pair_geometry(probe);
    let gallery_geom = pair_geometry(gallery);
    let sd2 = 2.0 * params.distance_sigma * params.distance_sigma;
    let st2 = 2.0 * params.angle_sigma * params.angle_sigma;
    // ρ(a, b) from the precomputed tables; identical quantities to
    // `compatibility` with the three exponentials fused into one.
    let rho = |a: usize, b: usize| {
        let (pi, gi) = pair_at(a);
        let (pj, gj) = pair_at(b);
        let p = &probe_geom[pi * probe.len() + pj];
        let g = &gallery_geom[gi * gallery.len() + gj];
        let dd = p.dist - g.dist;
        let da = circ_delta(p.rel_theta, g.rel_theta);
        let db = circ_delta(p.rel_dir, g.rel_dir);
        (-(dd * dd / sd2 + (da * da + db * db) / st2)).exp()
    };
    // ρ columns for the strongest pairs are iteration-independent; the top
    // set changes little between iterations, so cache them across the loop.
    let mut rho_cache: HashMap<usize, Vec<f64>> = HashMap::new();

    for _ in 0..params.relaxation_iterations {
        // the n_R + 1 strongest pairs cover every "strongest excluding self" set
        let top = top_indices(&scores, params.neighbor_count + 1, gallery.len());
        for &b in &top {
            rho_cache
                .entry(b)
                .or_insert_with(|| (0..n_pairs).map(|a| rho(a, b)).collect());
        }
        let columns: Vec<(usize, f64, &[f64])> = top
            .iter()
            .map(|&b| (b, scores[b], rho_cache[&b].as_slice()))
            .collect();
        let mut next = scores.clone();
        for (a, slot) in next.iter_mut().enumerate() {
            let mut sum = 0.0;
            let mut count = 0;
            for &(b, score_b, column) in &columns {
                if b == a || count == params.neighbor_count {
                    continue;
                }
                sum += column[a] * score_b;
                count += 1;
            }
            if count > 0 {
                *slot = (1.0 - params.relaxation_weight) * scores[a]
                    + params.relaxation_weight * sum / count as f64;
            }
        }
        scores = next;
    }

    // greedy one-to-one by descending relaxed score
    let mut order: Vec<usize> = (0..n_pairs).collect();
    order.sort_unstable_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(pair_at(a).cmp(&pair_at(b)))
    });

    let cap = params.max_pairs.unwrap_or(usize::MAX).min(probe.len().min(gallery.len()));
    let mut probe_used = vec![false; probe.len()];
    let mut gallery_used = vec![false; gallery.len()];
    let mut pairs = Vec::with_capacity(cap);
    for idx in order {
        if pairs.len() == cap {
            break;
        }
        let (pi, gi) = pair_at(idx);
        if probe_used[pi] || gallery_used[gi] {
            continue;
        }
        probe_used[pi] = true;
        gallery_used[gi] = true;
        pairs.push(CorrespondencePair {
            probe: pi,
            gallery: gi,
            similarity: similarity.get(pi, gi),
        });
    }
    Ok(Correspondences { pairs })
}

/// Indices of the `k` largest scores, ties by ascending (probe, gallery).
fn top_indices(scores: &[f64], k: usize, _cols: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let k = k.min(idx.len());
    let pivot = k.saturating_sub(1).min(idx.len().saturating_sub(1));
    idx.select_nth_unstable_by(pivot, |&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx.sort_unstable_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Summed descriptor cosine over LSS-R correspondences, normalized by
/// min(m_p, m_g) and clamped to [0, 1]. Either side empty scores 0.
pub fn minutiae_similarity(
    probe: &MinutiaSet,
    gallery: &MinutiaSet,
    params: &LssrParams,
) -> (f64, Correspondences) {
    if probe.is_empty() || gallery.is_empty() {
        return (0.0, Correspondences::default());
    }
    let similarity = descriptor_similarity_matrix(&probe.descriptors, &gallery.descriptors);
    let corr = lssr(&similarity, &probe.minutiae, &gallery.minutiae, params)
        .expect("matrix dimensions match by construction");
    let raw: f64 = corr.pairs.iter().map(|p| p.similarity).sum();
    let denom = probe.len().min(gallery.len()).max(1) as f64;
    ((raw / denom).clamp(0.0, 1.0), corr)
}
