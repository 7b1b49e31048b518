//! Three-stage 1:N search: minutiae + global-embedding fusion over the full
//! gallery, virtual-minutiae re-scoring of the top K, and realigned
//! re-embedding of the top L. Also the closed-form latency model and a
//! measured benchmark.
//!
//! The gallery is read-only during search; stage scoring fans out over
//! gallery partitions via rayon and reduces with a deterministic
//! (−score, enrollment order) merge, so results are machine-independent.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::align::estimate_transform_trimmed;
use crate::matcher::{minutiae_similarity, Correspondences, LssrParams};
use crate::synth::{ProviderError, RealignProvider};
use crate::template::{FingerprintTemplate, GlobalEmbedding};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Fusion weights and candidate-list sizes for the three stages.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StageConfig {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub k: usize,
    pub l: usize,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            w1: 0.4,
            w2: 0.4,
            w3: 0.18,
            w4: 0.02,
            k: 1000,
            l: 500,
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        for (name, w) in [
            ("w1", self.w1),
            ("w2", self.w2),
            ("w3", self.w3),
            ("w4", self.w4),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(SearchError::BadConfig(format!("{name} = {w} must be ≥ 0")));
            }
        }
        let sum = self.w1 + self.w2 + self.w3 + self.w4;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(SearchError::BadConfig(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        if self.l == 0 || self.l > self.k {
            return Err(SearchError::BadConfig(format!(
                "need 1 ≤ L ≤ K, got K={} L={}",
                self.k, self.l
            )));
        }
        Ok(())
    }

    /// Embedding-only ablation config with the same list sizes.
    pub fn global_only(&self) -> Self {
        StageConfig {
            w1: 0.0,
            w2: 1.0,
            w3: 0.0,
            w4: 0.0,
            ..*self
        }
    }
}

/// Enrolled templates in insertion order; ids unique. Enrollment order is the
/// ranking tie-break key.
#[derive(Debug, Default)]
pub struct Gallery {
    templates: Vec<FingerprintTemplate>,
    index: HashMap<String, usize>,
}

impl Gallery {
    pub fn new() -> Self {
        Gallery::default()
    }

    pub fn enroll(&mut self, t: FingerprintTemplate) -> Result<(), SearchError> {
        if self.index.contains_key(&t.id) {
            return Err(SearchError::DuplicateId(t.id));
        }
        self.index.insert(t.id.clone(), self.templates.len());
        self.templates.push(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FingerprintTemplate> {
        self.index.get(id).map(|&i| &self.templates[i])
    }

    pub fn by_index(&self, i: usize) -> &FingerprintTemplate {
        &self.templates[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &FingerprintTemplate> {
        self.templates.iter()
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("gallery already contains id {0:?}")]
    DuplicateId(String),
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("zero-norm embedding")]
    ZeroNormEmbedding,
    #[error("stage {stage} requires component {component}")]
    MissingComponent { stage: u8, component: &'static str },
    #[error("realign provider: {0}")]
    Provider(ProviderError),
    #[error("latency model: {0}")]
    BadLatencyModel(String),
}

/// Clamped cosine over the 768-component concatenation: max(0, cos).
pub fn global_similarity(
    a: &GlobalEmbedding,
    b: &GlobalEmbedding,
) -> Result<f64, SearchError> {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (x, y) in a.concat().zip(b.concat()) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SearchError::ZeroNormEmbedding);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).max(0.0))
}

/// Per-candidate component scores; absent entries were not computed (their
/// stage was pruned away or their weight is zero).
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct ComponentScores {
    pub m: Option<f64>,
    pub c: Option<f64>,
    pub v: Option<f64>,
    pub c_prime: Option<f64>,
}

/// Fused score per Algorithm 1: S1 = w1·m + w2·c; S2 = S1 + w3·v;
/// S3 = S2 + w4·c′. Every component required by the stage must be present.
pub fn stage_score(
    stage: u8,
    components: &ComponentScores,
    cfg: &StageConfig,
) -> Result<f64, SearchError> {
    let need = |value: Option<f64>, component: &'static str| {
        value.ok_or(SearchError::MissingComponent { stage, component })
    };
    match stage {
        1 => Ok(cfg.w1 * need(components.m, "m")? + cfg.w2 * need(components.c, "c")?),
        2 => Ok(stage_score(1, components, cfg)? + cfg.w3 * need(components.v, "v")?),
        3 => Ok(stage_score(2, components, cfg)? + cfg.w4 * need(components.c_prime, "c_prime")?),
        other => Err(SearchError::BadConfig(format!("no stage {other}"))),
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StageRecord {
    pub gallery_index: usize,
    pub gallery_id: String,
    pub score: f64,
}

/// Per-search bookkeeping: candidate sets and scores per stage, cached
/// component scores, comparison counts and wall-clock stage times.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct SearchAudit {
    /// All N stage-1 candidates, sorted.
    pub stage1: Vec<StageRecord>,
    /// The K survivors re-scored with the virtual-minutiae term, sorted.
    pub stage2: Vec<StageRecord>,
    /// The L survivors re-scored with the realigned-embedding term, sorted.
    pub stage3: Vec<StageRecord>,
    /// Component scores per gallery index, shared across stages (m and c are
    /// computed once at stage 1 and reused verbatim).
    pub components: HashMap<usize, ComponentScores>,
    /// Comparisons performed per stage: (N, K, L) effective.
    pub comparisons: (usize, usize, usize),
    /// Set when the provider does not support realignment and the w4 term
    /// was dropped (S3 = S2).
    pub realign_unsupported: bool,
    /// Wall-clock milliseconds spent in each stage.
    pub stage_times_ms: (f64, f64, f64),
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Candidate {
    pub gallery_id: String,
    #[serde(skip)]
    pub enrollment_index: usize,
    pub score: f64,
    pub stage_scores: StageScores,
    pub components: ComponentScores,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StageScores {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

/// Ranked candidate list (length min(L, N)) plus the audit trail.
#[derive(Debug)]
pub struct SearchResult {
    pub candidates: Vec<Candidate>,
    pub audit: SearchAudit,
}

fn sort_records(records: &mut [(usize, f64)]) {
    records.sort_unstable_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
}

fn to_stage_records(gallery: &Gallery, records: &[(usize, f64)]) -> Vec<StageRecord> {
    records
        .iter()
        .map(|&(i, score)| StageRecord {
            gallery_index: i,
            gallery_id: gallery.by_index(i).id.clone(),
            score,
        })
        .collect()
}

/// Algorithm 1. K and L larger than N are truncated to N.
pub fn search(
    probe: &FingerprintTemplate,
    gallery: &Gallery,
    cfg: &StageConfig,
    lssr: &LssrParams,
    provider: &dyn RealignProvider,
) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    let n = gallery.len();
    if n == 0 {
        return Err(SearchError::EmptyGallery);
    }
    let k_eff = cfg.k.min(n);
    let l_eff = cfg.l.min(k_eff);

    // stage 1: minutiae + global cosine over all N
    let t0 = Instant::now();
    let stage1_parts: Vec<(usize, Option<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(usize, Option<f64>, f64), SearchError> {
            let g = gallery.by_index(i);
            let m = if cfg.w1 > 0.0 {
                Some(minutiae_similarity(&probe.minutiae, &g.minutiae, lssr).0)
            } else {
                None
            };
            let c = global_similarity(&probe.embedding, &g.embedding)?;
            Ok((i, m, c))
        })
        .collect::<Result<_, _>>()?;
    let mut components: HashMap<usize, ComponentScores> = HashMap::with_capacity(n);
    let mut stage1: Vec<(usize, f64)> = Vec::with_capacity(n);
    for (i, m, c) in stage1_parts {
        let s1 = cfg.w1 * m.unwrap_or(0.0) + cfg.w2 * c;
        components.insert(
            i,
            ComponentScores {
                m,
                c: Some(c),
                ..Default::default()
            },
        );
        stage1.push((i, s1));
    }
    sort_records(&mut stage1);
    let stage1_ms = t0.elapsed().as_secs_f64() * 1e3;

    // stage 2: add the virtual-minutiae term over the top K
    let t0 = Instant::now();
    let survivors1: Vec<(usize, f64)> = stage1.iter().take(k_eff).copied().collect();
    let stage2_parts: Vec<(usize, f64, Option<f64>, Correspondences)> = survivors1
        .par_iter()
        .map(|&(i, s1)| -> Result<_, SearchError> {
            let g = gallery.by_index(i);
            let (v, corr) = if cfg.w3 > 0.0 || cfg.w4 > 0.0 {
                let (v, corr) =
                    minutiae_similarity(&probe.virtual_minutiae, &g.virtual_minutiae, lssr);
                (Some(v), corr)
            } else {
                (None, Correspondences::default())
            };
            let s2 = s1 + cfg.w3 * v.unwrap_or(0.0);
            Ok((i, s2, v, corr))
        })
        .collect::<Result<_, _>>()?;
    let mut stage2: Vec<(usize, f64)> = stage2_parts.iter().map(|&(i, s2, _, _)| (i, s2)).collect();
    let mut correspondences: HashMap<usize, &Correspondences> = HashMap::with_capacity(k_eff);
    for (i, _, v, corr) in &stage2_parts {
        components.get_mut(i).expect("stage-1 entry").v = *v;
        correspondences.insert(*i, corr);
    }
    sort_records(&mut stage2);
    let stage2_ms = t0.elapsed().as_secs_f64() * 1e3;

    // stage 3: realign + re-embed the top L
    let t0 = Instant::now();
    let survivors2: Vec<(usize, f64)> = stage2.iter().take(l_eff).copied().collect();
    let mut realign_unsupported = false;
    let mut stage3: Vec<(usize, f64)> = Vec::with_capacity(l_eff);
    for &(i, s2) in &survivors2 {
        let g = gallery.by_index(i);
        let cached = components.get(&i).copied().expect("stage-1 entry");
        let c = cached.c.expect("cached cosine");
        let c_prime = if cfg.w4 == 0.0 {
            None
        } else {
            let pairs: Vec<((f64, f64), (f64, f64))> = correspondences
                .get(&i)
                .map(|corr| {
                    corr.pairs
                        .iter()
                        .map(|p| {
                            let pm = &probe.virtual_minutiae.minutiae[p.probe];
                            let gm = &g.virtual_minutiae.minutiae[p.gallery];
                            ((pm.x as f64, pm.y as f64), (gm.x as f64, gm.y as f64))
                        })
                        .collect()
                })
                .unwrap_or_default();
            if pairs.len() < 2 {
                // too few correspondences to align: identity, c′ = c
                Some(c)
            } else {
                match estimate_transform_trimmed(&pairs) {
                    Err(_) => Some(c),
                    Ok(transform) => match provider.embed_realigned(probe, g, &transform) {
                        Ok((zp, zg)) => Some(global_similarity(&zp, &zg)?),
                        Err(ProviderError::Unsupported) => {
                            realign_unsupported = true;
                            None
                        }
                        Err(e) => return Err(SearchError::Provider(e)),
                    },
                }
            }
        };
        components.get_mut(&i).expect("stage-1 entry").c_prime = c_prime;
        let s3 = s2 + cfg.w4 * c_prime.unwrap_or(0.0);
        stage3.push((i, s3));
    }
    sort_records(&mut stage3);
    let stage3_ms = t0.elapsed().as_secs_f64() * 1e3;

    let stage1_records = to_stage_records(gallery, &stage1);
    let stage2_records = to_stage_records(gallery, &stage2);
    let stage3_records = to_stage_records(gallery, &stage3);

    let s2_by_index: HashMap<usize, f64> = stage2.iter().copied().collect();
    let s1_by_index: HashMap<usize, f64> = stage1.iter().copied().collect();
    let candidates = stage3
        .iter()
        .map(|&(i, s3)| {
            let comp = components[&i];
            Candidate {
                gallery_id: gallery.by_index(i).id.clone(),
                enrollment_index: i,
                score: s3,
                stage_scores: StageScores {
                    s1: s1_by_index[&i],
                    s2: s2_by_index[&i],
                    s3,
                },
                components: comp,
            }
        })
        .collect();

    Ok(SearchResult {
        candidates,
        audit: SearchAudit {
            stage1: stage1_records,
            stage2: stage2_records,
            stage3: stage3_records,
            components,
            comparisons: (n, k_eff, l_eff),
            realign_unsupported,
            stage_times_ms: (stage1_ms, stage2_ms, stage3_ms),
        },
    })
}

/// Eq. 1 inputs: per-comparison stage latencies (ms) and list sizes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LatencyModel {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub n: usize,
    pub k: usize,
    pub l: usize,
}

/// Eq. 1: t = t1 + (K/N)·t2 + (L/N)·t3, milliseconds per comparison.
pub fn predict_latency(model: &LatencyModel) -> Result<f64, SearchError> {
    if !(model.t1 > 0.0 && model.t2 > 0.0 && model.t3 > 0.0) {
        return Err(SearchError::BadLatencyModel(
            "stage latencies must be positive".into(),
        ));
    }
    if model.n == 0 || model.l > model.k || model.k > model.n {
        return Err(SearchError::BadLatencyModel(format!(
            "need 1 ≤ L ≤ K ≤ N, got N={} K={} L={}",
            model.n, model.k, model.l
        )));
    }
    let n = model.n as f64;
    Ok(model.t1 + (model.k as f64 / n) * model.t2 + (model.l as f64 / n) * model.t3)
}

/// Measured benchmark over Q probes: per-stage per-comparison averages, count
/// statistics, and the Eq. 1 self-consistency figure.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchReport {
    pub n: usize,
    pub q: usize,
    pub k: usize,
    pub l: usize,
    /// Measured per-comparison stage latencies, ms.
    pub measured: LatencyModel,
    /// Total measured search time divided by N·Q, ms.
    pub measured_per_comparison_ms: f64,
    /// Eq. 1 fed with the measured t1–t3.
    pub predicted_per_comparison_ms: f64,
    pub comparisons: (usize, usize, usize),
    pub avg_probe_minutiae: f64,
    pub avg_probe_virtual_minutiae: f64,
    pub avg_gallery_minutiae: f64,
    pub avg_gallery_virtual_minutiae: f64,
}

pub fn measure_latency(
    gallery: &Gallery,
    probes: &[FingerprintTemplate],
    cfg: &StageConfig,
    lssr: &LssrParams,
    provider: &dyn RealignProvider,
) -> Result<BenchReport, SearchError> {
    if probes.is_empty() {
        return Err(SearchError::BadConfig("no probes".into()));
    }
    // warm-up pass on the first probe, not timed
    let _ = search(&probes[0], gallery, cfg, lssr, provider)?;

    let mut stage_ms = (0.0, 0.0, 0.0);
    let mut comparisons = (0usize, 0usize, 0usize);
    let mut total_ms = 0.0;
    for probe in probes {
        let start = Instant::now();
        let result = search(probe, gallery, cfg, lssr, provider)?;
        total_ms += start.elapsed().as_secs_f64() * 1e3;
        let a = &result.audit;
        stage_ms.0 += a.stage_times_ms.0;
        stage_ms.1 += a.stage_times_ms.1;
        stage_ms.2 += a.stage_times_ms.2;
        comparisons.0 += a.comparisons.0;
        comparisons.1 += a.comparisons.1;
        comparisons.2 += a.comparisons.2;
    }
    let n = gallery.len();
    let q = probes.len();
    let measured = LatencyModel {
        t1: stage_ms.0 / comparisons.0 as f64,
        t2: stage_ms.1 / comparisons.1 as f64,
        t3: stage_ms.2 / comparisons.2 as f64,
        n,
        k: cfg.k.min(n),
        l: cfg.l.min(cfg.k.min(n)),
    };
    let avg = |values: Vec<usize>| -> f64 {
        values.iter().sum::<usize>() as f64 / values.len().max(1) as f64
    };
    Ok(BenchReport {
        n,
        q,
        k: measured.k,
        l: measured.l,
        measured_per_comparison_ms: total_ms / comparisons.0 as f64,
        predicted_per_comparison_ms: predict_latency(&measured)?,
        measured,
        comparisons,
        avg_probe_minutiae: avg(probes.iter().map(|p| p.minutiae.len()).collect()),
        avg_probe_virtual_minutiae: avg(probes.iter().map(|p| p.virtual_minutiae.len()).collect()),
        avg_gallery_minutiae: avg(gallery.iter().map(|g| g.minutiae.len()).collect()),
        avg_gallery_virtual_minutiae: avg(
            gallery.iter().map(|g| g.virtual_minutiae.len()).collect(),
        ),
    })
}
