//! Synthetic identity provider: seeded master fingers, an observation model
//! that degrades them into probe/gallery templates, and the realignment
//! re-embedding hook used by stage 3 of the search.
//!
//! Every operation is a pure function of its arguments including seeds, so
//! corpora are reproducible bit-for-bit. Providers are safe for concurrent
//! read-only use.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::align::SimilarityTransform;
use crate::mask::{place_virtual_minutiae, OrientationField, SegmentationMask};
use crate::template::{
    wrap_angle, Descriptor, FingerprintTemplate, GlobalEmbedding, Minutia, MinutiaKind,
    MinutiaSet, Modality, DESCRIPTOR_DIM, EMBEDDING_HALF_DIM,
};

const FRAME: usize = 512;
const GRID_SPACING: usize = 16;

// stream tags keep independent rng streams per derived quantity
const TAG_MASK: u64 = 1;
const TAG_MINUTIAE: u64 = 2;
const TAG_EMBEDDING: u64 = 3;
const TAG_ORIENT: u64 = 4;
const TAG_CELL: u64 = 5;
const TAG_OBSERVE: u64 = 6;
const TAG_REALIGN: u64 = 7;

/// Deterministic rng from a list of u64 material words.
fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut h: u64 = 0xcbf29ce484222325;
    for (i, part) in parts.iter().enumerate() {
        h ^= part.wrapping_add(0x9e3779b97f4a7c15).rotate_left((i as u32) % 63);
        h = h.wrapping_mul(0x100000001b3);
        let chunk = i % 4;
        let mixed = h ^ part.rotate_right(17);
        key[chunk * 8..chunk * 8 + 8]
            .iter_mut()
            .zip(mixed.to_le_bytes())
            .for_each(|(k, b)| *k ^= b);
    }
    // spread the running hash over the whole key
    for chunk in 0..4 {
        h = h.wrapping_mul(0x100000001b3).wrapping_add(chunk as u64 + 1);
        key[chunk * 8..chunk * 8 + 8]
            .iter_mut()
            .zip(h.to_le_bytes())
            .for_each(|(k, b)| *k ^= b);
    }
    ChaCha8Rng::from_seed(key)
}

fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream layout simple
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.iter().map(|x| (x / norm) as f32).collect();
        }
    }
}

/// Adds isotropic Gaussian noise of expected vector norm `sigma`, then
/// renormalizes to the unit sphere.
fn perturb_unit(values: &[f32], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let dim = values.len();
    let per_component = sigma / (dim as f64).sqrt();
    let noisy: Vec<f64> = values
        .iter()
        .map(|v| *v as f64 + per_component * standard_normal(rng))
        .collect();
    let norm = noisy.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    noisy.iter().map(|x| (x / norm) as f32).collect()
}

/// Shape and density knobs for master synthesis. Smaller masks mean fewer
/// virtual minutiae and faster matching; the defaults aim at desk-scale runs.
#[derive(Debug, Clone, Copy)]
pub struct SynthesisConfig {
    pub mask_radius_x: (f64, f64),
    pub mask_radius_y: (f64, f64),
    pub minutiae_count: (usize, usize),
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            mask_radius_x: (60.0, 85.0),
            mask_radius_y: (70.0, 95.0),
            minutiae_count: (25, 50),
        }
    }
}

impl SynthesisConfig {
    /// Smaller fingers for large-N experiments on modest hardware.
    pub fn compact() -> Self {
        SynthesisConfig {
            mask_radius_x: (40.0, 55.0),
            mask_radius_y: (50.0, 65.0),
            minutiae_count: (20, 30),
        }
    }

    /// Minimal fingers for very large sweeps; a handful of virtual minutiae
    /// per print keeps per-comparison cost low without changing the pipeline.
    pub fn tiny() -> Self {
        SynthesisConfig {
            mask_radius_x: (26.0, 36.0),
            mask_radius_y: (30.0, 42.0),
            minutiae_count: (12, 18),
        }
    }
}

/// The ground-truth finger behind synthetic observations: canonical-frame
/// minutiae and descriptors, an identity embedding, a foreground mask and a
/// smooth analytic orientation field.
#[derive(Debug, Clone)]
pub struct MasterFinger {
    pub identity_id: String,
    pub seed: u64,
    pub index: u64,
    pub minutiae: Vec<Minutia>,
    pub descriptors: Vec<Descriptor>,
    pub identity_embedding: GlobalEmbedding,
    pub mask: SegmentationMask,
    /// Orientation field model θ(x, y) = base + kx·(x−c)/F + ky·(y−c)/F mod π.
    pub orient: (f64, f64, f64),
}

impl MasterFinger {
    /// Analytic ridge orientation at a canonical-frame point, in [0, π).
    pub fn orientation_at(&self, x: f64, y: f64) -> f64 {
        let (base, kx, ky) = self.orient;
        let c = FRAME as f64 / 2.0;
        (base + kx * (x - c) / FRAME as f64 + ky * (y - c) / FRAME as f64).rem_euclid(PI)
    }

    /// Descriptor attached to the virtual-minutia grid cell covering the
    /// canonical-frame point (x, y). Deterministic per (identity, cell).
    pub fn virtual_descriptor_at(&self, x: f64, y: f64) -> Descriptor {
        let half = GRID_SPACING as f64 / 2.0;
        let cell_x = ((x - half) / GRID_SPACING as f64).round() as i64;
        let cell_y = ((y - half) / GRID_SPACING as f64).round() as i64;
        let mut rng = rng_for(&[
            self.seed,
            self.index,
            TAG_CELL,
            cell_x as u64,
            cell_y as u64 ^ 0x5555_5555_5555_5555,
        ]);
        Descriptor::new(random_unit(&mut rng, DESCRIPTOR_DIM)).expect("unit vector")
    }
}

/// Identity embedding as a pure function of (seed, index), recomputable
/// without building the full master.
pub fn identity_embedding(seed: u64, index: u64) -> GlobalEmbedding {
    let mut rng = rng_for(&[seed, index, TAG_EMBEDDING]);
    let z_a = random_unit(&mut rng, EMBEDDING_HALF_DIM);
    let z_c = random_unit(&mut rng, EMBEDDING_HALF_DIM);
    GlobalEmbedding::new(z_a, z_c).expect("unit halves")
}

/// Deterministic master finger for (seed, index).
pub fn synth_master(seed: u64, index: u64) -> MasterFinger {
    synth_master_with(&SynthesisConfig::default(), seed, index)
}

pub fn synth_master_with(cfg: &SynthesisConfig, seed: u64, index: u64) -> MasterFinger {
    let c = FRAME as f64 / 2.0;

    let mut mask_rng = rng_for(&[seed, index, TAG_MASK]);
    let rx = mask_rng.gen_range(cfg.mask_radius_x.0..=cfg.mask_radius_x.1);
    let ry = mask_rng.gen_range(cfg.mask_radius_y.0..=cfg.mask_radius_y.1);
    let mut mask = SegmentationMask::zeros(FRAME, FRAME);
    let x0 = (c - rx).floor().max(0.0) as usize;
    let x1 = (c + rx).ceil().min(FRAME as f64 - 1.0) as usize;
    let y0 = (c - ry).floor().max(0.0) as usize;
    let y1 = (c + ry).ceil().min(FRAME as f64 - 1.0) as usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = (x as f64 - c) / rx;
            let dy = (y as f64 - c) / ry;
            if dx * dx + dy * dy <= 1.0 {
                mask.set(x, y, 1);
            }
        }
    }

    let mut orient_rng = rng_for(&[seed, index, TAG_ORIENT]);
    let orient = (
        orient_rng.gen_range(0.0..PI),
        orient_rng.gen_range(-1.0..1.0),
        orient_rng.gen_range(-1.0..1.0),
    );

    let mut minu_rng = rng_for(&[seed, index, TAG_MINUTIAE]);
    let count = minu_rng.gen_range(cfg.minutiae_count.0..=cfg.minutiae_count.1);
    let mut minutiae: Vec<Minutia> = Vec::with_capacity(count);
    let mut attempts = 0;
    while minutiae.len() < count && attempts < count * 200 {
        attempts += 1;
        let x = minu_rng.gen_range(c - rx..c + rx) as f32;
        let y = minu_rng.gen_range(c - ry..c + ry) as f32;
        if mask.get(x as usize, y as usize) == 0 {
            continue;
        }
        // keep minutiae separated so observation jitter cannot merge them
        if minutiae
            .iter()
            .any(|m| (m.x - x).hypot(m.y - y) < 8.0)
        {
            continue;
        }
        let theta = minu_rng.gen_range(0.0..std::f32::consts::TAU);
        let kind = if minu_rng.gen_bool(0.5) {
            MinutiaKind::RidgeEnding
        } else {
            MinutiaKind::Bifurcation
        };
        minutiae.push(Minutia::new(x, y, theta, kind));
    }
    let descriptors = minutiae
        .iter()
        .map(|_| Descriptor::new(random_unit(&mut minu_rng, DESCRIPTOR_DIM)).expect("unit vector"))
        .collect();

    MasterFinger {
        identity_id: format!("id{index:06}"),
        seed,
        index,
        minutiae,
        descriptors,
        identity_embedding: identity_embedding(seed, index),
        mask,
        orient,
    }
}

/// Degradation knobs for one observation of a master finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationParams {
    /// Rotation sampled uniformly in [−range, range] radians.
    pub rotation_range: f64,
    /// Translation per axis sampled uniformly in [−range, range] pixels.
    pub translation_range: f64,
    /// Per-minutia dropout probability in [0, 1].
    pub dropout: f64,
    /// Position jitter σ, pixels.
    pub position_jitter: f64,
    /// Angle jitter σ, radians.
    pub angle_jitter: f64,
    /// Descriptor noise σ (expected noise-vector norm), ≥ 0.
    pub descriptor_noise: f64,
    /// Embedding noise σ, ≥ 0.
    pub embedding_noise: f64,
    /// Fraction of the frame retained by the centered crop window, in (0, 1].
    pub crop_fraction: f64,
}

impl ObservationParams {
    /// Latent-like probe degradation.
    pub fn probe_default() -> Self {
        ObservationParams {
            rotation_range: PI / 6.0,
            translation_range: 24.0,
            dropout: 0.2,
            position_jitter: 1.5,
            angle_jitter: 0.05,
            descriptor_noise: 0.4,
            embedding_noise: 6.0,
            crop_fraction: 0.85,
        }
    }

    /// High-quality gallery (rolled-like) capture.
    pub fn gallery_default() -> Self {
        ObservationParams {
            rotation_range: 0.1,
            translation_range: 6.0,
            dropout: 0.02,
            position_jitter: 0.5,
            angle_jitter: 0.02,
            descriptor_noise: 0.15,
            embedding_noise: 0.15,
            crop_fraction: 1.0,
        }
    }

    /// Noiseless pass-through (identity geometry still sampled).
    pub fn noiseless() -> Self {
        ObservationParams {
            rotation_range: 0.0,
            translation_range: 0.0,
            dropout: 0.0,
            position_jitter: 0.0,
            angle_jitter: 0.0,
            descriptor_noise: 0.0,
            embedding_noise: 0.0,
            crop_fraction: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let ok = self.rotation_range >= 0.0
            && self.translation_range >= 0.0
            && (0.0..=1.0).contains(&self.dropout)
            && self.position_jitter >= 0.0
            && self.angle_jitter >= 0.0
            && self.descriptor_noise >= 0.0
            && self.embedding_noise >= 0.0
            && self.crop_fraction > 0.0
            && self.crop_fraction <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(ProviderError::BadParams)
        }
    }
}

/// Ground truth attached to a synthetic observation. Evaluation code must
/// not read the transform; it exists for alignment tests and the
/// realignment provider.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ObservationTruth {
    pub identity_id: String,
    pub identity_index: u64,
    /// Maps canonical master-frame coordinates to observed-frame coordinates.
    pub transform: SimilarityTransform,
    /// Set when the crop left no minutiae.
    pub degenerate: bool,
}

/// A synthesized template plus its ground truth.
#[derive(Debug, Clone)]
pub struct ObservedTemplate {
    pub template: FingerprintTemplate,
    pub truth: ObservationTruth,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("observation parameters out of range")]
    BadParams,
    #[error("realignment re-embedding unsupported by this provider")]
    Unsupported,
    #[error("unknown template id {0:?}")]
    UnknownTemplate(String),
}

/// Applies a seeded rigid transform, dropout and jitter to the master
/// minutiae; regenerates virtual minutiae on the transformed mask; noises
/// descriptors and the embedding.
pub fn synth_observe(
    master: &MasterFinger,
    params: &ObservationParams,
    seed: u64,
    template_id: &str,
    modality: Modality,
) -> Result<ObservedTemplate, ProviderError> {
    params.validate()?;
    let mut rng = rng_for(&[master.seed, master.index, TAG_OBSERVE, seed]);
    let c = FRAME as f64 / 2.0;

    // rigid transform about the frame center
    let rotation = if params.rotation_range > 0.0 {
        rng.gen_range(-params.rotation_range..=params.rotation_range)
    } else {
        0.0
    };
    let (tx, ty) = if params.translation_range > 0.0 {
        (
            rng.gen_range(-params.translation_range..=params.translation_range),
            rng.gen_range(-params.translation_range..=params.translation_range),
        )
    } else {
        (0.0, 0.0)
    };
    let (sin, cos) = rotation.sin_cos();
    let transform = SimilarityTransform {
        scale: 1.0,
        rotation,
        tx: c + tx - (cos * c - sin * c),
        ty: c + ty - (sin * c + cos * c),
    };
    let inverse = transform.inverse();

    // observed mask: back-project each pixel, intersect the crop window
    let crop_half = params.crop_fraction * FRAME as f64 / 2.0;
    let mut mask = SegmentationMask::zeros(FRAME, FRAME);
    for y in 0..FRAME {
        // incremental affine evaluation along the row
        let (mut mx, mut my) = inverse.apply((0.0, y as f64));
        let (step_x, step_y) = {
            let (ax, ay) = inverse.apply((1.0, y as f64));
            (ax - mx, ay - my)
        };
        for x in 0..FRAME {
            let in_crop = (x as f64 - c).abs() <= crop_half && (y as f64 - c).abs() <= crop_half;
            if in_crop
                && mx >= 0.0
                && my >= 0.0
                && (mx as usize) < FRAME
                && (my as usize) < FRAME
                && master.mask.get(mx as usize, my as usize) != 0
            {
                mask.set(x, y, 1);
            }
            mx += step_x;
            my += step_y;
        }
    }

    // minutiae: transform, jitter, dropout, clip to the observed mask
    let mut minutiae = Vec::new();
    let mut descriptors = Vec::new();
    for (m, d) in master.minutiae.iter().zip(&master.descriptors) {
        let drop = params.dropout > 0.0 && rng.gen_bool(params.dropout.min(1.0));
        let (ox, oy) = transform.apply((m.x as f64, m.y as f64));
        let jx = ox + params.position_jitter * standard_normal(&mut rng);
        let jy = oy + params.position_jitter * standard_normal(&mut rng);
        let jt = m.theta as f64 + rotation + params.angle_jitter * standard_normal(&mut rng);
        let noisy = if params.descriptor_noise > 0.0 {
            perturb_unit(d.values(), params.descriptor_noise, &mut rng)
        } else {
            d.values().to_vec()
        };
        if drop {
            continue;
        }
        if jx < 0.0 || jy < 0.0 || jx >= FRAME as f64 || jy >= FRAME as f64 {
            continue;
        }
        if mask.get(jx as usize, jy as usize) == 0 {
            continue;
        }
        minutiae.push(Minutia::new(jx as f32, jy as f32, wrap_angle(jt as f32), m.kind));
        descriptors.push(Descriptor::new(noisy).expect("unit descriptor"));
    }

    // virtual minutiae on the observed grid; orientation and descriptors
    // derive from the back-projected master point
    let field = OrientationField::from_fn(FRAME, FRAME, GRID_SPACING, |x, y| {
        let (mx, my) = inverse.apply((x, y));
        (master.orientation_at(mx, my) + rotation, 1.0)
    });
    let virtual_points = place_virtual_minutiae(&mask, &field, GRID_SPACING);
    let mut virtual_descriptors = Vec::with_capacity(virtual_points.len());
    for p in &virtual_points {
        let (mx, my) = inverse.apply((p.x as f64, p.y as f64));
        let base = master.virtual_descriptor_at(mx, my);
        let noisy = if params.descriptor_noise > 0.0 {
            perturb_unit(base.values(), params.descriptor_noise, &mut rng)
        } else {
            base.values().to_vec()
        };
        virtual_descriptors.push(Descriptor::new(noisy).expect("unit descriptor"));
    }

    // embedding: identity embedding plus noise, per half
    let make_half = |half: &[f32], rng: &mut ChaCha8Rng| {
        if params.embedding_noise > 0.0 {
            perturb_unit(half, params.embedding_noise, rng)
        } else {
            half.to_vec()
        }
    };
    let z_a = make_half(master.identity_embedding.z_a(), &mut rng);
    let z_c = make_half(master.identity_embedding.z_c(), &mut rng);

    let degenerate = minutiae.is_empty();
    let template = FingerprintTemplate {
        id: template_id.to_owned(),
        modality,
        minutiae: MinutiaSet::new(minutiae, descriptors).expect("parallel arrays"),
        virtual_minutiae: MinutiaSet::new(virtual_points, virtual_descriptors)
            .expect("parallel arrays"),
        embedding: GlobalEmbedding::new(z_a, z_c).expect("unit halves"),
        width: FRAME as u16,
        height: FRAME as u16,
        ppi: 500,
    };
    Ok(ObservedTemplate {
        template,
        truth: ObservationTruth {
            identity_id: master.identity_id.clone(),
            identity_index: master.index,
            transform,
            degenerate,
        },
    })
}

/// Provider contract for stage-3 re-embedding of an aligned pair.
pub trait RealignProvider: Sync {
    fn embed_realigned(
        &self,
        probe: &FingerprintTemplate,
        gallery: &FingerprintTemplate,
        transform: &SimilarityTransform,
    ) -> Result<(GlobalEmbedding, GlobalEmbedding), ProviderError>;
}

/// Synthetic realignment provider: re-embeds both templates with noise whose
/// variance scales with the residual between the supplied transform and the
/// true relative transform, so better alignment gives a higher genuine
/// cosine.
#[derive(Debug, Default, Clone, serde::Serialize, serde::Deserialize)]
pub struct SyntheticRealignProvider {
    /// True observation transform per template id (master frame → observed).
    pub transforms: HashMap<String, SimilarityTransform>,
}

/// Pixels of residual per unit of re-embedding noise scale.
const REALIGN_NOISE_PER_PX: f64 = 0.05;
const REALIGN_NOISE_CAP: f64 = 4.0;

impl SyntheticRealignProvider {
    pub fn record(&mut self, template_id: &str, truth: &ObservationTruth) {
        self.transforms.insert(template_id.to_owned(), truth.transform);
    }

    /// Mean displacement between `estimate` and the true probe→gallery
    /// relative transform over the frame corners.
    pub fn residual_px(
        &self,
        probe_id: &str,
        gallery_id: &str,
        estimate: &SimilarityTransform,
    ) -> Result<f64, ProviderError> {
        let tp = self
            .transforms
            .get(probe_id)
            .ok_or_else(|| ProviderError::UnknownTemplate(probe_id.to_owned()))?;
        let tg = self
            .transforms
            .get(gallery_id)
            .ok_or_else(|| ProviderError::UnknownTemplate(gallery_id.to_owned()))?;
        let relative = tg.compose(&tp.inverse());
        let f = FRAME as f64;
        let refs = [(0.0, 0.0), (f, 0.0), (0.0, f), (f, f)];
        let sum: f64 = refs
            .iter()
            .map(|&p| {
                let a = estimate.apply(p);
                let b = relative.apply(p);
                (a.0 - b.0).hypot(a.1 - b.1)
            })
            .sum();
        Ok(sum / refs.len() as f64)
    }
}

/// Renoise `emb` with scale `c`, directions orthogonal to both `emb` and
/// `other` so the pair cosine is non-increasing in `c`.
fn renoise_half(emb: &[f32], other: &[f32], c: f64, rng: &mut ChaCha8Rng) -> Vec<f32> {
    if c == 0.0 {
        return emb.to_vec();
    }
    let raw = random_unit(rng, emb.len());
    let mut g: Vec<f64> = raw.iter().map(|v| *v as f64).collect();
    for basis in [emb, other] {
        let dot: f64 = g.iter().zip(basis).map(|(a, b)| a * *b as f64).sum();
        for (gi, bi) in g.iter_mut().zip(basis) {
            *gi -= dot * *bi as f64;
        }
    }
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    let out: Vec<f64> = emb
        .iter()
        .zip(&g)
        .map(|(e, gi)| *e as f64 + c * gi / norm)
        .collect();
    let onorm = out.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    out.iter().map(|x| (x / onorm) as f32).collect()
}

impl RealignProvider for SyntheticRealignProvider {
    fn embed_realigned(
        &self,
        probe: &FingerprintTemplate,
        gallery: &FingerprintTemplate,
        transform: &SimilarityTransform,
    ) -> Result<(GlobalEmbedding, GlobalEmbedding), ProviderError> {
        if !transform.is_finite() {
            return Err(ProviderError::BadParams);
        }
        let residual = self.residual_px(&probe.id, &gallery.id, transform)?;
        let c = (REALIGN_NOISE_PER_PX * residual).min(REALIGN_NOISE_CAP);

        let mut rng_p = rng_for(&[TAG_REALIGN, hash_str(&probe.id), hash_str(&gallery.id), 0]);
        let mut rng_g = rng_for(&[TAG_REALIGN, hash_str(&probe.id), hash_str(&gallery.id), 1]);
        let pz = probe.embedding.clone();
        let gz = gallery.embedding.clone();
        // from_raw keeps the zero-residual path bit-identical to the input
        let new_p = GlobalEmbedding::from_raw(
            renoise_half(pz.z_a(), gz.z_a(), c, &mut rng_p),
            renoise_half(pz.z_c(), gz.z_c(), c, &mut rng_p),
        );
        let new_g = GlobalEmbedding::from_raw(
            renoise_half(gz.z_a(), pz.z_a(), c, &mut rng_g),
            renoise_half(gz.z_c(), pz.z_c(), c, &mut rng_g),
        );
        Ok((new_p, new_g))
    }
}

/// Provider that reports realignment as unsupported; the search engine then
/// drops the w₄ term and flags the audit.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoRealignProvider;

impl RealignProvider for NoRealignProvider {
    fn embed_realigned(
        &self,
        _probe: &FingerprintTemplate,
        _gallery: &FingerprintTemplate,
        _transform: &SimilarityTransform,
    ) -> Result<(GlobalEmbedding, GlobalEmbedding), ProviderError> {
        Err(ProviderError::Unsupported)
    }
}

/// Cosine between two concatenated embeddings, in [−1, 1].
pub fn embedding_cosine(a: &GlobalEmbedding, b: &GlobalEmbedding) -> f64 {
    let dot: f64 = a
        .concat()
        .zip(b.concat())
        .map(|(x, y)| x as f64 * y as f64)
        .sum();
    let na: f64 = a.concat().map(|x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.concat().map(|x| (x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}
