//! Template data model: minutiae, descriptors, global embeddings and the
//! [`FingerprintTemplate`] that bundles them for enrollment and search.
//!
//! Templates are immutable value objects after construction; they are safe to
//! share and send between workers without synchronization.

use std::f32::consts::TAU;

use thiserror::Error;

/// Dimensionality of a minutia descriptor.
pub const DESCRIPTOR_DIM: usize = 96;
/// Dimensionality of each global embedding head.
pub const EMBEDDING_HALF_DIM: usize = 384;
/// Dimensionality of the concatenated global embedding.
pub const EMBEDDING_DIM: usize = 2 * EMBEDDING_HALF_DIM;
/// Grid spacing for virtual minutiae, in pixels.
pub const VIRTUAL_GRID_SPACING: f32 = 16.0;
/// Offset of the first virtual-minutia grid center from the image origin.
pub const VIRTUAL_GRID_OFFSET: f32 = 8.0;

const UNIT_NORM_TOL: f32 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinutiaKind {
    RidgeEnding,
    Bifurcation,
    Virtual,
    Unknown,
}

impl MinutiaKind {
    pub fn code(self) -> u8 {
        match self {
            MinutiaKind::RidgeEnding => 0,
            MinutiaKind::Bifurcation => 1,
            MinutiaKind::Virtual => 2,
            MinutiaKind::Unknown => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(MinutiaKind::RidgeEnding),
            1 => Some(MinutiaKind::Bifurcation),
            2 => Some(MinutiaKind::Virtual),
            3 => Some(MinutiaKind::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Latent,
    Rolled,
    Plain,
    Synthetic,
}

impl Modality {
    pub fn code(self) -> u8 {
        match self {
            Modality::Latent => 0,
            Modality::Rolled => 1,
            Modality::Plain => 2,
            Modality::Synthetic => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Modality::Latent),
            1 => Some(Modality::Rolled),
            2 => Some(Modality::Plain),
            3 => Some(Modality::Synthetic),
            _ => None,
        }
    }
}

/// A (possibly virtual) minutia: location in pixels, direction in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minutia {
    pub x: f32,
    pub y: f32,
    /// Direction in [0, 2π).
    pub theta: f32,
    pub kind: MinutiaKind,
}

impl Minutia {
    pub fn new(x: f32, y: f32, theta: f32, kind: MinutiaKind) -> Self {
        Minutia {
            x,
            y,
            theta: wrap_angle(theta),
            kind,
        }
    }
}

/// Wraps an angle into [0, 2π).
pub fn wrap_angle(theta: f32) -> f32 {
    let mut t = theta % TAU;
    if t < 0.0 {
        t += TAU;
    }
    // % can return exactly TAU for values just below a multiple of 2π
    if t >= TAU {
        t = 0.0;
    }
    t
}

/// Unit-norm 96-component descriptor of the image patch around a minutia.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    values: Vec<f32>,
}

impl Descriptor {
    /// Normalizes `values` to unit Euclidean norm.
    pub fn new(values: Vec<f32>) -> Result<Self, TemplateError> {
        if values.len() != DESCRIPTOR_DIM {
            return Err(TemplateError::DescriptorDim(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TemplateError::NonFinite("descriptor component"));
        }
        let norm = values.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(TemplateError::ZeroNorm("descriptor"));
        }
        let values = values.iter().map(|v| (*v as f64 / norm) as f32).collect();
        Ok(Descriptor { values })
    }

    /// Wraps already-normalized components without renormalizing.
    /// Used by decoders; [`validate_template`] reports any norm violation.
    pub fn from_raw(values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), DESCRIPTOR_DIM);
        Descriptor { values }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt()
    }

    /// Dot product, accumulated in f64.
    pub fn dot(&self, other: &Descriptor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| *a as f64 * *b as f64)
            .sum()
    }
}

/// Ordered minutiae with their descriptors (parallel arrays).
///
/// Used for both real minutiae (`M`) and virtual minutiae (`V`); the flattened
/// dimension is `count × 99` (x, y, θ plus the 96-component descriptor).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MinutiaSet {
    pub minutiae: Vec<Minutia>,
    pub descriptors: Vec<Descriptor>,
}

impl MinutiaSet {
    pub fn new(minutiae: Vec<Minutia>, descriptors: Vec<Descriptor>) -> Result<Self, TemplateError> {
        if minutiae.len() != descriptors.len() {
            return Err(TemplateError::CountMismatch {
                minutiae: minutiae.len(),
                descriptors: descriptors.len(),
            });
        }
        Ok(MinutiaSet { minutiae, descriptors })
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }
}

/// Two 384-component unit embeddings; the concatenation `Z` has 768 components.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalEmbedding {
    z_a: Vec<f32>,
    z_c: Vec<f32>,
}

impl GlobalEmbedding {
    /// Normalizes each half to unit norm.
    pub fn new(z_a: Vec<f32>, z_c: Vec<f32>) -> Result<Self, TemplateError> {
        let normalize = |v: Vec<f32>, name| -> Result<Vec<f32>, TemplateError> {
            if v.len() != EMBEDDING_HALF_DIM {
                return Err(TemplateError::EmbeddingDim(v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(TemplateError::NonFinite("embedding component"));
            }
            let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(TemplateError::ZeroNorm(name));
            }
            Ok(v.iter().map(|x| (*x as f64 / norm) as f32).collect())
        };
        Ok(GlobalEmbedding {
            z_a: normalize(z_a, "embedding z_a")?,
            z_c: normalize(z_c, "embedding z_c")?,
        })
    }

    /// Wraps already-normalized halves without renormalizing.
    pub fn from_raw(z_a: Vec<f32>, z_c: Vec<f32>) -> Self {
        debug_assert_eq!(z_a.len(), EMBEDDING_HALF_DIM);
        debug_assert_eq!(z_c.len(), EMBEDDING_HALF_DIM);
        GlobalEmbedding { z_a, z_c }
    }

    pub fn z_a(&self) -> &[f32] {
        &self.z_a
    }

    pub fn z_c(&self) -> &[f32] {
        &self.z_c
    }

    /// The concatenated 768-component view.
    pub fn concat(&self) -> impl Iterator<Item = f32> + '_ {
        self.z_a.iter().chain(self.z_c.iter()).copied()
    }

    pub fn concat_vec(&self) -> Vec<f32> {
        self.concat().collect()
    }
}

/// The unit of enrollment and search: minutiae, virtual minutiae, global
/// embedding and capture metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintTemplate {
    pub id: String,
    pub modality: Modality,
    pub minutiae: MinutiaSet,
    pub virtual_minutiae: MinutiaSet,
    pub embedding: GlobalEmbedding,
    pub width: u16,
    pub height: u16,
    pub ppi: u16,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("descriptor has {0} components, expected {DESCRIPTOR_DIM}")]
    DescriptorDim(usize),
    #[error("embedding half has {0} components, expected {EMBEDDING_HALF_DIM}")]
    EmbeddingDim(usize),
    #[error("{0} is not finite")]
    NonFinite(&'static str),
    #[error("{0} has zero norm")]
    ZeroNorm(&'static str),
    #[error("{minutiae} minutiae but {descriptors} descriptors")]
    CountMismatch { minutiae: usize, descriptors: usize },
}

/// One invariant violation found by [`validate_template`].
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyId,
    NonFiniteCoordinate,
    AngleRange,
    DescriptorNorm,
    DuplicateMinutia,
    VirtualKind,
    VirtualGridAlignment,
    EmbeddingNorm,
}

/// Validation outcome: empty iff the template satisfies every invariant.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, detail: String) {
        self.violations.push(Violation { kind, detail });
    }
}

/// Checks every type invariant and lists each violation; never errors.
pub fn validate_template(t: &FingerprintTemplate) -> ValidationReport {
    let mut report = ValidationReport::default();
    if t.id.is_empty() {
        report.push(ViolationKind::EmptyId, "template id is empty".into());
    }
    validate_set(&t.minutiae, "minutiae", false, &mut report);
    validate_set(&t.virtual_minutiae, "virtual", true, &mut report);
    for (name, half) in [("z_a", t.embedding.z_a()), ("z_c", t.embedding.z_c())] {
        let norm = half.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOL as f64 {
            report.push(
                ViolationKind::EmbeddingNorm,
                format!("embedding {name} has norm {norm}"),
            );
        }
    }
    report
}

fn validate_set(set: &MinutiaSet, label: &str, virtual_set: bool, report: &mut ValidationReport) {
    for (i, m) in set.minutiae.iter().enumerate() {
        if !m.x.is_finite() || !m.y.is_finite() {
            report.push(
                ViolationKind::NonFiniteCoordinate,
                format!("{label}[{i}] has non-finite coordinates"),
            );
        }
        if !m.theta.is_finite() || !(0.0..TAU).contains(&m.theta) {
            report.push(
                ViolationKind::AngleRange,
                format!("{label}[{i}] theta {} outside [0, 2pi)", m.theta),
            );
        }
        if virtual_set {
            if m.kind != MinutiaKind::Virtual {
                report.push(
                    ViolationKind::VirtualKind,
                    format!("{label}[{i}] kind is not virtual"),
                );
            }
            let on_grid = |v: f32| ((v - VIRTUAL_GRID_OFFSET) / VIRTUAL_GRID_SPACING).fract() == 0.0;
            if m.x.is_finite() && m.y.is_finite() && (!on_grid(m.x) || !on_grid(m.y)) {
                report.push(
                    ViolationKind::VirtualGridAlignment,
                    format!("{label}[{i}] at ({}, {}) is off the 16 px grid", m.x, m.y),
                );
            }
        }
    }
    for (i, d) in set.descriptors.iter().enumerate() {
        let norm = d.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL as f64 {
            report.push(
                ViolationKind::DescriptorNorm,
                format!("{label}[{i}] descriptor has norm {norm}"),
            );
        }
    }
    // exact coordinate equality: near-duplicates are legal
    for i in 0..set.minutiae.len() {
        for j in (i + 1)..set.minutiae.len() {
            let (a, b) = (&set.minutiae[i], &set.minutiae[j]);
            if a.x == b.x && a.y == b.y && a.theta == b.theta {
                report.push(
                    ViolationKind::DuplicateMinutia,
                    format!("{label}[{i}] and {label}[{j}] share (x, y, theta)"),
                );
            }
        }
    }
}
