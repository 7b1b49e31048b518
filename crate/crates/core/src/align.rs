//! Similarity-transform estimation from minutiae correspondences
//! (closed-form Procrustes with scale) and rotation-normalized patch
//! geometry for descriptor providers.

use thiserror::Error;

use crate::template::Minutia;

/// 4-DOF similarity transform: p ↦ s·R(φ)·p + t.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    /// Rotation in radians.
    pub rotation: f64,
    pub tx: f64,
    pub ty: f64,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: 0.0,
            tx: 0.0,
            ty: 0.0,
        }
    }

    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        let (sin, cos) = self.rotation.sin_cos();
        (
            self.scale * (cos * p.0 - sin * p.1) + self.tx,
            self.scale * (sin * p.0 + cos * p.1) + self.ty,
        )
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let s = 1.0 / self.scale;
        let (sin, cos) = (-self.rotation).sin_cos();
        SimilarityTransform {
            scale: s,
            rotation: -self.rotation,
            tx: -s * (cos * self.tx - sin * self.ty),
            ty: -s * (sin * self.tx + cos * self.ty),
        }
    }

    /// self ∘ other: applies `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        let (sin, cos) = self.rotation.sin_cos();
        let tx = self.scale * (cos * other.tx - sin * other.ty) + self.tx;
        let ty = self.scale * (sin * other.tx + cos * other.ty) + self.ty;
        SimilarityTransform {
            scale: self.scale * other.scale,
            rotation: self.rotation + other.rotation,
            tx,
            ty,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.scale.is_finite()
            && self.scale > 0.0
            && self.rotation.is_finite()
            && self.tx.is_finite()
            && self.ty.is_finite()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("need at least 2 correspondence pairs, got {0}")]
    TooFewPairs(usize),
    #[error("degenerate configuration: probe points are coincident")]
    Degenerate,
}

/// Least-squares similarity transform minimizing Σ‖T(p_i) − g_i‖² over the
/// given (probe, gallery) point pairs.
pub fn estimate_transform(pairs: &[((f64, f64), (f64, f64))]) -> Result<SimilarityTransform, AlignError> {
    if pairs.len() < 2 {
        return Err(AlignError::TooFewPairs(pairs.len()));
    }
    let n = pairs.len() as f64;
    let (mut pcx, mut pcy, mut gcx, mut gcy) = (0.0, 0.0, 0.0, 0.0);
    for ((px, py), (gx, gy)) in pairs {
        pcx += px;
        pcy += py;
        gcx += gx;
        gcy += gy;
    }
    pcx /= n;
    pcy /= n;
    gcx /= n;
    gcy /= n;

    // cross-covariance and probe variance of the centered points
    let (mut sxx, mut syy, mut sxy, mut syx, mut var_p) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((px, py), (gx, gy)) in pairs {
        let (ax, ay) = (px - pcx, py - pcy);
        let (bx, by) = (gx - gcx, gy - gcy);
        sxx += ax * bx;
        syy += ay * by;
        sxy += ax * by;
        syx += ay * bx;
        var_p += ax * ax + ay * ay;
    }
    if var_p == 0.0 {
        return Err(AlignError::Degenerate);
    }

    let a = sxx + syy; // ∝ cos φ
    let b = sxy - syx; // ∝ sin φ
    let rotation = b.atan2(a);
    let scale = (a * a + b * b).sqrt() / var_p;
    let (sin, cos) = rotation.sin_cos();
    let tx = gcx - scale * (cos * pcx - sin * pcy);
    let ty = gcy - scale * (sin * pcx + cos * pcy);
    let t = SimilarityTransform {
        scale,
        rotation,
        tx,
        ty,
    };
    if !t.is_finite() {
        return Err(AlignError::Degenerate);
    }
    Ok(t)
}

/// Optional robust re-fit: drop the worst 20% residual pairs, fit once more.
/// Off by default in the engine config.
pub fn estimate_transform_trimmed(
    pairs: &[((f64, f64), (f64, f64))],
) -> Result<SimilarityTransform, AlignError> {
    let first = estimate_transform(pairs)?;
    let mut residuals: Vec<(f64, usize)> = pairs
        .iter()
        .enumerate()
        .map(|(i, (p, g))| {
            let t = first.apply(*p);
            (((t.0 - g.0).powi(2) + (t.1 - g.1).powi(2)).sqrt(), i)
        })
        .collect();
    residuals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let keep = ((pairs.len() as f64 * 0.8).ceil() as usize).max(2);
    if keep >= pairs.len() {
        return Ok(first);
    }
    let kept: Vec<_> = residuals[..keep].iter().map(|&(_, i)| pairs[i]).collect();
    estimate_transform(&kept)
}

pub fn apply_transform(t: &SimilarityTransform, points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    points.iter().map(|&p| t.apply(p)).collect()
}

/// Sampling frame for the patch around a minutia: `size × size` pixel-center
/// grid, centered at the minutia and rotated by its direction so the minutia
/// direction maps to the frame's +u axis (bilinear interpolation contract).
#[derive(Debug, Clone, Copy)]
pub struct PatchFrame {
    pub center: (f64, f64),
    pub size: usize,
    pub rotation: f64,
}

/// Default patch side used by descriptor providers.
pub const PATCH_SIZE: usize = 96;

pub fn patch_frame(m: &Minutia, size: usize) -> PatchFrame {
    PatchFrame {
        center: (m.x as f64, m.y as f64),
        size,
        rotation: m.theta as f64,
    }
}

impl PatchFrame {
    /// Image coordinates of frame pixel center (u, v), u and v in [0, size).
    pub fn point_at(&self, u: f64, v: f64) -> (f64, f64) {
        let half = (self.size as f64 - 1.0) / 2.0;
        let (du, dv) = (u - half, v - half);
        let (sin, cos) = self.rotation.sin_cos();
        (
            self.center.0 + cos * du - sin * dv,
            self.center.1 + sin * du + cos * dv,
        )
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let last = self.size as f64 - 1.0;
        [
            self.point_at(0.0, 0.0),
            self.point_at(last, 0.0),
            self.point_at(last, last),
            self.point_at(0.0, last),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::MinutiaKind;
    use std::f64::consts::PI;

    fn make_pairs(truth: &SimilarityTransform, points: &[(f64, f64)]) -> Vec<((f64, f64), (f64, f64))> {
        points.iter().map(|&p| (p, truth.apply(p))).collect()
    }

    #[test]
    fn identity_pairs_give_identity() {
        let points = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)];
        let pairs: Vec<_> = points.iter().map(|&p| (p, p)).collect();
        let t = estimate_transform(&pairs).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.rotation.abs() < 1e-12);
        assert!(t.tx.abs() < 1e-12 && t.ty.abs() < 1e-12);
    }

    #[test]
    fn pure_translation_is_recovered() {
        let points = [(1.0, 2.0), (5.0, 7.0), (9.0, 3.0)];
        let pairs: Vec<_> = points.iter().map(|&(x, y)| ((x, y), (x + 10.0, y - 5.0))).collect();
        let t = estimate_transform(&pairs).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.rotation.abs() < 1e-12);
        assert!((t.tx - 10.0).abs() < 1e-9);
        assert!((t.ty + 5.0).abs() < 1e-9);
    }

    #[test]
    fn scaled_rotation_with_translation_is_recovered() {
        let truth = SimilarityTransform {
            scale: 2.0,
            rotation: PI / 2.0,
            tx: 5.0,
            ty: 5.0,
        };
        let pairs = make_pairs(&truth, &[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let t = estimate_transform(&pairs).unwrap();
        assert!((t.scale - 2.0).abs() < 1e-9);
        assert!((t.rotation - PI / 2.0).abs() < 1e-9);
        assert!((t.tx - 5.0).abs() < 1e-9);
        assert!((t.ty - 5.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_or_degenerate_pairs_error() {
        assert_eq!(
            estimate_transform(&[((0.0, 0.0), (1.0, 1.0))]),
            Err(AlignError::TooFewPairs(1))
        );
        let coincident = [((3.0, 3.0), (1.0, 1.0)), ((3.0, 3.0), (2.0, 2.0))];
        assert_eq!(estimate_transform(&coincident), Err(AlignError::Degenerate));
    }

    #[test]
    fn apply_matches_homogeneous_matrix_oracle() {
        let t = SimilarityTransform {
            scale: 1.3,
            rotation: 0.7,
            tx: -4.0,
            ty: 11.0,
        };
        // 3×3 homogeneous matrix oracle
        let (sin, cos) = t.rotation.sin_cos();
        let m = [
            [t.scale * cos, -t.scale * sin, t.tx],
            [t.scale * sin, t.scale * cos, t.ty],
            [0.0, 0.0, 1.0],
        ];
        for &p in &[(0.0, 0.0), (1.0, 0.0), (-3.5, 2.25), (100.0, -40.0)] {
            let got = t.apply(p);
            let oracle = (
                m[0][0] * p.0 + m[0][1] * p.1 + m[0][2],
                m[1][0] * p.0 + m[1][1] * p.1 + m[1][2],
            );
            assert!((got.0 - oracle.0).abs() < 1e-12);
            assert!((got.1 - oracle.1).abs() < 1e-12);
        }
    }

    #[test]
    fn half_turn_maps_unit_x_to_negative_unit_x() {
        let t = SimilarityTransform {
            scale: 1.0,
            rotation: PI,
            tx: 0.0,
            ty: 0.0,
        };
        let (x, y) = t.apply((1.0, 0.0));
        assert!((x + 1.0).abs() < 1e-12);
        assert!(y.abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip_within_1e9() {
        let t = SimilarityTransform {
            scale: 0.8,
            rotation: 2.1,
            tx: 30.0,
            ty: -12.0,
        };
        let inv = t.inverse();
        for &p in &[(0.0, 0.0), (17.0, 4.0), (-100.0, 55.5)] {
            let back = inv.apply(t.apply(p));
            assert!((back.0 - p.0).abs() < 1e-9);
            assert!((back.1 - p.1).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_recovery_over_seeded_transforms() {
        let mut state = 0xfeedu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        for _ in 0..1000 {
            let truth = SimilarityTransform {
                scale: 0.5 + 1.5 * next(),
                rotation: (next() - 0.5) * 2.0 * PI,
                tx: (next() - 0.5) * 200.0,
                ty: (next() - 0.5) * 200.0,
            };
            let points: Vec<(f64, f64)> = (0..5).map(|_| (next() * 512.0, next() * 512.0)).collect();
            let pairs = make_pairs(&truth, &points);
            let t = estimate_transform(&pairs).unwrap();
            assert!((t.scale - truth.scale).abs() < 1e-6);
            let mut dr = (t.rotation - truth.rotation) % (2.0 * PI);
            if dr > PI {
                dr -= 2.0 * PI;
            }
            if dr < -PI {
                dr += 2.0 * PI;
            }
            assert!(dr.abs() < 1e-6);
            assert!((t.tx - truth.tx).abs() < 1e-6);
            assert!((t.ty - truth.ty).abs() < 1e-6);
        }
    }

    #[test]
    fn shift_equivariance_preserves_scale_and_rotation() {
        let truth = SimilarityTransform {
            scale: 1.4,
            rotation: 0.9,
            tx: 3.0,
            ty: -8.0,
        };
        let points = [(10.0, 10.0), (50.0, 20.0), (30.0, 70.0), (90.0, 90.0)];
        let pairs = make_pairs(&truth, &points);
        let shifted: Vec<_> = pairs
            .iter()
            .map(|((px, py), (gx, gy))| ((px + 13.0, py - 7.0), (gx + 13.0, gy - 7.0)))
            .collect();
        let a = estimate_transform(&pairs).unwrap();
        let b = estimate_transform(&shifted).unwrap();
        assert!((a.scale - b.scale).abs() < 1e-9);
        assert!((a.rotation - b.rotation).abs() < 1e-9);
    }

    #[test]
    fn noise_robustness_residual_rms() {
        let mut state = 0xabcdu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        let mut gauss = move || {
            // Box-Muller
            let u1: f64 = next().max(1e-12);
            let u2: f64 = next();
            (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
        };
        let sigma = 2.0;
        let mut failures = 0;
        let trials = 100;
        for _ in 0..trials {
            let truth = SimilarityTransform {
                scale: 1.0,
                rotation: 0.4,
                tx: 10.0,
                ty: 20.0,
            };
            let points: Vec<(f64, f64)> = (0..12)
                .map(|i| (50.0 + 37.0 * (i as f64), 30.0 + 53.0 * ((i * i) as f64 % 97.0)))
                .collect();
            let pairs: Vec<_> = points
                .iter()
                .map(|&p| {
                    let g = truth.apply(p);
                    (p, (g.0 + sigma * gauss(), g.1 + sigma * gauss()))
                })
                .collect();
            let t = estimate_transform(&pairs).unwrap();
            let rms = (pairs
                .iter()
                .map(|(p, g)| {
                    let q = t.apply(*p);
                    (q.0 - g.0).powi(2) + (q.1 - g.1).powi(2)
                })
                .sum::<f64>()
                / pairs.len() as f64)
                .sqrt();
            if rms > 2.0 * sigma {
                failures += 1;
            }
        }
        assert!(failures <= trials / 20, "{failures} of {trials} exceeded 2σ RMS");
    }

    #[test]
    fn patch_frame_axis_aligned_at_zero_theta() {
        let m = Minutia::new(100.0, 200.0, 0.0, MinutiaKind::RidgeEnding);
        let f = patch_frame(&m, PATCH_SIZE);
        let half = 47.5;
        let p = f.point_at(0.0, 0.0);
        assert!((p.0 - (100.0 - half)).abs() < 1e-12);
        assert!((p.1 - (200.0 - half)).abs() < 1e-12);
        let c = f.point_at(half, half);
        assert!((c.0 - 100.0).abs() < 1e-12 && (c.1 - 200.0).abs() < 1e-12);
    }

    #[test]
    fn patch_frame_quarter_turn_corner_distance() {
        let m = Minutia::new(0.0, 0.0, PI as f32 / 2.0, MinutiaKind::RidgeEnding);
        let f = patch_frame(&m, PATCH_SIZE);
        let corner = f.point_at(0.0, 0.0);
        let dist = corner.0.hypot(corner.1);
        assert!((dist - 2.0f64.sqrt() * 47.5).abs() < 1e-6);
    }

    #[test]
    fn patch_frame_corners_match_rotation_matrix_oracle() {
        let m = Minutia::new(100.0, 100.0, PI as f32 / 4.0, MinutiaKind::RidgeEnding);
        let f = patch_frame(&m, PATCH_SIZE);
        let theta = m.theta as f64;
        let (sin, cos) = theta.sin_cos();
        let half = 47.5;
        let locals = [(-half, -half), (half, -half), (half, half), (-half, half)];
        for (corner, (lx, ly)) in f.corners().iter().zip(locals) {
            let ox = 100.0 + cos * lx - sin * ly;
            let oy = 100.0 + sin * lx + cos * ly;
            assert!((corner.0 - ox).abs() < 1e-9);
            assert!((corner.1 - oy).abs() < 1e-9);
        }
    }
}
