//! Identification and verification metrics: closed-set CMC, open-set
//! FNIR/FPIR, TAR@FAR and EER, and the minutiae-accuracy scorer.
//!
//! All computations are pure over immutable trial data and use exact
//! threshold sweeps over observed scores (no binning).

use std::f64::consts::PI;

use thiserror::Error;

use crate::template::Minutia;

/// One probe's search outcome: the ranked candidate list and, for mated
/// probes, the true mate's gallery id.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Trial {
    pub probe_id: String,
    /// None for unmated (open-set impostor) probes.
    pub mate_id: Option<String>,
    /// (gallery_id, score), descending score.
    pub candidates: Vec<(String, f64)>,
}

/// A set of per-probe trials; Q = trials.len().
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
}

impl TrialSet {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Cmc,
    OpenSet,
    Det,
}

/// Plot-ready curve: ordered (x, y) points with strictly increasing x.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MetricCurve {
    pub kind: MetricKind,
    pub points: Vec<(f64, f64)>,
    /// Named operating points, e.g. ("fnir@fpir=0.02", value).
    pub operating_points: Vec<(String, f64)>,
}

impl MetricCurve {
    /// `x,y` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for (x, y) in &self.points {
            out.push_str(&format!("{x},{y}\n"));
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("closed-set CMC requires every probe to be mated; probe {0:?} is unmated")]
    UnmatedProbe(String),
    #[error("open-set metrics need at least one mated and one unmated probe")]
    DegenerateTrialSet,
    #[error("empty trial set")]
    Empty,
    #[error("empty {0} score list")]
    EmptyScores(&'static str),
    #[error("max_rank must be positive")]
    BadRank,
}

/// Closed-set CMC: y(k) = fraction of probes whose mate appears at rank ≤ k,
/// for k = 1..=max_rank.
pub fn cmc(trials: &TrialSet, max_rank: usize) -> Result<MetricCurve, MetricError> {
    if trials.is_empty() {
        return Err(MetricError::Empty);
    }
    if max_rank == 0 {
        return Err(MetricError::BadRank);
    }
    let mut hits = vec![0usize; max_rank];
    for trial in &trials.trials {
        let mate = trial
            .mate_id
            .as_deref()
            .ok_or_else(|| MetricError::UnmatedProbe(trial.probe_id.clone()))?;
        if let Some(rank) = trial
            .candidates
            .iter()
            .position(|(id, _)| id == mate)
            .map(|p| p + 1)
        {
            if rank <= max_rank {
                hits[rank - 1] += 1;
            }
        }
    }
    let q = trials.len() as f64;
    let mut cumulative = 0usize;
    let points = hits
        .iter()
        .enumerate()
        .map(|(i, h)| {
            cumulative += h;
            ((i + 1) as f64, cumulative as f64 / q)
        })
        .collect();
    Ok(MetricCurve {
        kind: MetricKind::Cmc,
        points,
        operating_points: Vec::new(),
    })
}

/// Rank-1 retrieval rate: CMC at k = 1.
pub fn rank_k(trials: &TrialSet, k: usize) -> Result<f64, MetricError> {
    Ok(cmc(trials, k)?.points[k - 1].1)
}

/// Open-set FNIR vs FPIR over the union of observed top-1 scores, plus
/// FNIR at the largest threshold with FPIR ≤ `fpir_target`.
///
/// At threshold τ:
///   FPIR(τ) = fraction of unmated probes whose top-1 score ≥ τ;
///   FNIR(τ) = fraction of mated probes whose rank-1 is not the mate, or
///             whose mate score < τ.
pub fn open_set(trials: &TrialSet, fpir_target: f64) -> Result<MetricCurve, MetricError> {
    let mut mated: Vec<&Trial> = Vec::new();
    let mut unmated_top: Vec<f64> = Vec::new();
    for t in &trials.trials {
        match &t.mate_id {
            Some(_) => mated.push(t),
            None => unmated_top.push(t.candidates.first().map_or(f64::NEG_INFINITY, |c| c.1)),
        }
    }
    if mated.is_empty() || unmated_top.is_empty() {
        return Err(MetricError::DegenerateTrialSet);
    }

    // mate-hit score per mated probe: Some(score) when rank-1 is the mate
    let mate_hits: Vec<Option<f64>> = mated
        .iter()
        .map(|t| {
            let mate = t.mate_id.as_deref().expect("mated");
            match t.candidates.first() {
                Some((id, score)) if id == mate => Some(*score),
                _ => None,
            }
        })
        .collect();

    let mut thresholds: Vec<f64> = unmated_top
        .iter()
        .copied()
        .chain(mate_hits.iter().flatten().copied())
        .collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();

    let fpir_at = |tau: f64| {
        unmated_top.iter().filter(|&&s| s >= tau).count() as f64 / unmated_top.len() as f64
    };
    let fnir_at = |tau: f64| {
        mate_hits
            .iter()
            .filter(|h| match h {
                Some(s) => *s < tau,
                None => true,
            })
            .count() as f64
            / mate_hits.len() as f64
    };

    // sweep: points ordered by increasing FPIR for plotting; the operating
    // point is the smallest tau keeping FPIR ≤ target (lowest attainable
    // FNIR under the constraint)
    let mut best: Option<(f64, f64)> = None; // (tau, fnir)
    let mut raw: Vec<(f64, f64)> = Vec::new();
    for &tau in &thresholds {
        let fpir = fpir_at(tau);
        let fnir = fnir_at(tau);
        raw.push((fpir, fnir));
        if fpir <= fpir_target && best.map_or(true, |(bt, _)| tau < bt) {
            best = Some((tau, fnir));
        }
    }
    // above the max threshold: FPIR = 0, FNIR = 1
    raw.push((0.0, 1.0));
    if best.is_none() {
        best = Some((f64::INFINITY, 1.0));
    }
    raw.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // keep strictly increasing x (lowest FNIR per FPIR)
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (x, y) in raw {
        match points.last_mut() {
            Some((lx, ly)) if *lx == x => *ly = ly.min(y),
            _ => points.push((x, y)),
        }
    }
    let fnir = best.expect("set above").1;
    Ok(MetricCurve {
        kind: MetricKind::OpenSet,
        points,
        operating_points: vec![(format!("fnir@fpir={fpir_target}"), fnir)],
    })
}

/// Verification metrics from raw comparison scores.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AuthMetrics {
    /// (FAR target, TAR) pairs.
    pub tar_at_far: Vec<(f64, f64)>,
    pub eer: f64,
}

fn far_at(imposter: &[f64], tau: f64) -> f64 {
    imposter.iter().filter(|&&s| s >= tau).count() as f64 / imposter.len() as f64
}

fn frr_at(genuine: &[f64], tau: f64) -> f64 {
    genuine.iter().filter(|&&s| s < tau).count() as f64 / genuine.len() as f64
}

/// TAR at the FAR targets (1e-4 and 1e-3 by convention) and interpolated EER.
pub fn auth_metrics(
    genuine: &[f64],
    imposter: &[f64],
    far_targets: &[f64],
) -> Result<AuthMetrics, MetricError> {
    if genuine.is_empty() {
        return Err(MetricError::EmptyScores("genuine"));
    }
    if imposter.is_empty() {
        return Err(MetricError::EmptyScores("imposter"));
    }
    let mut thresholds: Vec<f64> = genuine.iter().chain(imposter).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();

    // TAR@FAR: smallest threshold whose empirical FAR ≤ target (ties toward
    // lower FAR); TAR = 1 − FRR there
    let tar_at_far = far_targets
        .iter()
        .map(|&target| {
            let tau = thresholds
                .iter()
                .copied()
                .find(|&t| far_at(imposter, t) <= target)
                .unwrap_or(f64::INFINITY);
            (target, 1.0 - frr_at(genuine, tau))
        })
        .collect();

    // EER: walk thresholds until FRR crosses FAR, interpolate linearly
    // between the adjacent thresholds
    let mut eer = f64::NAN;
    let mut prev: Option<(f64, f64)> = None; // (far, frr)
    let sweep = std::iter::once(f64::NEG_INFINITY).chain(thresholds.iter().copied());
    for tau in sweep {
        let far = far_at(imposter, tau);
        let frr = frr_at(genuine, tau);
        if frr >= far {
            eer = match prev {
                None => (far + frr) / 2.0,
                Some((pfar, pfrr)) => {
                    // segment from (pfar, pfrr) to (far, frr); find FAR = FRR
                    let denominator = (far - pfar) - (frr - pfrr);
                    if denominator.abs() < 1e-15 {
                        (far + frr) / 2.0
                    } else {
                        let t = (pfrr - pfar) / denominator;
                        let t = t.clamp(0.0, 1.0);
                        pfar + t * (far - pfar)
                    }
                }
            };
            break;
        }
        prev = Some((far, frr));
    }
    if eer.is_nan() {
        // FRR never reached FAR within the sweep; above max threshold
        // FAR = 0, FRR ≤ 1, so the crossing sits at the boundary
        eer = 0.0;
    }
    Ok(AuthMetrics { tar_at_far, eer })
}

/// Minutiae accuracy per the ≤10 px / <10° / same-kind rule with greedy
/// one-to-one matching by ascending distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MinutiaeAccuracy {
    pub correct: usize,
    pub spurious: usize,
    pub missed: usize,
}

const LOCATION_TOL_PX: f64 = 10.0;
const ANGLE_TOL_RAD: f64 = 10.0 * PI / 180.0;

fn circ_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

pub fn minutiae_accuracy(pred: &[Minutia], truth: &[Minutia]) -> MinutiaeAccuracy {
    // all admissible pairs, sorted by ascending distance, ties by (pred, truth)
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            if p.kind != t.kind {
                continue;
            }
            let dist = ((p.x - t.x) as f64).hypot((p.y - t.y) as f64);
            if dist > LOCATION_TOL_PX {
                continue;
            }
            // f32 comparison so a stored angle at exactly the 10° boundary
            // (rounded once into f32) is excluded as the strict rule demands
            if circ_diff(p.theta as f64, t.theta as f64) as f32 >= ANGLE_TOL_RAD as f32 {
                continue;
            }
            pairs.push((dist, i, j));
        }
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut pred_used = vec![false; pred.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut correct = 0;
    for (_, i, j) in pairs {
        if !pred_used[i] && !truth_used[j] {
            pred_used[i] = true;
            truth_used[j] = true;
            correct += 1;
        }
    }
    MinutiaeAccuracy {
        correct,
        spurious: pred.len() - correct,
        missed: truth.len() - correct,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::MinutiaKind;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    fn trial(probe: &str, mate: Option<&str>, candidates: &[(&str, f64)]) -> Trial {
        Trial {
            probe_id: probe.into(),
            mate_id: mate.map(|m| m.into()),
            candidates: candidates.iter().map(|(id, s)| (id.to_string(), *s)).collect(),
        }
    }

    #[test]
    fn cmc_all_rank_one_is_constant_one() {
        let trials = TrialSet {
            trials: (0..5)
                .map(|i| {
                    let mate = format!("g{i}");
                    trial(
                        &format!("p{i}"),
                        Some(&mate),
                        &[(&mate, 0.9), ("other", 0.1)],
                    )
                })
                .collect(),
        };
        let curve = cmc(&trials, 4).unwrap();
        assert!(curve.points.iter().all(|&(_, y)| y == 1.0));
    }

    #[test]
    fn cmc_single_probe_mate_at_rank_three() {
        let trials = TrialSet {
            trials: vec![trial(
                "p",
                Some("mate"),
                &[("a", 0.9), ("b", 0.8), ("mate", 0.7), ("c", 0.1)],
            )],
        };
        let curve = cmc(&trials, 4).unwrap();
        let ys: Vec<f64> = curve.points.iter().map(|p| p.1).collect();
        assert_eq!(ys, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn cmc_rejects_unmated_probe() {
        let trials = TrialSet {
            trials: vec![trial("p", None, &[("a", 0.9)])],
        };
        assert!(matches!(cmc(&trials, 1), Err(MetricError::UnmatedProbe(_))));
    }

    #[test]
    fn cmc_matches_recount_oracle_and_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let gallery_size = rng.gen_range(3..30);
            let mut trials = Vec::new();
            let probes = rng.gen_range(1..50);
            for p in 0..probes {
                let mate = rng.gen_range(0..gallery_size);
                let mut candidates: Vec<(String, f64)> = (0..gallery_size)
                    .map(|g| (format!("g{g}"), rng.gen::<f64>()))
                    .collect();
                candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
                trials.push(trial(
                    &format!("p{p}"),
                    Some(&format!("g{mate}")),
                    &candidates
                        .iter()
                        .map(|(id, s)| (id.as_str(), *s))
                        .collect::<Vec<_>>(),
                ));
            }
            let set = TrialSet { trials };
            let curve = cmc(&set, gallery_size).unwrap();
            // independent recount per rank
            for (k, &(x, y)) in curve.points.iter().enumerate() {
                assert_eq!(x, (k + 1) as f64);
                let recount = set
                    .trials
                    .iter()
                    .filter(|t| {
                        t.candidates
                            .iter()
                            .take(k + 1)
                            .any(|(id, _)| Some(id.as_str()) == t.mate_id.as_deref())
                    })
                    .count() as f64
                    / set.len() as f64;
                assert_eq!(y, recount);
            }
            // monotone, and closed-set with enrolled mates reaches 1
            for w in curve.points.windows(2) {
                assert!(w[1].1 >= w[0].1);
            }
            assert_eq!(curve.points.last().unwrap().1, 1.0);
        }
    }

    #[test]
    fn open_set_vacuous_threshold_bounds() {
        let trials = TrialSet {
            trials: vec![
                trial("m0", Some("g0"), &[("g0", 0.9)]),
                trial("m1", Some("g1"), &[("bad", 0.8), ("g1", 0.5)]),
                trial("u0", None, &[("g0", 0.4)]),
                trial("u1", None, &[("g1", 0.3)]),
            ],
        };
        let curve = open_set(&trials, 0.02).unwrap();
        // FPIR = 1 end: FNIR = fraction missed at rank-1 = 1/2
        let (max_fpir, fnir_at_max) = *curve.points.last().unwrap();
        assert_eq!(max_fpir, 1.0);
        assert_eq!(fnir_at_max, 0.5);
        // FPIR = 0 end exists with FNIR = 1 attainable above max score
        assert_eq!(curve.points.first().unwrap().0, 0.0);
    }

    #[test]
    fn open_set_hand_computed_case() {
        // 4 mated, 4 unmated with hand-assigned scores
        let trials = TrialSet {
            trials: vec![
                trial("m0", Some("g0"), &[("g0", 0.90)]),
                trial("m1", Some("g1"), &[("g1", 0.70)]),
                trial("m2", Some("g2"), &[("g2", 0.40)]),
                trial("m3", Some("g3"), &[("wrong", 0.95), ("g3", 0.60)]),
                trial("u0", None, &[("g0", 0.80)]),
                trial("u1", None, &[("g1", 0.50)]),
                trial("u2", None, &[("g2", 0.30)]),
                trial("u3", None, &[("g3", 0.20)]),
            ],
        };
        // hand sweep: mate-hit scores {0.9, 0.7, 0.4}, m3 always a miss.
        // unmated top-1 {0.8, 0.5, 0.3, 0.2}.
        // tau=0.9: FPIR=0, FNIR=3/4. tau=0.7: FPIR=1/4, FNIR=2/4.
        // tau=0.4: FPIR=2/4, FNIR=1/4. tau=0.2: FPIR=1, FNIR=1/4.
        let curve = open_set(&trials, 0.02).unwrap();
        assert_eq!(curve.operating_points[0].1, 0.75);
        assert!(curve.points.contains(&(0.25, 0.5)));
        assert!(curve.points.contains(&(0.5, 0.25)));
        assert!(curve.points.contains(&(0.0, 0.75)));
        // target 0.25 admits tau=0.7
        let curve = open_set(&trials, 0.25).unwrap();
        assert_eq!(curve.operating_points[0].1, 0.5);
    }

    #[test]
    fn open_set_requires_both_populations() {
        let trials = TrialSet {
            trials: vec![trial("m0", Some("g0"), &[("g0", 0.9)])],
        };
        assert!(matches!(
            open_set(&trials, 0.02),
            Err(MetricError::DegenerateTrialSet)
        ));
    }

    #[test]
    fn fpir_fnir_monotone_under_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let mated = rng.gen_range(1..8);
            let unmated = rng.gen_range(1..8);
            let mut trials = Vec::new();
            for i in 0..mated {
                let hit = rng.gen_bool(0.7);
                let mate = format!("g{i}");
                let top = if hit { mate.clone() } else { "wrong".into() };
                trials.push(Trial {
                    probe_id: format!("m{i}"),
                    mate_id: Some(mate),
                    candidates: vec![(top, rng.gen())],
                });
            }
            for i in 0..unmated {
                trials.push(Trial {
                    probe_id: format!("u{i}"),
                    mate_id: None,
                    candidates: vec![("gx".into(), rng.gen())],
                });
            }
            let set = TrialSet { trials };
            let curve = open_set(&set, 0.02).unwrap();
            // along increasing FPIR, FNIR must be non-increasing
            for w in curve.points.windows(2) {
                assert!(w[0].0 < w[1].0, "x strictly increasing");
                assert!(w[0].1 >= w[1].1, "FNIR monotone: {:?}", curve.points);
            }
        }
    }

    #[test]
    fn auth_perfect_separation() {
        let metrics = auth_metrics(&[1.0, 1.0, 1.0], &[0.0, 0.0], &[1e-4, 1e-3]).unwrap();
        assert!(metrics.tar_at_far.iter().all(|&(_, tar)| tar == 1.0));
        assert_eq!(metrics.eer, 0.0);
    }

    #[test]
    fn auth_identical_multisets_give_half_eer() {
        let scores = [0.1, 0.4, 0.4, 0.7, 0.9];
        let metrics = auth_metrics(&scores, &scores, &[1e-3]).unwrap();
        assert!((metrics.eer - 0.5).abs() < 1e-9, "eer = {}", metrics.eer);
    }

    #[test]
    fn auth_hand_enumerated_eer_is_one_third() {
        // genuine {0.9, 0.8, 0.7}, imposter {0.75, 0.3, 0.1}:
        // tau=0.7: FAR=1/3, FRR=0; tau=0.75: FAR=1/3, FRR=1/3 → EER=1/3
        let metrics = auth_metrics(&[0.9, 0.8, 0.7], &[0.75, 0.3, 0.1], &[1e-3]).unwrap();
        assert!((metrics.eer - 1.0 / 3.0).abs() < 1e-9, "eer = {}", metrics.eer);
    }

    #[test]
    fn auth_rejects_empty_lists() {
        assert!(matches!(
            auth_metrics(&[], &[0.1], &[1e-3]),
            Err(MetricError::EmptyScores("genuine"))
        ));
        assert!(matches!(
            auth_metrics(&[0.1], &[], &[1e-3]),
            Err(MetricError::EmptyScores("imposter"))
        ));
    }

    #[test]
    fn auth_permutation_invariance_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let genuine: Vec<f64> = (0..rng.gen_range(1..20)).map(|_| rng.gen()).collect();
            let imposter: Vec<f64> = (0..rng.gen_range(1..20)).map(|_| rng.gen()).collect();
            let a = auth_metrics(&genuine, &imposter, &[1e-4, 1e-3]).unwrap();
            assert!((0.0..=1.0).contains(&a.eer), "eer {}", a.eer);
            let mut rg = genuine.clone();
            let mut ri = imposter.clone();
            rg.reverse();
            ri.reverse();
            let b = auth_metrics(&rg, &ri, &[1e-4, 1e-3]).unwrap();
            assert_eq!(a.eer, b.eer);
            assert_eq!(a.tar_at_far, b.tar_at_far);
        }
    }

    fn minutia(x: f32, y: f32, theta: f32, kind: MinutiaKind) -> Minutia {
        Minutia::new(x, y, theta, kind)
    }

    #[test]
    fn accuracy_identical_lists() {
        let truth = vec![
            minutia(10.0, 10.0, 0.5, MinutiaKind::RidgeEnding),
            minutia(50.0, 60.0, 1.0, MinutiaKind::Bifurcation),
        ];
        let acc = minutiae_accuracy(&truth, &truth);
        assert_eq!(
            acc,
            MinutiaeAccuracy {
                correct: 2,
                spurious: 0,
                missed: 0
            }
        );
    }

    #[test]
    fn accuracy_eleven_pixel_shift_matches_nothing() {
        let truth = vec![
            minutia(10.0, 10.0, 0.5, MinutiaKind::RidgeEnding),
            minutia(50.0, 60.0, 1.0, MinutiaKind::Bifurcation),
        ];
        let pred: Vec<Minutia> = truth
            .iter()
            .map(|m| minutia(m.x + 11.0, m.y, m.theta, m.kind))
            .collect();
        let acc = minutiae_accuracy(&pred, &truth);
        assert_eq!(
            acc,
            MinutiaeAccuracy {
                correct: 0,
                spurious: 2,
                missed: 2
            }
        );
    }

    #[test]
    fn accuracy_boundary_semantics() {
        // exactly 10 px away counts; exactly 10° does not
        let truth = vec![minutia(0.0, 0.0, 0.0, MinutiaKind::RidgeEnding)];
        let at_ten_px = vec![minutia(10.0, 0.0, 0.0, MinutiaKind::RidgeEnding)];
        assert_eq!(minutiae_accuracy(&at_ten_px, &truth).correct, 1);
        let at_ten_deg = vec![minutia(
            0.0,
            0.0,
            (10.0f64 * PI / 180.0) as f32,
            MinutiaKind::RidgeEnding,
        )];
        assert_eq!(minutiae_accuracy(&at_ten_deg, &truth).correct, 0);
        let kind_flip = vec![minutia(0.0, 0.0, 0.0, MinutiaKind::Bifurcation)];
        assert_eq!(minutiae_accuracy(&kind_flip, &truth).correct, 0);
    }

    /// Exhaustive-assignment oracle under the greedy tie rule for a
    /// constructed ambiguous case.
    #[test]
    fn accuracy_ambiguous_case_matches_enumeration() {
        let truth = vec![
            minutia(0.0, 0.0, 0.0, MinutiaKind::RidgeEnding),
            minutia(6.0, 0.0, 0.0, MinutiaKind::RidgeEnding),
        ];
        let pred = vec![
            minutia(3.0, 0.0, 0.0, MinutiaKind::RidgeEnding), // 3 px from both
            minutia(0.0, 2.0, 0.0, MinutiaKind::RidgeEnding), // 2 px from truth 0
            minutia(100.0, 100.0, 0.0, MinutiaKind::RidgeEnding),
        ];
        // admissible distances: (p1,t0)=2 < (p0,t0)=3 = (p0,t1)=3 < (p1,t1)=2√10
        // greedy: p1→t0, then p0→t0 taken so p0→t1 (tie broken by truth index
        // after the (pred, truth) order) → correct = 2
        let acc = minutiae_accuracy(&pred, &truth);
        assert_eq!(
            acc,
            MinutiaeAccuracy {
                correct: 2,
                spurious: 1,
                missed: 0
            }
        );
    }

    #[test]
    fn accuracy_conservation_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let gen = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Minutia> {
                (0..n)
                    .map(|_| {
                        minutia(
                            rng.gen_range(0.0..100.0),
                            rng.gen_range(0.0..100.0),
                            rng.gen_range(0.0..std::f32::consts::TAU),
                            if rng.gen_bool(0.5) {
                                MinutiaKind::RidgeEnding
                            } else {
                                MinutiaKind::Bifurcation
                            },
                        )
                    })
                    .collect()
            };
            let np = rng.gen_range(0..12);
            let nt = rng.gen_range(0..12);
            let pred = gen(&mut rng, np);
            let truth = gen(&mut rng, nt);
            let acc = minutiae_accuracy(&pred, &truth);
            assert_eq!(acc.correct + acc.spurious, np);
            assert_eq!(acc.correct + acc.missed, nt);
        }
    }
}
