//! Text-format ingestion for externally extracted features, and the matching
//! exporter. Angles are degrees on disk (forensic convention) and radians in
//! memory. Floats are written in shortest round-trip form, so
//! `ingest(export(t)) == t` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::template::{
    validate_template, Descriptor, FingerprintTemplate, GlobalEmbedding, Minutia, MinutiaKind,
    MinutiaSet, Modality, DESCRIPTOR_DIM, EMBEDDING_HALF_DIM,
};

pub const MINUTIAE_HEADER: &str = "x,y,theta_deg,kind";

pub const META_FILE: &str = "meta.txt";
pub const MINUTIAE_FILE: &str = "minutiae.csv";
pub const DESCRIPTORS_FILE: &str = "descriptors.csv";
pub const VIRTUAL_MINUTIAE_FILE: &str = "virtual_minutiae.csv";
pub const VIRTUAL_DESCRIPTORS_FILE: &str = "virtual_descriptors.csv";
pub const EMBEDDING_FILE: &str = "embedding.csv";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}:{line}:{col}: {msg}")]
    Parse {
        file: String,
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{file}:{line}: expected {expected} values, got {got}")]
    Dimension {
        file: String,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("{minutiae} minutiae rows but {descriptors} descriptor rows")]
    CountMismatch { minutiae: usize, descriptors: usize },
    #[error("ingested template violates invariants: {0}")]
    Invalid(String),
}

fn kind_name(kind: MinutiaKind) -> &'static str {
    match kind {
        MinutiaKind::RidgeEnding => "ending",
        MinutiaKind::Bifurcation => "bifurcation",
        MinutiaKind::Virtual => "virtual",
        MinutiaKind::Unknown => "unknown",
    }
}

fn kind_from_name(name: &str) -> Option<MinutiaKind> {
    match name {
        "ending" => Some(MinutiaKind::RidgeEnding),
        "bifurcation" => Some(MinutiaKind::Bifurcation),
        "virtual" => Some(MinutiaKind::Virtual),
        "unknown" => Some(MinutiaKind::Unknown),
        _ => None,
    }
}

fn modality_name(m: Modality) -> &'static str {
    match m {
        Modality::Latent => "latent",
        Modality::Rolled => "rolled",
        Modality::Plain => "plain",
        Modality::Synthetic => "synthetic",
    }
}

fn modality_from_name(name: &str) -> Option<Modality> {
    match name {
        "latent" => Some(Modality::Latent),
        "rolled" => Some(Modality::Rolled),
        "plain" => Some(Modality::Plain),
        "synthetic" => Some(Modality::Synthetic),
        _ => None,
    }
}

fn parse_field<T: std::str::FromStr>(
    file: &str,
    line: usize,
    col: usize,
    raw: &str,
    what: &str,
) -> Result<T, IngestError> {
    raw.trim().parse().map_err(|_| IngestError::Parse {
        file: file.to_owned(),
        line,
        col,
        msg: format!("bad {what} {raw:?}"),
    })
}

/// Parses the minutiae CSV: header `x,y,theta_deg,kind`, one minutia per row.
pub fn parse_minutiae_csv(file: &str, text: &str) -> Result<Vec<Minutia>, IngestError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == MINUTIAE_HEADER => {}
        other => {
            return Err(IngestError::Parse {
                file: file.to_owned(),
                line: 1,
                col: 1,
                msg: format!(
                    "expected header {MINUTIAE_HEADER:?}, got {:?}",
                    other.map(|(_, l)| l).unwrap_or("")
                ),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1;
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(IngestError::Parse {
                file: file.to_owned(),
                line,
                col: 1,
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let x: f32 = parse_field(file, line, 1, fields[0], "x")?;
        let y: f32 = parse_field(file, line, 2, fields[1], "y")?;
        let theta_deg: f64 = parse_field(file, line, 3, fields[2], "theta_deg")?;
        if !x.is_finite() || !y.is_finite() || !theta_deg.is_finite() {
            return Err(IngestError::Parse {
                file: file.to_owned(),
                line,
                col: 1,
                msg: "non-finite value".into(),
            });
        }
        let kind = kind_from_name(fields[3].trim()).ok_or_else(|| IngestError::Parse {
            file: file.to_owned(),
            line,
            col: 4,
            msg: format!("unknown minutia kind {:?}", fields[3].trim()),
        })?;
        out.push(Minutia::new(x, y, theta_deg.to_radians() as f32, kind));
    }
    Ok(out)
}

/// Parses descriptor rows: `expected_dim` comma-separated reals per line.
pub fn parse_descriptor_rows(file: &str, text: &str) -> Result<Vec<Descriptor>, IngestError> {
    let mut out = Vec::new();
    for (idx, row) in text.lines().enumerate() {
        let line = idx + 1;
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != DESCRIPTOR_DIM {
            return Err(IngestError::Dimension {
                file: file.to_owned(),
                line,
                expected: DESCRIPTOR_DIM,
                got: fields.len(),
            });
        }
        let mut values = Vec::with_capacity(DESCRIPTOR_DIM);
        for (col, raw) in fields.iter().enumerate() {
            let v: f32 = parse_field(file, line, col + 1, raw, "descriptor component")?;
            values.push(v);
        }
        // raw wrap: values come from an extractor already unit-norm; final
        // template validation reports any norm violation with context
        out.push(Descriptor::from_raw(values));
    }
    Ok(out)
}

/// Parses the embedding file: 768 comma-separated reals (newlines allowed).
pub fn parse_embedding(file: &str, text: &str) -> Result<GlobalEmbedding, IngestError> {
    let mut values = Vec::with_capacity(2 * EMBEDDING_HALF_DIM);
    for (idx, row) in text.lines().enumerate() {
        let line = idx + 1;
        for (col, raw) in row.split(',').enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let v: f32 = parse_field(file, line, col + 1, raw, "embedding component")?;
            values.push(v);
        }
    }
    if values.len() != 2 * EMBEDDING_HALF_DIM {
        return Err(IngestError::Dimension {
            file: file.to_owned(),
            line: 1,
            expected: 2 * EMBEDDING_HALF_DIM,
            got: values.len(),
        });
    }
    let z_c = values.split_off(EMBEDDING_HALF_DIM);
    Ok(GlobalEmbedding::from_raw(values, z_c))
}

#[derive(Debug, Clone, PartialEq)]
struct Meta {
    id: String,
    modality: Modality,
    width: u16,
    height: u16,
    ppi: u16,
}

fn parse_meta(file: &str, text: &str) -> Result<Meta, IngestError> {
    let mut id = None;
    let mut modality = None;
    let mut width = None;
    let mut height = None;
    let mut ppi = None;
    for (idx, row) in text.lines().enumerate() {
        let line = idx + 1;
        let row = row.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let (key, value) = row.split_once('=').ok_or_else(|| IngestError::Parse {
            file: file.to_owned(),
            line,
            col: 1,
            msg: format!("expected key=value, got {row:?}"),
        })?;
        match key.trim() {
            "id" => id = Some(value.trim().to_owned()),
            "modality" => {
                modality = Some(modality_from_name(value.trim()).ok_or_else(|| {
                    IngestError::Parse {
                        file: file.to_owned(),
                        line,
                        col: 1,
                        msg: format!("unknown modality {:?}", value.trim()),
                    }
                })?)
            }
            "width" => width = Some(parse_field(file, line, 1, value, "width")?),
            "height" => height = Some(parse_field(file, line, 1, value, "height")?),
            "ppi" => ppi = Some(parse_field(file, line, 1, value, "ppi")?),
            other => {
                return Err(IngestError::Parse {
                    file: file.to_owned(),
                    line,
                    col: 1,
                    msg: format!("unknown key {other:?}"),
                })
            }
        }
    }
    let missing = |what: &str| IngestError::Parse {
        file: file.to_owned(),
        line: 1,
        col: 1,
        msg: format!("missing key {what:?}"),
    };
    Ok(Meta {
        id: id.ok_or_else(|| missing("id"))?,
        modality: modality.ok_or_else(|| missing("modality"))?,
        width: width.ok_or_else(|| missing("width"))?,
        height: height.ok_or_else(|| missing("height"))?,
        ppi: ppi.ok_or_else(|| missing("ppi"))?,
    })
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IngestError> {
    fs::write(path, text).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn label(path: &Path) -> String {
    path.display().to_string()
}

/// Assembles a validated template from parsed parts.
pub fn assemble_template(
    id: String,
    modality: Modality,
    minutiae: Vec<Minutia>,
    descriptors: Vec<Descriptor>,
    virtual_minutiae: Vec<Minutia>,
    virtual_descriptors: Vec<Descriptor>,
    embedding: GlobalEmbedding,
    width: u16,
    height: u16,
    ppi: u16,
) -> Result<FingerprintTemplate, IngestError> {
    let minutiae =
        MinutiaSet::new(minutiae, descriptors).map_err(|e| match e {
            crate::template::TemplateError::CountMismatch {
                minutiae,
                descriptors,
            } => IngestError::CountMismatch {
                minutiae,
                descriptors,
            },
            other => IngestError::Invalid(other.to_string()),
        })?;
    let virtual_minutiae = MinutiaSet::new(virtual_minutiae, virtual_descriptors).map_err(|e| {
        match e {
            crate::template::TemplateError::CountMismatch {
                minutiae,
                descriptors,
            } => IngestError::CountMismatch {
                minutiae,
                descriptors,
            },
            other => IngestError::Invalid(other.to_string()),
        }
    })?;
    let template = FingerprintTemplate {
        id,
        modality,
        minutiae,
        virtual_minutiae,
        embedding,
        width,
        height,
        ppi,
    };
    let report = validate_template(&template);
    if !report.is_valid() {
        let summary: Vec<String> = report
            .violations
            .iter()
            .take(3)
            .map(|v| v.detail.clone())
            .collect();
        return Err(IngestError::Invalid(summary.join("; ")));
    }
    Ok(template)
}

/// Reads a template exported with [`export_external`] from `dir`.
/// Virtual-minutiae files are optional; absent means an empty virtual set.
pub fn ingest_external(dir: &Path) -> Result<FingerprintTemplate, IngestError> {
    let meta_path = dir.join(META_FILE);
    let meta = parse_meta(&label(&meta_path), &read(&meta_path)?)?;
    let minutiae_path = dir.join(MINUTIAE_FILE);
    let minutiae = parse_minutiae_csv(&label(&minutiae_path), &read(&minutiae_path)?)?;
    let descriptors_path = dir.join(DESCRIPTORS_FILE);
    let descriptors = parse_descriptor_rows(&label(&descriptors_path), &read(&descriptors_path)?)?;
    let (virtual_minutiae, virtual_descriptors) = {
        let vm_path = dir.join(VIRTUAL_MINUTIAE_FILE);
        let vd_path = dir.join(VIRTUAL_DESCRIPTORS_FILE);
        if vm_path.exists() {
            (
                parse_minutiae_csv(&label(&vm_path), &read(&vm_path)?)?,
                parse_descriptor_rows(&label(&vd_path), &read(&vd_path)?)?,
            )
        } else {
            (Vec::new(), Vec::new())
        }
    };
    let embedding_path = dir.join(EMBEDDING_FILE);
    let embedding = parse_embedding(&label(&embedding_path), &read(&embedding_path)?)?;
    assemble_template(
        meta.id,
        meta.modality,
        minutiae,
        descriptors,
        virtual_minutiae,
        virtual_descriptors,
        embedding,
        meta.width,
        meta.height,
        meta.ppi,
    )
}

pub fn format_minutiae_csv(minutiae: &[Minutia]) -> String {
    let mut out = String::from(MINUTIAE_HEADER);
    out.push('\n');
    for m in minutiae {
        // degrees as f64 shortest round-trip: deg→rad→f32 recovers theta
        let _ = writeln!(
            out,
            "{},{},{},{}",
            m.x,
            m.y,
            (m.theta as f64).to_degrees(),
            kind_name(m.kind)
        );
    }
    out
}

pub fn format_descriptor_rows(descriptors: &[Descriptor]) -> String {
    let mut out = String::new();
    for d in descriptors {
        let row: Vec<String> = d.values().iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn format_embedding(embedding: &GlobalEmbedding) -> String {
    let row: Vec<String> = embedding.concat().map(|v| v.to_string()).collect();
    let mut out = row.join(",");
    out.push('\n');
    out
}

fn format_meta(t: &FingerprintTemplate) -> String {
    format!(
        "id={}\nmodality={}\nwidth={}\nheight={}\nppi={}\n",
        t.id,
        modality_name(t.modality),
        t.width,
        t.height,
        t.ppi
    )
}

/// Writes the text-format files for `t` into `dir` (created if needed).
pub fn export_external(t: &FingerprintTemplate, dir: &Path) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(|source| IngestError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write(&dir.join(META_FILE), &format_meta(t))?;
    write(
        &dir.join(MINUTIAE_FILE),
        &format_minutiae_csv(&t.minutiae.minutiae),
    )?;
    write(
        &dir.join(DESCRIPTORS_FILE),
        &format_descriptor_rows(&t.minutiae.descriptors),
    )?;
    write(
        &dir.join(VIRTUAL_MINUTIAE_FILE),
        &format_minutiae_csv(&t.virtual_minutiae.minutiae),
    )?;
    write(
        &dir.join(VIRTUAL_DESCRIPTORS_FILE),
        &format_descriptor_rows(&t.virtual_minutiae.descriptors),
    )?;
    write(&dir.join(EMBEDDING_FILE), &format_embedding(&t.embedding))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_master, synth_observe, ObservationParams};
    use std::f32::consts::{FRAC_PI_2, TAU};

    fn unit_row(axis: usize) -> String {
        let mut v = vec!["0".to_string(); DESCRIPTOR_DIM];
        v[axis] = "1".into();
        v.join(",")
    }

    fn unit_embedding_text() -> String {
        let mut v = vec!["0".to_string(); 2 * EMBEDDING_HALF_DIM];
        v[0] = "1".into();
        v[EMBEDDING_HALF_DIM] = "1".into();
        v.join(",")
    }

    #[test]
    fn single_row_converts_degrees_to_radians() {
        let minutiae = parse_minutiae_csv("m.csv", "x,y,theta_deg,kind\n100,200,90,ending\n")
            .unwrap();
        let descriptors = parse_descriptor_rows("d.csv", &unit_row(0)).unwrap();
        let embedding = parse_embedding("e.csv", &unit_embedding_text()).unwrap();
        let t = assemble_template(
            "t".into(),
            Modality::Latent,
            minutiae,
            descriptors,
            Vec::new(),
            Vec::new(),
            embedding,
            512,
            512,
            500,
        )
        .unwrap();
        assert_eq!(t.minutiae.len(), 1);
        let m = t.minutiae.minutiae[0];
        assert_eq!((m.x, m.y), (100.0, 200.0));
        assert!((m.theta - FRAC_PI_2).abs() < 1e-7);
        assert_eq!(m.kind, MinutiaKind::RidgeEnding);
    }

    #[test]
    fn short_descriptor_row_reports_dimension_mismatch() {
        let row = vec!["0.1"; 95].join(",");
        match parse_descriptor_rows("d.csv", &row) {
            Err(IngestError::Dimension {
                line, expected, got, ..
            }) => {
                assert_eq!((line, expected, got), (1, 96, 95));
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn short_embedding_reports_dimension_mismatch() {
        let text = vec!["0.5"; 767].join(",");
        assert!(matches!(
            parse_embedding("e.csv", &text),
            Err(IngestError::Dimension {
                expected: 768,
                got: 767,
                ..
            })
        ));
    }

    #[test]
    fn parse_errors_carry_line_and_column() {
        let text = "x,y,theta_deg,kind\n1,2,0,ending\n3,nope,0,ending\n";
        match parse_minutiae_csv("m.csv", text) {
            Err(IngestError::Parse { line, col, .. }) => assert_eq!((line, col), (3, 2)),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = "x,y,theta_deg,kind\n1,2,0,spur\n";
        match parse_minutiae_csv("m.csv", text) {
            Err(IngestError::Parse { line, col, .. }) => assert_eq!((line, col), (2, 4)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_header_is_rejected() {
        assert!(matches!(
            parse_minutiae_csv("m.csv", "1,2,0,ending\n"),
            Err(IngestError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn row_count_mismatch_is_rejected() {
        let minutiae =
            parse_minutiae_csv("m.csv", "x,y,theta_deg,kind\n1,2,0,ending\n3,4,0,ending\n")
                .unwrap();
        let descriptors = parse_descriptor_rows("d.csv", &unit_row(0)).unwrap();
        let embedding = parse_embedding("e.csv", &unit_embedding_text()).unwrap();
        assert!(matches!(
            assemble_template(
                "t".into(),
                Modality::Latent,
                minutiae,
                descriptors,
                Vec::new(),
                Vec::new(),
                embedding,
                512,
                512,
                500,
            ),
            Err(IngestError::CountMismatch {
                minutiae: 2,
                descriptors: 1
            })
        ));
    }

    #[test]
    fn non_unit_descriptor_fails_final_validation() {
        let minutiae = parse_minutiae_csv("m.csv", "x,y,theta_deg,kind\n1,2,0,ending\n").unwrap();
        let row = vec!["0.5"; 96].join(",");
        let descriptors = parse_descriptor_rows("d.csv", &row).unwrap();
        let embedding = parse_embedding("e.csv", &unit_embedding_text()).unwrap();
        assert!(matches!(
            assemble_template(
                "t".into(),
                Modality::Latent,
                minutiae,
                descriptors,
                Vec::new(),
                Vec::new(),
                embedding,
                512,
                512,
                500,
            ),
            Err(IngestError::Invalid(_))
        ));
    }

    #[test]
    fn angle_display_round_trips_through_degrees() {
        for i in 0..1000 {
            let theta = (i as f32 / 1000.0) * TAU;
            let deg_text = (theta as f64).to_degrees().to_string();
            let back: f64 = deg_text.parse().unwrap();
            assert_eq!(back.to_radians() as f32, theta, "theta {theta}");
        }
    }

    #[test]
    fn export_then_ingest_is_identity() {
        let master = synth_master(31, 0);
        let obs = synth_observe(
            &master,
            &ObservationParams::probe_default(),
            1,
            "probe-xyz",
            Modality::Latent,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_external(&obs.template, dir.path()).unwrap();
        let back = ingest_external(dir.path()).unwrap();
        assert_eq!(back, obs.template);
    }

    #[test]
    fn export_agrees_with_binary_codec() {
        let master = synth_master(32, 0);
        let obs = synth_observe(
            &master,
            &ObservationParams::gallery_default(),
            2,
            "g0",
            Modality::Rolled,
        )
        .unwrap();
        let bytes = crate::codec::encode_template(&obs.template).unwrap();
        let decoded = crate::codec::decode_template(&bytes).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_external(&decoded, dir.path()).unwrap();
        let back = ingest_external(dir.path()).unwrap();
        assert_eq!(back, obs.template);
    }
}
