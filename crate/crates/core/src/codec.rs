//! Bit-exact binary serialization for gallery persistence.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "LFRT" | version u16 = 1 | flags u16 | id_len u16 | id (UTF-8)
//! | modality u8 | width u16 | height u16 | ppi u16 | m u32 | n u32
//! | m minutia records | n virtual records | z_a 384×f32 | z_c 384×f32
//! ```
//!
//! A minutia record is `x: f32, y: f32, theta: f32, kind: u8` (13 bytes)
//! followed by the 96×f32 descriptor, 397 bytes total.

use thiserror::Error;

use crate::template::{
    validate_template, Descriptor, FingerprintTemplate, Minutia, MinutiaKind, MinutiaSet,
    Modality, ValidationReport, DESCRIPTOR_DIM, EMBEDDING_HALF_DIM,
};

pub const MAGIC: [u8; 4] = *b"LFRT";
pub const VERSION: u16 = 1;

/// Bytes per serialized minutia record (13-byte fixed part + descriptor).
pub const RECORD_SIZE: usize = 13 + DESCRIPTOR_DIM * 4;
/// Header bytes excluding the variable-length id.
pub const HEADER_SIZE: usize = 4 + 2 + 2 + 2 + 1 + 2 + 2 + 2 + 4 + 4;
/// Bytes for the two embedding halves.
pub const EMBEDDING_BLOCK_SIZE: usize = 2 * EMBEDDING_HALF_DIM * 4;

/// Exact encoded size for a template with `m` minutiae, `n` virtual minutiae
/// and an id of `id_len` bytes.
pub fn encoded_size(m: usize, n: usize, id_len: usize) -> usize {
    HEADER_SIZE + id_len + (m + n) * RECORD_SIZE + EMBEDDING_BLOCK_SIZE
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("template violates invariants: {0:?}")]
    Invalid(ValidationReport),
    #[error("id longer than {max} bytes: {len}", max = u16::MAX)]
    IdTooLong { len: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("bad magic: expected \"LFRT\"")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated payload: needed {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("trailing garbage: {0} bytes past the declared payload")]
    TrailingBytes(usize),
    #[error("id is not valid UTF-8")]
    BadId,
    #[error("unknown modality code {0}")]
    BadModality(u8),
    #[error("unknown minutia kind code {0}")]
    BadKind(u8),
    #[error("decoded template violates invariants: {0:?}")]
    Invalid(ValidationReport),
}

/// Serializes a valid template into the deterministic byte layout above.
pub fn encode_template(t: &FingerprintTemplate) -> Result<Vec<u8>, EncodeError> {
    let report = validate_template(t);
    if !report.is_valid() {
        return Err(EncodeError::Invalid(report));
    }
    let id = t.id.as_bytes();
    if id.len() > u16::MAX as usize {
        return Err(EncodeError::IdTooLong { len: id.len() });
    }

    let mut out = Vec::with_capacity(encoded_size(t.minutiae.len(), t.virtual_minutiae.len(), id.len()));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes()); // flags, reserved
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    out.push(t.modality.code());
    out.extend_from_slice(&t.width.to_le_bytes());
    out.extend_from_slice(&t.height.to_le_bytes());
    out.extend_from_slice(&t.ppi.to_le_bytes());
    out.extend_from_slice(&(t.minutiae.len() as u32).to_le_bytes());
    out.extend_from_slice(&(t.virtual_minutiae.len() as u32).to_le_bytes());
    write_set(&mut out, &t.minutiae);
    write_set(&mut out, &t.virtual_minutiae);
    for v in t.embedding.z_a() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in t.embedding.z_c() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn write_set(out: &mut Vec<u8>, set: &MinutiaSet) {
    for (m, d) in set.minutiae.iter().zip(&set.descriptors) {
        out.extend_from_slice(&m.x.to_le_bytes());
        out.extend_from_slice(&m.y.to_le_bytes());
        out.extend_from_slice(&m.theta.to_le_bytes());
        out.push(m.kind.code());
        for v in d.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < n {
            return Err(DecodeError::Truncated {
                needed: self.pos + n,
                got: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, DecodeError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Decodes a template, verifying magic, version, declared counts and the
/// template invariants. Never reads past the declared counts.
pub fn decode_template(bytes: &[u8]) -> Result<FingerprintTemplate, DecodeError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let _flags = r.u16()?;
    let id_len = r.u16()? as usize;
    let id = std::str::from_utf8(r.take(id_len)?)
        .map_err(|_| DecodeError::BadId)?
        .to_owned();
    let modality_code = r.u8()?;
    let modality = Modality::from_code(modality_code).ok_or(DecodeError::BadModality(modality_code))?;
    let width = r.u16()?;
    let height = r.u16()?;
    let ppi = r.u16()?;
    let m = r.u32()? as usize;
    let n = r.u32()? as usize;

    // bound the remaining payload before allocating record storage
    let needed = r.pos + (m + n) * RECORD_SIZE + EMBEDDING_BLOCK_SIZE;
    if bytes.len() < needed {
        return Err(DecodeError::Truncated {
            needed,
            got: bytes.len(),
        });
    }

    let minutiae = read_set(&mut r, m)?;
    let virtual_minutiae = read_set(&mut r, n)?;
    let mut z_a = Vec::with_capacity(EMBEDDING_HALF_DIM);
    for _ in 0..EMBEDDING_HALF_DIM {
        z_a.push(r.f32()?);
    }
    let mut z_c = Vec::with_capacity(EMBEDDING_HALF_DIM);
    for _ in 0..EMBEDDING_HALF_DIM {
        z_c.push(r.f32()?);
    }
    if r.pos != bytes.len() {
        return Err(DecodeError::TrailingBytes(bytes.len() - r.pos));
    }

    let template = FingerprintTemplate {
        id,
        modality,
        minutiae,
        virtual_minutiae,
        embedding: crate::template::GlobalEmbedding::from_raw(z_a, z_c),
        width,
        height,
        ppi,
    };
    let report = validate_template(&template);
    if !report.is_valid() {
        return Err(DecodeError::Invalid(report));
    }
    Ok(template)
}

fn read_set(r: &mut Reader<'_>, count: usize) -> Result<MinutiaSet, DecodeError> {
    let mut minutiae = Vec::with_capacity(count);
    let mut descriptors = Vec::with_capacity(count);
    for _ in 0..count {
        let x = r.f32()?;
        let y = r.f32()?;
        let theta = r.f32()?;
        let kind_code = r.u8()?;
        let kind = MinutiaKind::from_code(kind_code).ok_or(DecodeError::BadKind(kind_code))?;
        minutiae.push(Minutia { x, y, theta, kind });
        let mut values = Vec::with_capacity(DESCRIPTOR_DIM);
        for _ in 0..DESCRIPTOR_DIM {
            values.push(r.f32()?);
        }
        descriptors.push(Descriptor::from_raw(values));
    }
    Ok(MinutiaSet { minutiae, descriptors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::GlobalEmbedding;

    fn unit_descriptor(axis: usize) -> Descriptor {
        let mut v = vec![0.0f32; DESCRIPTOR_DIM];
        v[axis % DESCRIPTOR_DIM] = 1.0;
        Descriptor::new(v).unwrap()
    }

    fn template(m: usize, n: usize, id: &str) -> FingerprintTemplate {
        let minutiae = MinutiaSet::new(
            (0..m)
                .map(|i| Minutia::new(10.0 + i as f32, 20.0, 0.3, MinutiaKind::RidgeEnding))
                .collect(),
            (0..m).map(unit_descriptor).collect(),
        )
        .unwrap();
        let virtual_minutiae = MinutiaSet::new(
            (0..n)
                .map(|i| Minutia::new(8.0 + 16.0 * i as f32, 8.0, 1.0, MinutiaKind::Virtual))
                .collect(),
            (0..n).map(|i| unit_descriptor(i + 7)).collect(),
        )
        .unwrap();
        let mut a = vec![0.0f32; EMBEDDING_HALF_DIM];
        let mut c = vec![0.0f32; EMBEDDING_HALF_DIM];
        a[3] = 1.0;
        c[5] = -1.0;
        FingerprintTemplate {
            id: id.into(),
            modality: Modality::Rolled,
            minutiae,
            virtual_minutiae,
            embedding: GlobalEmbedding::new(a, c).unwrap(),
            width: 512,
            height: 512,
            ppi: 500,
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let t = template(3, 2, "abc");
        let bytes = encode_template(&t).unwrap();
        let back = decode_template(&bytes).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn empty_template_size_is_header_plus_embedding() {
        let t = template(0, 0, "xy");
        let bytes = encode_template(&t).unwrap();
        assert_eq!(bytes.len(), HEADER_SIZE + 2 + EMBEDDING_BLOCK_SIZE);
        assert_eq!(bytes.len(), encoded_size(0, 0, 2));
    }

    #[test]
    fn block_sizes_match_the_closed_form() {
        // m=45, n=363: average latent counts; each record is 13+384 bytes
        let t = template(45, 363, "latent");
        let bytes = encode_template(&t).unwrap();
        assert_eq!(RECORD_SIZE, 13 + 384);
        assert_eq!(bytes.len(), encoded_size(45, 363, 6));
        assert_eq!(
            bytes.len(),
            HEADER_SIZE + 6 + 45 * (13 + 384) + 363 * (13 + 384) + 768 * 4
        );
    }

    #[test]
    fn bad_magic_is_detected() {
        let t = template(1, 0, "a");
        let mut bytes = encode_template(&t).unwrap();
        bytes[0] = b'X';
        assert_eq!(decode_template(&bytes), Err(DecodeError::BadMagic));
    }

    #[test]
    fn unsupported_version_is_detected() {
        let t = template(1, 0, "a");
        let mut bytes = encode_template(&t).unwrap();
        bytes[4] = 9;
        assert!(matches!(
            decode_template(&bytes),
            Err(DecodeError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn declared_count_beyond_payload_is_truncation() {
        let t = template(5, 0, "a");
        let mut bytes = encode_template(&t).unwrap();
        // claim m=10 while only 5 records are present
        let m_off = HEADER_SIZE + 1 - 8;
        bytes[m_off..m_off + 4].copy_from_slice(&10u32.to_le_bytes());
        assert!(matches!(
            decode_template(&bytes),
            Err(DecodeError::Truncated { .. })
        ));
    }

    #[test]
    fn truncated_buffer_is_detected() {
        let t = template(2, 1, "a");
        let bytes = encode_template(&t).unwrap();
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(matches!(
                decode_template(&bytes[..cut]),
                Err(DecodeError::Truncated { .. }) | Err(DecodeError::BadMagic)
            ));
        }
    }

    #[test]
    fn invalid_decoded_template_is_rejected() {
        let t = template(1, 0, "a");
        let mut bytes = encode_template(&t).unwrap();
        // corrupt theta of the first minutia to 7.0 rad
        let theta_off = HEADER_SIZE + 1 + 8;
        bytes[theta_off..theta_off + 4].copy_from_slice(&7.0f32.to_le_bytes());
        assert!(matches!(decode_template(&bytes), Err(DecodeError::Invalid(_))));
    }
}
