//! 3D Gaussian Splatting checkpoint PLY files.
//!
//! Records are stored in one flat `f32` buffer in canonical property order,
//! so a set of N records occupies exactly N times the on-disk record size.
//! Files with a permuted property order are accepted and canonicalized;
//! canonical files round-trip bit-exactly.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian as LE};

/// Components besides the higher-order SH coefficients.
pub const BASE_COMPONENTS: usize = 17;
/// Floats per read/write chunk.
const CHUNK: usize = 1 << 16;

#[derive(Debug, thiserror::Error)]
pub enum SplatError {
    #[error("not a PLY file")]
    NotPly,
    #[error("ascii PLY is not supported; convert to binary_little_endian")]
    Ascii,
    #[error("unsupported PLY format {0:?}")]
    UnsupportedFormat(String),
    #[error("unsupported PLY element {0:?}")]
    UnsupportedElement(String),
    #[error("property {name:?} has unsupported type {ty:?} (float32 required)")]
    UnsupportedType { name: String, ty: String },
    #[error("malformed PLY header line {0:?}")]
    MalformedHeader(String),
    #[error("missing required property {0:?}")]
    MissingProperty(String),
    #[error("unknown property {0:?}")]
    UnknownProperty(String),
    #[error("duplicate property {0:?}")]
    DuplicateProperty(String),
    #[error("f_rest count {0} is not one of 0, 9, 24, 45")]
    InvalidShCount(usize),
    #[error("sh degree {0} outside 0..=3")]
    InvalidShDegree(u8),
    #[error("record has {found} higher-order SH coefficients, set expects {expected}")]
    ShMismatch { expected: usize, found: usize },
    #[error("record {index} has a non-finite component")]
    NonFinite { index: usize },
    #[error("payload truncated: expected {expected} records, read {read}")]
    Truncated { expected: usize, read: usize },
    #[error("{0} trailing bytes after the vertex payload")]
    Trailing(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SplatError> = std::result::Result<T, E>;

/// Number of `f_rest_*` coefficients for an SH degree.
pub fn rest_count(sh_degree: u8) -> usize {
    let d = sh_degree as usize + 1;
    3 * (d * d - 1)
}

fn degree_for_rest(n: usize) -> Option<u8> {
    (0..=3u8).find(|d| rest_count(*d) == n)
}

/// Property names in canonical 3DGS order.
pub fn canonical_properties(sh_degree: u8) -> Vec<String> {
    let mut names: Vec<String> =
        ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"].iter().map(|s| s.to_string()).collect();
    names.extend((0..rest_count(sh_degree)).map(|i| format!("f_rest_{i}")));
    names.extend(
        ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"].iter().map(|s| s.to_string()),
    );
    names
}

/// One Gaussian, owned.
#[derive(Clone, Debug, PartialEq)]
pub struct SplatRecord {
    pub position: [f32; 3],
    pub normal: [f32; 3],
    pub sh_dc: [f32; 3],
    pub sh_rest: Vec<f32>,
    /// Pre-sigmoid opacity logit.
    pub opacity: f32,
    /// Pre-exponential scales.
    pub log_scale: [f32; 3],
    /// Quaternion as stored; not necessarily unit.
    pub rotation: [f32; 4],
}

impl SplatRecord {
    fn write_into(&self, out: &mut Vec<f32>) {
        out.extend_from_slice(&self.position);
        out.extend_from_slice(&self.normal);
        out.extend_from_slice(&self.sh_dc);
        out.extend_from_slice(&self.sh_rest);
        out.push(self.opacity);
        out.extend_from_slice(&self.log_scale);
        out.extend_from_slice(&self.rotation);
    }
}

/// Borrowed view of one record inside a [`SplatSet`].
#[derive(Clone, Copy, Debug)]
pub struct SplatRef<'a> {
    raw: &'a [f32],
    rest: usize,
}

impl<'a> SplatRef<'a> {
    #[inline]
    pub fn position(&self) -> [f32; 3] {
        [self.raw[0], self.raw[1], self.raw[2]]
    }

    /// Center in `f64` (exact widening).
    #[inline]
    pub fn center(&self) -> [f64; 3] {
        [self.raw[0] as f64, self.raw[1] as f64, self.raw[2] as f64]
    }

    pub fn opacity(&self) -> f32 {
        self.raw[9 + self.rest]
    }

    /// All components in canonical order.
    pub fn raw(&self) -> &'a [f32] {
        self.raw
    }

    pub fn to_record(&self) -> SplatRecord {
        let r = self.raw;
        let o = 9 + self.rest;
        SplatRecord {
            position: [r[0], r[1], r[2]],
            normal: [r[3], r[4], r[5]],
            sh_dc: [r[6], r[7], r[8]],
            sh_rest: r[9..o].to_vec(),
            opacity: r[o],
            log_scale: [r[o + 1], r[o + 2], r[o + 3]],
            rotation: [r[o + 4], r[o + 5], r[o + 6], r[o + 7]],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplatSet {
    sh_degree: u8,
    data: Vec<f32>,
}

impl SplatSet {
    pub fn new(sh_degree: u8) -> Result<Self> {
        Self::with_capacity(sh_degree, 0)
    }

    pub fn with_capacity(sh_degree: u8, records: usize) -> Result<Self> {
        if sh_degree > 3 {
            return Err(SplatError::InvalidShDegree(sh_degree));
        }
        let stride = BASE_COMPONENTS + rest_count(sh_degree);
        Ok(Self { sh_degree, data: Vec::with_capacity(records * stride) })
    }

    pub fn sh_degree(&self) -> u8 {
        self.sh_degree
    }

    /// Floats per record.
    pub fn stride(&self) -> usize {
        BASE_COMPONENTS + rest_count(self.sh_degree)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.stride()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, record: &SplatRecord) -> Result<()> {
        let expected = rest_count(self.sh_degree);
        if record.sh_rest.len() != expected {
            return Err(SplatError::ShMismatch { expected, found: record.sh_rest.len() });
        }
        record.write_into(&mut self.data);
        Ok(())
    }

    /// Appends one record given in canonical component order.
    pub fn push_raw(&mut self, raw: &[f32]) {
        assert_eq!(raw.len(), self.stride(), "record width");
        self.data.extend_from_slice(raw);
    }

    #[inline]
    pub fn get(&self, index: usize) -> SplatRef<'_> {
        let s = self.stride();
        SplatRef { raw: &self.data[index * s..(index + 1) * s], rest: rest_count(self.sh_degree) }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = SplatRef<'_>> + '_ {
        let rest = rest_count(self.sh_degree);
        self.data.chunks_exact(self.stride()).map(move |raw| SplatRef { raw, rest })
    }

    pub fn records(&self) -> Vec<SplatRecord> {
        self.iter().map(|r| r.to_record()).collect()
    }

    pub fn raw(&self) -> &[f32] {
        &self.data
    }

    /// Size of the on-disk vertex payload in bytes.
    pub fn payload_bytes(&self) -> usize {
        self.data.len() * 4
    }

    /// Bytes reserved on the heap for record storage.
    pub fn heap_bytes(&self) -> usize {
        self.data.capacity() * 4
    }

    /// Index of the first record with a NaN or infinite component.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.iter().position(|r| r.raw.iter().any(|v| !v.is_finite()))
    }
}

struct Header {
    count: usize,
    sh_degree: u8,
    /// For each property in file order, its canonical slot.
    slots: Vec<usize>,
}

impl Header {
    fn is_canonical(&self) -> bool {
        self.slots.iter().enumerate().all(|(i, s)| i == *s)
    }
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header> {
    let mut line = String::new();
    let mut next = |r: &mut R| -> Result<String> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(SplatError::MalformedHeader("<eof>".into()));
        }
        Ok(line.trim_end_matches(['\n', '\r']).to_string())
    };
    if next(r)? != "ply" {
        return Err(SplatError::NotPly);
    }
    let mut count = None;
    let mut names: Vec<String> = Vec::new();
    loop {
        let l = next(r)?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        match parts.as_slice() {
            ["format", "ascii", ..] => return Err(SplatError::Ascii),
            ["format", "binary_little_endian", "1.0"] => {}
            ["format", other @ ..] => return Err(SplatError::UnsupportedFormat(other.join(" "))),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                if count.is_some() {
                    return Err(SplatError::UnsupportedElement("vertex (repeated)".into()));
                }
                count = Some(n.parse().map_err(|_| SplatError::MalformedHeader(l.clone()))?);
            }
            ["element", name, ..] => return Err(SplatError::UnsupportedElement(name.to_string())),
            ["property", ty, name] => {
                if count.is_none() {
                    return Err(SplatError::MalformedHeader(l.clone()));
                }
                if *ty != "float" && *ty != "float32" {
                    return Err(SplatError::UnsupportedType { name: name.to_string(), ty: ty.to_string() });
                }
                if names.iter().any(|n| n == name) {
                    return Err(SplatError::DuplicateProperty(name.to_string()));
                }
                names.push(name.to_string());
            }
            ["end_header"] => break,
            _ => return Err(SplatError::MalformedHeader(l.clone())),
        }
    }
    let count = count.ok_or_else(|| SplatError::MissingProperty("element vertex".into()))?;

    let rest = names.iter().filter(|n| n.starts_with("f_rest_")).count();
    let canonical_for = |deg: u8| canonical_properties(deg);
    let full = canonical_for(3);
    // Required base properties first, so a missing one is named.
    for required in canonical_for(0) {
        if !names.contains(&required) {
            return Err(SplatError::MissingProperty(required));
        }
    }
    if let Some(unknown) = names.iter().find(|n| !full.contains(n)) {
        return Err(SplatError::UnknownProperty(unknown.clone()));
    }
    let sh_degree = degree_for_rest(rest).ok_or(SplatError::InvalidShCount(rest))?;
    let canonical = canonical_for(sh_degree);
    if let Some(missing) = canonical.iter().find(|c| !names.contains(c)) {
        return Err(SplatError::MissingProperty(missing.clone()));
    }
    let slots = names.iter().map(|n| canonical.iter().position(|c| c == n).expect("checked above")).collect();
    Ok(Header { count, sh_degree, slots })
}

/// Reads a splat PLY from any byte source, streaming the payload.
pub fn read_splats_from<R: Read>(reader: R) -> Result<SplatSet> {
    let mut r = BufReader::with_capacity(1 << 20, reader);
    let header = read_header(&mut r)?;
    let mut set = SplatSet::with_capacity(header.sh_degree, header.count)?;
    let stride = set.stride();
    let total = header.count * stride;
    let mut bytes = vec![0u8; CHUNK.min(total.max(1)) * 4];
    let mut floats = vec![0f32; bytes.len() / 4];
    let canonical = header.is_canonical();
    let mut record = vec![0f32; stride];
    let mut filled = 0;
    let mut pending: Vec<f32> = Vec::with_capacity(stride);
    while filled < total {
        let n = (total - filled).min(floats.len());
        if let Err(e) = r.read_exact(&mut bytes[..n * 4]) {
            return match e.kind() {
                std::io::ErrorKind::UnexpectedEof => {
                    Err(SplatError::Truncated { expected: header.count, read: set.len() })
                }
                _ => Err(e.into()),
            };
        }
        LE::read_f32_into(&bytes[..n * 4], &mut floats[..n]);
        if canonical {
            set.data.extend_from_slice(&floats[..n]);
        } else {
            for &v in &floats[..n] {
                pending.push(v);
                if pending.len() == stride {
                    for (i, slot) in header.slots.iter().enumerate() {
                        record[*slot] = pending[i];
                    }
                    set.data.extend_from_slice(&record);
                    pending.clear();
                }
            }
        }
        filled += n;
    }
    let mut tail = Vec::new();
    r.read_to_end(&mut tail)?;
    if !tail.is_empty() {
        return Err(SplatError::Trailing(tail.len()));
    }
    if let Some(index) = set.first_non_finite() {
        return Err(SplatError::NonFinite { index });
    }
    Ok(set)
}

pub fn read_splats(bytes: &[u8]) -> Result<SplatSet> {
    read_splats_from(bytes)
}

pub fn header_text(sh_degree: u8, count: usize) -> String {
    let mut h = String::from("ply\nformat binary_little_endian 1.0\n");
    let _ = writeln!(h, "element vertex {count}");
    for name in canonical_properties(sh_degree) {
        let _ = writeln!(h, "property float {name}");
    }
    h.push_str("end_header\n");
    h
}

/// Writes a canonical splat PLY to any sink.
pub fn write_splats_to<W: Write>(set: &SplatSet, mut w: W) -> Result<()> {
    if let Some(index) = set.first_non_finite() {
        return Err(SplatError::NonFinite { index });
    }
    w.write_all(header_text(set.sh_degree, set.len()).as_bytes())?;
    let mut buf = vec![0u8; CHUNK * 4];
    for chunk in set.data.chunks(CHUNK) {
        let b = &mut buf[..chunk.len() * 4];
        LE::write_f32_into(chunk, b);
        w.write_all(b)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_splats(set: &SplatSet) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(set.payload_bytes() + 2048);
    write_splats_to(set, &mut out)?;
    Ok(out)
}

pub fn read_splat_file(path: &Path) -> Result<SplatSet> {
    read_splats_from(std::fs::File::open(path)?)
}
