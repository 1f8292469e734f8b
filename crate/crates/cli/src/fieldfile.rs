//! Binary spinor-field files.
//!
//! Layout, little-endian throughout:
//! magic `SPGS` | version u32 | dim u32 | points dim*u32 | half_width dim*f64
//! | payload 3 * prod(N) * (re f64, im f64) | checksum u64.
//! The checksum is 64-bit FNV-1a over every byte between the version word
//! and the checksum itself; components are stored in level order +1, 0, -1,
//! row-major in the grid's flat index order.

use spings::grid::GridSpec;
use spings::{C64, SpinorField};
use std::fmt;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"SPGS";
pub const VERSION: u32 = 1;

#[derive(Debug)]
pub enum FieldFileError {
    Io(std::io::Error),
    BadMagic,
    UnsupportedVersion(u32),
    ChecksumMismatch { stored: u64, computed: u64 },
    Malformed(String),
}

impl fmt::Display for FieldFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldFileError::Io(e) => write!(f, "io error: {e}"),
            FieldFileError::BadMagic => write!(f, "not a field file (bad magic)"),
            FieldFileError::UnsupportedVersion(v) => {
                write!(f, "unsupported field file version {v} (expected {VERSION})")
            }
            FieldFileError::ChecksumMismatch { stored, computed } => write!(
                f,
                "checksum mismatch: stored {stored:#018x}, computed {computed:#018x}"
            ),
            FieldFileError::Malformed(m) => write!(f, "malformed field file: {m}"),
        }
    }
}

impl std::error::Error for FieldFileError {}

impl From<std::io::Error> for FieldFileError {
    fn from(e: std::io::Error) -> Self {
        FieldFileError::Io(e)
    }
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }
    fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

struct CheckedWriter<W: Write> {
    inner: W,
    hash: Fnv1a,
}

impl<W: Write> CheckedWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.hash.update(bytes);
        self.inner.write_all(bytes)
    }
}

pub fn write_field(path: &Path, field: &SpinorField) -> Result<(), FieldFileError> {
    let file = std::fs::File::create(path)?;
    let mut w = CheckedWriter { inner: BufWriter::new(file), hash: Fnv1a::new() };
    w.inner.write_all(MAGIC)?;
    w.put(&VERSION.to_le_bytes())?;
    let grid = field.grid();
    w.put(&(grid.dim() as u32).to_le_bytes())?;
    for &n in grid.points() {
        w.put(&(n as u32).to_le_bytes())?;
    }
    for &l in grid.half_width() {
        w.put(&l.to_le_bytes())?;
    }
    for l in 0..3 {
        for z in field.component(l) {
            w.put(&z.re.to_le_bytes())?;
            w.put(&z.im.to_le_bytes())?;
        }
    }
    let checksum = w.hash.0;
    w.inner.write_all(&checksum.to_le_bytes())?;
    w.inner.flush()?;
    Ok(())
}

struct CheckedReader<R: Read> {
    inner: R,
    hash: Fnv1a,
}

impl<R: Read> CheckedReader<R> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], FieldFileError> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf)?;
        self.hash.update(&buf);
        Ok(buf)
    }
}

pub fn read_field(path: &Path) -> Result<SpinorField, FieldFileError> {
    let file = std::fs::File::open(path)?;
    let mut r = CheckedReader { inner: BufReader::new(file), hash: Fnv1a::new() };
    let mut magic = [0u8; 4];
    r.inner.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FieldFileError::BadMagic);
    }
    let version = u32::from_le_bytes(r.take::<4>()?);
    if version != VERSION {
        return Err(FieldFileError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(r.take::<4>()?) as usize;
    if !(dim == 2 || dim == 3) {
        return Err(FieldFileError::Malformed(format!("dimension {dim}")));
    }
    let mut points = Vec::with_capacity(dim);
    for _ in 0..dim {
        points.push(u32::from_le_bytes(r.take::<4>()?) as usize);
    }
    let mut half_width = Vec::with_capacity(dim);
    for _ in 0..dim {
        half_width.push(f64::from_le_bytes(r.take::<8>()?));
    }
    let grid = GridSpec::new(dim, &half_width, &points)
        .map_err(|e| FieldFileError::Malformed(e.to_string()))?;
    let n = grid.total_points();
    let mut comps: [Vec<C64>; 3] = Default::default();
    for c in comps.iter_mut() {
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let re = f64::from_le_bytes(r.take::<8>()?);
            let im = f64::from_le_bytes(r.take::<8>()?);
            data.push(C64::new(re, im));
        }
        *c = data;
    }
    let computed = r.hash.0;
    let mut tail = [0u8; 8];
    r.inner.read_exact(&mut tail)?;
    let stored = u64::from_le_bytes(tail);
    if stored != computed {
        return Err(FieldFileError::ChecksumMismatch { stored, computed });
    }
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest)? != 0 {
        return Err(FieldFileError::Malformed("trailing bytes after checksum".into()));
    }
    SpinorField::from_components(grid, comps)
        .map_err(|e| FieldFileError::Malformed(e.to_string()))
}

/// Expected file size in bytes for a grid; header + payload + checksum.
pub fn expected_size(grid: &GridSpec) -> u64 {
    let header = 4 + 4 + 4 + 4 * grid.dim() + 8 * grid.dim();
    (header + 3 * grid.total_points() * 16 + 8) as u64
}
