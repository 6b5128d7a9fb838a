//! PFF: a little-endian binary container for field grids.
//!
//! Layout: magic `PFLD`, then `u32` version, height, width and channel flags
//! (bit 0 up, bit 1 latitude, bit 2 confidence, bit 3 validity), then
//! row-major `f32` planes in flag order. Up is stored as two planes (`u_x`
//! then `u_y`), validity as 0/1.

use std::f64::consts::FRAC_PI_2;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector2;

use super::{file_error, IoError};
use crate::field::{GridSpec, PerspectiveField};

pub const PFF_MAGIC: [u8; 4] = *b"PFLD";
pub const PFF_VERSION: u32 = 1;

const FLAG_UP: u32 = 1;
const FLAG_LATITUDE: u32 = 1 << 1;
const FLAG_CONFIDENCE: u32 = 1 << 2;
const FLAG_VALIDITY: u32 = 1 << 3;

/// Exact in-memory image of a PFF file.
#[derive(Clone, Debug, PartialEq)]
pub struct PffRecord {
    pub width: u32,
    pub height: u32,
    pub up_x: Vec<f32>,
    pub up_y: Vec<f32>,
    pub latitude: Vec<f32>,
    pub confidence: Option<Vec<f32>>,
    pub valid: Option<Vec<bool>>,
}

impl PffRecord {
    pub fn from_field(field: &PerspectiveField) -> Self {
        Self {
            width: field.width,
            height: field.height,
            up_x: field.up.iter().map(|u| u.x as f32).collect(),
            up_y: field.up.iter().map(|u| u.y as f32).collect(),
            latitude: field.latitude.iter().map(|&l| l as f32).collect(),
            confidence: field.confidence.as_ref().map(|c| c.iter().map(|&v| v as f32).collect()),
            valid: Some(field.valid.clone()),
        }
    }

    /// Attaches the record to an image of the given size. The grid stride is
    /// the smallest one (with the default offset) that yields the record's
    /// dimensions.
    pub fn into_field(self, image_width: u32, image_height: u32) -> Result<PerspectiveField, IoError> {
        let grid = (1..=image_width.max(image_height))
            .map(GridSpec::new)
            .find(|g| g.dims(image_width, image_height) == (self.width, self.height))
            .ok_or_else(|| {
                IoError::Invalid(format!(
                    "no sampling grid maps a {}x{} image to {}x{} samples",
                    image_width, image_height, self.width, self.height
                ))
            })?;
        let n = self.latitude.len();
        let field = PerspectiveField {
            image_width,
            image_height,
            grid,
            width: self.width,
            height: self.height,
            up: self
                .up_x
                .iter()
                .zip(&self.up_y)
                .map(|(&x, &y)| Vector2::new(x as f64, y as f64))
                .collect(),
            latitude: self
                .latitude
                .iter()
                .map(|&l| (l as f64).clamp(-FRAC_PI_2, FRAC_PI_2))
                .collect(),
            confidence: self.confidence.map(|c| c.into_iter().map(f64::from).collect()),
            valid: self.valid.unwrap_or_else(|| vec![true; n]),
        };
        field.validate().map_err(|e| IoError::Invalid(e.to_string()))?;
        Ok(field)
    }

    fn flags(&self) -> u32 {
        let mut f = FLAG_UP | FLAG_LATITUDE;
        if self.confidence.is_some() {
            f |= FLAG_CONFIDENCE;
        }
        if self.valid.is_some() {
            f |= FLAG_VALIDITY;
        }
        f
    }
}

pub fn write_pff<W: Write>(mut w: W, rec: &PffRecord) -> Result<(), IoError> {
    let n = (rec.width * rec.height) as usize;
    let lens = [rec.up_x.len(), rec.up_y.len(), rec.latitude.len()];
    if lens.iter().any(|&l| l != n)
        || rec.confidence.as_ref().is_some_and(|c| c.len() != n)
        || rec.valid.as_ref().is_some_and(|v| v.len() != n)
    {
        return Err(IoError::Invalid("plane length does not match width x height".into()));
    }
    w.write_all(&PFF_MAGIC)?;
    for v in [PFF_VERSION, rec.height, rec.width, rec.flags()] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut plane = |values: &mut dyn Iterator<Item = f32>| -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(4 * n);
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    };
    plane(&mut rec.up_x.iter().copied())?;
    plane(&mut rec.up_y.iter().copied())?;
    plane(&mut rec.latitude.iter().copied())?;
    if let Some(c) = &rec.confidence {
        plane(&mut c.iter().copied())?;
    }
    if let Some(v) = &rec.valid {
        plane(&mut v.iter().map(|&b| if b { 1.0 } else { 0.0 }))?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, IoError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), IoError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => IoError::Truncated,
        _ => IoError::Io(e),
    })
}

fn read_plane<R: Read>(r: &mut R, n: usize, name: &'static str, mandatory: bool) -> Result<Vec<f32>, IoError> {
    let mut buf = vec![0u8; 4 * n];
    read_exact(r, &mut buf)?;
    let values: Vec<f32> = buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    if mandatory {
        if let Some(index) = values.iter().position(|v| v.is_nan()) {
            return Err(IoError::NaN { plane: name, index });
        }
    }
    Ok(values)
}

pub fn read_pff<R: Read>(mut r: R) -> Result<PffRecord, IoError> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if magic != PFF_MAGIC {
        return Err(IoError::Magic(magic));
    }
    let version = read_u32(&mut r)?;
    if version != PFF_VERSION {
        return Err(IoError::Version(version));
    }
    let height = read_u32(&mut r)?;
    let width = read_u32(&mut r)?;
    let flags = read_u32(&mut r)?;
    if flags & (FLAG_UP | FLAG_LATITUDE) != (FLAG_UP | FLAG_LATITUDE) || flags >> 4 != 0 {
        return Err(IoError::Flags(flags));
    }
    let n = (width as usize)
        .checked_mul(height as usize)
        .filter(|&n| n <= 1 << 28)
        .ok_or_else(|| IoError::Invalid(format!("implausible grid {width}x{height}")))?;
    let up_x = read_plane(&mut r, n, "up_x", true)?;
    let up_y = read_plane(&mut r, n, "up_y", true)?;
    let latitude = read_plane(&mut r, n, "latitude", true)?;
    let confidence = if flags & FLAG_CONFIDENCE != 0 {
        Some(read_plane(&mut r, n, "confidence", false)?)
    } else {
        None
    };
    let valid = if flags & FLAG_VALIDITY != 0 {
        let plane = read_plane(&mut r, n, "validity", true)?;
        Some(plane.into_iter().map(|v| v != 0.0).collect())
    } else {
        None
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(IoError::Trailing);
    }
    Ok(PffRecord {
        width,
        height,
        up_x,
        up_y,
        latitude,
        confidence,
        valid,
    })
}

pub fn write_pff_file(path: &Path, rec: &PffRecord) -> Result<(), IoError> {
    let file = File::create(path).map_err(file_error(path))?;
    write_pff(BufWriter::new(file), rec)
}

pub fn read_pff_file(path: &Path) -> Result<PffRecord, IoError> {
    let file = File::open(path).map_err(file_error(path))?;
    read_pff(BufReader::new(file))
}
