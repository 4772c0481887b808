//! Flat binary container for fields and profiles, plus CSV dumps.
//!
//! Layout, all little-endian:
//!
//! | bytes        | content                          |
//! |--------------|----------------------------------|
//! | 4            | magic `ISOF`                     |
//! | 4            | `u32` format version (1)         |
//! | 4            | `u32` ndim                       |
//! | 8 · ndim     | `u64` sizes, row-major order     |
//! | 8 · ndim     | `f64` box half-widths            |
//! | 8            | `f64` ℏ (0 for profiles)         |
//! | 8 · Π sizes  | `f32` re, `f32` im per sample    |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use isoclass_core::grid::{Field, Grid};
use isoclass_core::states::Profile;
use isoclass_core::C64;

use crate::IoError;

pub const MAGIC: [u8; 4] = *b"ISOF";
pub const VERSION: u32 = 1;

/// Decoded container contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub sizes: Vec<usize>,
    pub half_widths: Vec<f64>,
    pub hbar: f64,
    pub values: Vec<C64>,
}

impl Container {
    pub fn from_field(f: &Field) -> Self {
        Self::from_grid(f.grid(), f.hbar(), f.values())
    }

    pub fn from_profile(p: &Profile) -> Self {
        Self::from_grid(&p.grid, 0.0, &p.values)
    }

    pub fn from_grid(g: &Grid, hbar: f64, values: &[C64]) -> Self {
        Self { sizes: g.sizes().to_vec(), half_widths: g.half_widths().to_vec(), hbar, values: values.to_vec() }
    }

    /// Rebuild a field; fails if the header does not describe a valid grid.
    pub fn to_field(&self) -> Result<Field, IoError> {
        let g = Grid::new(&self.half_widths, &self.sizes).map_err(|e| IoError::Format(e.to_string()))?;
        Field::new(g, self.hbar, self.values.clone()).map_err(|e| IoError::Format(e.to_string()))
    }

    pub fn encode(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.sizes.len() as u32).to_le_bytes())?;
        for &s in &self.sizes {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for &l in &self.half_widths {
            w.write_all(&l.to_le_bytes())?;
        }
        w.write_all(&self.hbar.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&(v.re as f32).to_le_bytes())?;
            w.write_all(&(v.im as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn decode(r: &mut impl Read) -> Result<Self, IoError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(IoError::Format(format!("bad magic {magic:?}")));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(IoError::Format(format!("unsupported version {version}")));
        }
        let ndim = read_u32(r)? as usize;
        if ndim == 0 || ndim > 16 {
            return Err(IoError::Format(format!("implausible ndim {ndim}")));
        }
        let mut sizes = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            sizes.push(read_u64(r)? as usize);
        }
        let half_widths = (0..ndim).map(|_| read_f64(r)).collect::<Result<Vec<_>, _>>()?;
        let hbar = read_f64(r)?;
        let len = sizes.iter().try_fold(1usize, |a, &s| a.checked_mul(s)).ok_or_else(|| IoError::Format("size overflow".into()))?;
        let mut buf = vec![0u8; len.checked_mul(8).ok_or_else(|| IoError::Format("size overflow".into()))?];
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                C64::new(re as f64, im as f64)
            })
            .collect();
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(IoError::Format("trailing bytes after payload".into()));
        }
        Ok(Self { sizes, half_widths, hbar, values })
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let f = File::create(path).map_err(|e| IoError::path(path, e))?;
        let mut w = BufWriter::new(f);
        self.encode(&mut w).map_err(|e| IoError::path(path, e))?;
        w.flush().map_err(|e| IoError::path(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let f = File::open(path).map_err(|e| IoError::path(path, e))?;
        Self::decode(&mut BufReader::new(f))
    }

    /// One row per sample: node coordinates, then re and im.
    pub fn write_csv(&self, path: &Path) -> Result<(), IoError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| IoError::csv(path, e))?;
        let n = self.sizes.len();
        let mut header: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
        header.push("re".into());
        header.push("im".into());
        w.write_record(&header).map_err(|e| IoError::csv(path, e))?;
        let mut idx = vec![0usize; n];
        for v in &self.values {
            let mut row: Vec<String> = (0..n)
                .map(|a| {
                    let l = self.half_widths[a];
                    (-l + idx[a] as f64 * 2.0 * l / self.sizes[a] as f64).to_string()
                })
                .collect();
            row.push(v.re.to_string());
            row.push(v.im.to_string());
            w.write_record(&row).map_err(|e| IoError::csv(path, e))?;
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < self.sizes[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        w.flush().map_err(|e| IoError::path(path, e))
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
