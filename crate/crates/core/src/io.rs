//! File formats: binary field snapshots, cached kernel tables, 16-bit PGM
//! intensity images and fixed-precision CSV.
//!
//! Snapshot layout (little endian):
//!
//! ```text
//! 0..8    magic  b"SLABFLD\0"
//! 8..12   u32    format version
//! 12..16  u32    reserved, 0
//! 16..24  u32 nx, u32 ny
//! 24..48  f64 dx, f64 dy, f64 z
//! 48..    nx·ny × (f64 re, f64 im), row-major (x fastest)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid};
use crate::response::KernelTable;

pub const FIELD_MAGIC: &[u8; 8] = b"SLABFLD\0";
pub const KERNEL_MAGIC: &[u8; 8] = b"SLABKRN\0";
pub const FORMAT_VERSION: u32 = 1;

fn header(magic: &[u8; 8]) -> [u8; 16] {
    let mut h = [0u8; 16];
    h[..8].copy_from_slice(magic);
    h[8..12].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    h
}

fn check_header(bytes: &[u8; 16], magic: &[u8; 8], what: &str) -> Result<()> {
    if &bytes[..8] != magic {
        return Err(Error::Format(format!("not a {what} file (bad magic)")));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported {what} version {version}")));
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn write_field(w: &mut impl Write, field: &ComplexField) -> Result<()> {
    let g = &field.grid;
    w.write_all(&header(FIELD_MAGIC))?;
    w.write_all(&(g.nx as u32).to_le_bytes())?;
    w.write_all(&(g.ny as u32).to_le_bytes())?;
    for v in [g.dx, g.dy, field.z] {
        w.write_all(&v.to_le_bytes())?;
    }
    for u in &field.data {
        w.write_all(&u.re.to_le_bytes())?;
        w.write_all(&u.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field(r: &mut impl Read) -> Result<ComplexField> {
    let mut h = [0u8; 16];
    r.read_exact(&mut h)?;
    check_header(&h, FIELD_MAGIC, "field snapshot")?;
    let nx = read_u32(r)? as usize;
    let ny = read_u32(r)? as usize;
    let (dx, dy, z) = (read_f64(r)?, read_f64(r)?, read_f64(r)?);
    let grid = Grid::new(nx, ny, dx, dy).map_err(|e| Error::Format(format!("snapshot grid: {e}")))?;
    let mut data = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = read_f64(r)?;
        data.push(Complex64::new(re, read_f64(r)?));
    }
    ComplexField::from_data(grid, z, data)
}

pub fn save_field(path: &Path, field: &ComplexField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<ComplexField> {
    read_field(&mut BufReader::new(File::open(path)?))
}

/// Kernel tables: header, u32 n, f64 tail (re, im), then n × (f64 r, f64 re, f64 im).
pub fn write_kernel_table(w: &mut impl Write, table: &KernelTable) -> Result<()> {
    w.write_all(&header(KERNEL_MAGIC))?;
    w.write_all(&(table.len() as u32).to_le_bytes())?;
    w.write_all(&table.tail_coefficient.re.to_le_bytes())?;
    w.write_all(&table.tail_coefficient.im.to_le_bytes())?;
    for (r, v) in table.radii.iter().zip(&table.values) {
        for x in [*r, v.re, v.im] {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_kernel_table(r: &mut impl Read) -> Result<KernelTable> {
    let mut h = [0u8; 16];
    r.read_exact(&mut h)?;
    check_header(&h, KERNEL_MAGIC, "kernel table")?;
    let n = read_u32(r)? as usize;
    let tail = Complex64::new(read_f64(r)?, read_f64(r)?);
    let mut radii = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        radii.push(read_f64(r)?);
        let re = read_f64(r)?;
        values.push(Complex64::new(re, read_f64(r)?));
    }
    KernelTable::from_samples(radii, values, tail).map_err(|e| Error::Format(format!("kernel table: {e}")))
}

pub fn save_kernel_table(path: &Path, table: &KernelTable) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_kernel_table(&mut w, table)?;
    w.flush()?;
    Ok(())
}

pub fn load_kernel_table(path: &Path) -> Result<KernelTable> {
    read_kernel_table(&mut BufReader::new(File::open(path)?))
}

/// 16-bit binary PGM of |U|², scaled linearly so the maximum maps to 65535.
pub fn write_pgm(w: &mut impl Write, field: &ComplexField) -> Result<()> {
    let g = &field.grid;
    let intensity = field.intensity();
    let max = intensity.iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    write!(w, "P5\n{} {}\n65535\n", g.nx, g.ny)?;
    // PGM rows run top to bottom; put +y at the top.
    let mut row = Vec::with_capacity(2 * g.nx);
    for iy in (0..g.ny).rev() {
        row.clear();
        for ix in 0..g.nx {
            let v = (intensity[g.index(ix, iy)] * scale).round().clamp(0.0, 65535.0) as u16;
            row.extend_from_slice(&v.to_be_bytes());
        }
        w.write_all(&row)?;
    }
    Ok(())
}

pub fn save_pgm(path: &Path, field: &ComplexField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pgm(&mut w, field)?;
    w.flush()?;
    Ok(())
}

/// Filename stem carrying the propagation distance, e.g. `z_000400.000um`.
pub fn z_stem(z: f64) -> String {
    format!("z_{:010.3}um", z)
}

/// Float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Minimal CSV writer: header line, `,` separators, `\n` line endings.
pub struct CsvWriter<W: Write> {
    inner: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut inner: W, header: &[&str]) -> Result<Self> {
        writeln!(inner, "{}", header.join(","))?;
        Ok(CsvWriter { inner, columns: header.len() })
    }

    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        if cells.len() != self.columns {
            return Err(Error::Format(format!("csv row has {} cells, header has {}", cells.len(), self.columns)));
        }
        writeln!(self.inner, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn float_row(&mut self, values: &[f64]) -> Result<()> {
        let cells: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
        self.row(&cells)
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}
