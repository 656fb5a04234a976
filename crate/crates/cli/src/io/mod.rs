//! File formats: CSV tables, PGM graymaps with an affine metadata sidecar,
//! and line-delimited JSON records.

mod pgm;
mod table;

use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use pathwise::flsa2d::PixelGrid;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub use pgm::{PgmFormat, PgmImage};
pub use table::{read_matrix, read_vector, write_matrix, write_vector};

/// Affine map from samples to reals: `real = offset + scale · sample`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub scale: f64,
    pub offset: f64,
}

impl ImageMeta {
    pub fn identity(img: &PgmImage) -> Self {
        ImageMeta {
            width: img.width,
            height: img.height,
            maxval: img.maxval,
            scale: 1.0,
            offset: 0.0,
        }
    }

    pub fn real(&self, sample: u16) -> f64 {
        self.offset + self.scale * sample as f64
    }

    fn covers(&self, values: &[f64]) -> bool {
        let (lo, hi) = (self.offset, self.real(self.maxval));
        let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        values.iter().all(|&v| v >= lo - slack && v <= hi + slack)
    }
}

/// `noisy.pgm` → `noisy.meta.json`.
pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("meta.json")
}

/// `out.pgm` → `out.partition.jsonl`.
pub fn partition_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("partition.jsonl")
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::at_line(path, e.line() as u64, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Reads a graymap and its real-valued pixels. The mapping comes from
/// `meta` when given, else from the sidecar next to the image if present,
/// else samples are taken as reals.
pub fn read_image(path: &Path, meta: Option<&Path>) -> CliResult<(PgmImage, ImageMeta, PixelGrid)> {
    let img = PgmImage::read(path)?;
    let sidecar = sidecar_path(path);
    let meta = match meta {
        Some(m) => Some(read_json::<ImageMeta>(m)?),
        None if sidecar.exists() => Some(read_json::<ImageMeta>(&sidecar)?),
        None => None,
    };
    let meta = match meta {
        Some(m) => {
            if (m.width, m.height, m.maxval) != (img.width, img.height, img.maxval) {
                return Err(CliError::input(format!(
                    "{}: metadata describes a {}x{} image with maxval {}",
                    path.display(),
                    m.width,
                    m.height,
                    m.maxval
                )));
            }
            if !(m.scale > 0.0 && m.scale.is_finite() && m.offset.is_finite()) {
                return Err(CliError::input(format!("{}: invalid affine mapping", path.display())));
            }
            m
        }
        None => ImageMeta::identity(&img),
    };
    let values = img.pixels.iter().map(|&s| meta.real(s)).collect();
    let grid = PixelGrid::new(img.height, img.width, values)?;
    Ok((img, meta, grid))
}

/// Quantizes row-major reals to `maxval` levels. The `preferred` mapping is
/// kept when it spans every value; otherwise the range is rescaled to the
/// values' own minimum and maximum.
pub fn quantize(
    values: &[f64],
    height: usize,
    width: usize,
    maxval: u16,
    format: PgmFormat,
    preferred: Option<&ImageMeta>,
) -> (PgmImage, ImageMeta) {
    let meta = match preferred {
        Some(m) if m.maxval == maxval && m.covers(values) => m.clone(),
        _ => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let scale = if hi > lo { (hi - lo) / maxval as f64 } else { 1.0 };
            ImageMeta {
                width,
                height,
                maxval,
                scale,
                offset: lo,
            }
        }
    };
    let pixels = values
        .iter()
        .map(|&v| ((v - meta.offset) / meta.scale).round().clamp(0.0, maxval as f64) as u16)
        .collect();
    let meta = ImageMeta { width, height, ..meta };
    (PgmImage::new(width, height, maxval, format, pixels), meta)
}

/// Reads one JSON record per non-blank line, paired with its line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<(u64, T)>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line_no = k as u64 + 1;
        let line = line.map_err(|e| CliError::at_line(path, line_no, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CliError::at_line(path, line_no, e))?;
        out.push((line_no, record));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, &r).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_keeps_covering_mapping() {
        let meta = ImageMeta {
            width: 2,
            height: 1,
            maxval: 100,
            scale: 0.5,
            offset: -1.0,
        };
        let (img, out) = quantize(&[-1.0, 9.0], 1, 2, 100, PgmFormat::P5, Some(&meta));
        assert_eq!(out, meta);
        assert_eq!(img.pixels, vec![0, 20]);
        let (img, out) = quantize(&[-3.0, 9.0], 1, 2, 100, PgmFormat::P5, Some(&meta));
        assert_eq!(out.offset, -3.0);
        assert_eq!(img.pixels, vec![0, 100]);
    }

    #[test]
    fn image_reads_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let values = [0.25, -1.5, 3.0, 2.0];
        let (img, meta) = quantize(&values, 2, 2, 65535, PgmFormat::P5, None);
        img.write(&path).unwrap();
        write_json(&sidecar_path(&path), &meta).unwrap();
        let (_, read_meta, grid) = read_image(&path, None).unwrap();
        assert_eq!(read_meta, meta);
        for (a, b) in grid.values().iter().zip(values) {
            assert!((a - b).abs() <= meta.scale);
        }
    }
}
