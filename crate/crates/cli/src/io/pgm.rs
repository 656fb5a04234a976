use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// ASCII raster.
    P2,
    /// Binary raster, one byte per sample below maxval 256 and two
    /// big-endian bytes otherwise.
    P5,
}

/// Grayscale image. A parsed P5 file keeps its header and any trailing
/// bytes verbatim so that writing it back reproduces the file exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub format: PgmFormat,
    /// Row-major samples.
    pub pixels: Vec<u16>,
    raw_header: Option<Vec<u8>>,
    raw_trailer: Vec<u8>,
}

impl PgmImage {
    pub fn new(width: usize, height: usize, maxval: u16, format: PgmFormat, pixels: Vec<u16>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel count must match dimensions");
        assert!(maxval > 0, "maxval must be positive");
        PgmImage {
            width,
            height,
            maxval,
            format,
            pixels,
            raw_header: None,
            raw_trailer: Vec::new(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.pixels[row * self.width + col]
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = match &self.raw_header {
            Some(h) => h.clone(),
            None => {
                let magic = if self.format == PgmFormat::P5 { "P5" } else { "P2" };
                format!("{magic}\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes()
            }
        };
        match self.format {
            PgmFormat::P5 => {
                for &v in &self.pixels {
                    if self.maxval < 256 {
                        out.push(v as u8);
                    } else {
                        out.extend_from_slice(&v.to_be_bytes());
                    }
                }
                out.extend_from_slice(&self.raw_trailer);
            }
            PgmFormat::P2 => {
                for row in self.pixels.chunks(self.width.max(1)) {
                    let line: Vec<String> = row.iter().map(u16::to_string).collect();
                    out.extend_from_slice(line.join(" ").as_bytes());
                    out.push(b'\n');
                }
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.encode()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::decode(&bytes).map_err(|(line, msg)| CliError::at_line(path, line, msg))
    }

    /// Parses a P2 or P5 file. Errors carry the 1-based line they occur on.
    pub fn decode(bytes: &[u8]) -> Result<Self, (u64, String)> {
        let mut lexer = Lexer { bytes, pos: 0, line: 1 };
        let magic = lexer.token().ok_or((1, "empty file".to_string()))?;
        let format = match magic {
            b"P2" => PgmFormat::P2,
            b"P5" => PgmFormat::P5,
            _ => return Err((1, "not a P2 or P5 graymap".into())),
        };
        let width = lexer.number("width")?;
        let height = lexer.number("height")?;
        let maxval = lexer.number("maxval")?;
        if width == 0 || height == 0 {
            return Err((lexer.line, "image has no pixels".into()));
        }
        if maxval == 0 || maxval > 65535 {
            return Err((lexer.line, format!("maxval {maxval} outside 1..=65535")));
        }
        let maxval = maxval as u16;
        let count = width
            .checked_mul(height)
            .filter(|c| *c <= 1 << 28)
            .ok_or((lexer.line, "image too large".to_string()))?;
        match format {
            PgmFormat::P5 => {
                // exactly one whitespace byte separates the header from the raster
                match bytes.get(lexer.pos) {
                    Some(b) if b.is_ascii_whitespace() => lexer.pos += 1,
                    _ => return Err((lexer.line, "missing whitespace after maxval".into())),
                }
                let header = bytes[..lexer.pos].to_vec();
                let width_bytes = if maxval < 256 { 1 } else { 2 };
                let raster = &bytes[lexer.pos..];
                if raster.len() < count * width_bytes {
                    return Err((lexer.line, format!("raster holds {} bytes, need {}", raster.len(), count * width_bytes)));
                }
                let mut pixels = Vec::with_capacity(count);
                for k in 0..count {
                    let v = if width_bytes == 1 {
                        raster[k] as u16
                    } else {
                        u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]])
                    };
                    if v > maxval {
                        return Err((lexer.line, format!("sample {k} = {v} exceeds maxval {maxval}")));
                    }
                    pixels.push(v);
                }
                Ok(PgmImage {
                    width,
                    height,
                    maxval,
                    format,
                    pixels,
                    raw_header: Some(header),
                    raw_trailer: raster[count * width_bytes..].to_vec(),
                })
            }
            PgmFormat::P2 => {
                let mut pixels = Vec::with_capacity(count);
                for _ in 0..count {
                    let line = lexer.peek_line();
                    let v = lexer.number("sample")?;
                    if v > maxval as usize {
                        return Err((line, format!("sample {v} exceeds maxval {maxval}")));
                    }
                    pixels.push(v as u16);
                }
                if let Some(tok) = lexer.token() {
                    return Err((lexer.line, format!("unexpected data after raster: {:?}", String::from_utf8_lossy(tok))));
                }
                Ok(PgmImage::new(width, height, maxval, format, pixels))
            }
        }
    }
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: u64,
}

impl<'a> Lexer<'a> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                if b == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek_line(&mut self) -> u64 {
        self.skip_space();
        self.line
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize, (u64, String)> {
        let tok = self.token().ok_or((self.line, format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse().ok())
            .ok_or((self.line, format!("bad {what}: {:?}", String::from_utf8_lossy(tok))))
    }
}
