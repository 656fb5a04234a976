//! `gen`: seeded synthetic datasets.

use std::path::Path;

use clap::{Args, ValueEnum};

use super::Common;
use crate::error::{CliError, CliResult};
use crate::gen::{blocks_image, plus_image, regression, ImageData};
use crate::io::{self, PgmFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Regression,
    PlusImage,
    BlocksImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    P2,
    P5,
}

#[derive(Debug, Args, Clone)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    /// Pairwise predictor correlation in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 3.0)]
    pub snr: f64,
    /// Image side length.
    #[arg(long, default_value_t = 64)]
    pub side: usize,
    /// Noise standard deviation for images.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Rectangles in the blocks image.
    #[arg(long, default_value_t = 6)]
    pub blocks: usize,
    #[arg(long, default_value_t = 65535)]
    pub maxval: u16,
    #[arg(long, value_enum, default_value_t = Format::P5)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

fn check(ok: bool, msg: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::input(msg))
    }
}

fn write_image(dir: &Path, name: &str, img: &ImageData, values: &[f64], args: &GenArgs) -> CliResult<()> {
    let format = match args.format {
        Format::P2 => PgmFormat::P2,
        Format::P5 => PgmFormat::P5,
    };
    let (pgm, meta) = io::quantize(values, img.height, img.width, args.maxval, format, None);
    let path = dir.join(format!("{name}.pgm"));
    pgm.write(&path)?;
    io::write_json(&io::sidecar_path(&path), &meta)
}

pub fn gen(args: &GenArgs) -> CliResult<()> {
    let seed = args.common.seed.ok_or_else(|| CliError::input("gen needs --seed"))?;
    let dir = args
        .common
        .output
        .as_deref()
        .ok_or_else(|| CliError::input("gen needs --output (a directory)"))?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    match args.kind {
        Kind::Regression => {
            check(args.n >= 2 && args.p >= 1, "need n >= 2 and p >= 1")?;
            check((0.0..1.0).contains(&args.rho), "rho must lie in [0, 1)")?;
            check(args.snr > 0.0 && args.snr.is_finite(), "snr must be positive")?;
            let d = regression(args.n, args.p, args.rho, args.snr, seed);
            io::write_matrix(&dir.join("x.csv"), &d.x)?;
            io::write_vector(&dir.join("y.csv"), &d.y)?;
            io::write_vector(&dir.join("beta.csv"), &d.beta)?;
        }
        Kind::PlusImage | Kind::BlocksImage => {
            check(args.side >= 1, "side must be positive")?;
            check(args.sigma >= 0.0 && args.sigma.is_finite(), "sigma must be finite and >= 0")?;
            check(args.maxval >= 1, "maxval must be positive")?;
            let img = match args.kind {
                Kind::PlusImage => plus_image(args.side, args.sigma, seed),
                _ => blocks_image(args.side, args.blocks, args.sigma, seed)
                    .ok_or_else(|| CliError::input("blocks do not fit in the image"))?,
            };
            write_image(dir, "noisy", &img, &img.noisy, args)?;
            write_image(dir, "truth", &img, &img.truth, args)?;
            let rows: Vec<Vec<f64>> = img.truth.chunks(img.width).map(<[f64]>::to_vec).collect();
            io::write_matrix(&dir.join("truth.csv"), &rows)?;
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}
