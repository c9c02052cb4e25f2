//! Imprint serialization: binary PGM (P5) plus a `key=value` sidecar.
//!
//! Pixels are written as 0 (empty) or 255 (set). The sidecar lives next to the
//! image with the extension replaced by `.meta`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::grid::GridImage;
use super::pose::Pose2;
use crate::error::{Error, Result};

pub fn encode_pgm(img: &GridImage) -> Vec<u8> {
    let n = img.side();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend(img.bits().iter().map(|&b| if b { 255u8 } else { 0u8 }));
    out
}

/// Parses a P5 image with maxval 255. Any nonzero sample counts as set.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, Vec<bool>)> {
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Image("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(Error::Image("not a binary PGM (P5) file".into()));
    }
    let parse = |s: String| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Image(format!("bad PGM header field {s:?}")))
    };
    let w = parse(token()?)?;
    let h = parse(token()?)?;
    let maxval = parse(token()?)?;
    if w != h || w == 0 {
        return Err(Error::Image(format!("imprints are square, got {w}x{h}")));
    }
    if maxval != 255 {
        return Err(Error::Image(format!("expected maxval 255, got {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = &bytes[pos + 1..];
    if data.len() != w * h {
        return Err(Error::Image(format!(
            "raster holds {} bytes, expected {}",
            data.len(),
            w * h
        )));
    }
    Ok((w, data.iter().map(|&b| b != 0).collect()))
}

pub fn encode_meta(img: &GridImage) -> String {
    let c = img.center();
    let mut s = String::new();
    let _ = writeln!(s, "side_px={}", img.side());
    let _ = writeln!(s, "resolution_m_per_px={}", img.resolution());
    let _ = writeln!(s, "center_x={}", c.x);
    let _ = writeln!(s, "center_y={}", c.y);
    let _ = writeln!(s, "center_theta={}", c.theta);
    s
}

/// Parses a sidecar into `(side, resolution, center)`.
pub fn decode_meta(text: &str) -> Result<(usize, f64, Pose2)> {
    let mut side = None;
    let mut res = None;
    let (mut x, mut y, mut th) = (None, None, None);
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Image(format!("bad metadata line {line:?}")))?;
        let num = || -> Result<f64> {
            v.trim()
                .parse()
                .map_err(|_| Error::Image(format!("bad value for {k}: {v:?}")))
        };
        match k.trim() {
            "side_px" => {
                side = Some(
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Image(format!("bad side_px {v:?}")))?,
                )
            }
            "resolution_m_per_px" => res = Some(num()?),
            "center_x" => x = Some(num()?),
            "center_y" => y = Some(num()?),
            "center_theta" => th = Some(num()?),
            other => return Err(Error::Image(format!("unknown metadata key {other:?}"))),
        }
    }
    let missing = |name: &str| Error::Image(format!("metadata is missing {name}"));
    let center = Pose2 {
        x: x.ok_or_else(|| missing("center_x"))?,
        y: y.ok_or_else(|| missing("center_y"))?,
        theta: th.ok_or_else(|| missing("center_theta"))?,
    };
    Ok((
        side.ok_or_else(|| missing("side_px"))?,
        res.ok_or_else(|| missing("resolution_m_per_px"))?,
        center,
    ))
}

pub fn meta_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("meta")
}

pub fn save_imprint(img: &GridImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pgm(img))?;
    std::fs::write(meta_path(path), encode_meta(img))?;
    Ok(())
}

pub fn load_imprint(path: &Path) -> Result<GridImage> {
    let (side, bits) = decode_pgm(&std::fs::read(path)?)?;
    let (meta_side, res, center) = decode_meta(&std::fs::read_to_string(meta_path(path))?)?;
    if meta_side != side {
        return Err(Error::Image(format!(
            "sidecar says {meta_side} px, image has {side} px"
        )));
    }
    GridImage::from_bits(side, res, center, bits)
}
