//! Image and depth-map files.
//!
//! Color images are 8-bit RGB PNG; values are mapped to `[0, 1]` by
//! `v / 255` on read and written as `round(clamp(v, 0, 1) * 255)`.
//!
//! Depth maps are single-channel PFM:
//!
//! ```text
//! Pf\n
//! <width> <height>\n
//! -1.0\n
//! <width * height little-endian f32, bottom row first>
//! ```
//!
//! A negative scale marks little-endian data; positive scales are read as
//! big-endian. Misses are stored as `+inf`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use image::{ImageBuffer, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::grid::Grid;

pub fn to_rgb8(img: &Grid) -> Result<RgbImage> {
    if img.channels() != 3 {
        return Err(Error::mismatch("3 channels", img.channels()));
    }
    let buf: Vec<u8> = img.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    Ok(ImageBuffer::<Rgb<u8>, _>::from_raw(img.width() as u32, img.height() as u32, buf)
        .expect("buffer sized to image"))
}

pub fn from_rgb8(img: &RgbImage) -> Result<Grid> {
    let data = img.as_raw().iter().map(|&b| b as f64 / 255.0).collect();
    Grid::from_vec(img.width() as usize, img.height() as usize, 3, data)
}

/// PNG-encoded bytes of a 3-channel image.
pub fn encode_png(img: &Grid) -> Result<Vec<u8>> {
    let rgb = to_rgb8(img)?;
    let mut out = std::io::Cursor::new(Vec::new());
    rgb.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn write_png(path: impl AsRef<Path>, img: &Grid) -> Result<()> {
    fs::write(path, encode_png(img)?)?;
    Ok(())
}

pub fn read_png(path: impl AsRef<Path>) -> Result<Grid> {
    let img = image::open(path)?.to_rgb8();
    from_rgb8(&img)
}

pub fn write_pfm(path: impl AsRef<Path>, depth: &Grid) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write_pfm_to(&mut f, depth)?;
    f.flush()?;
    Ok(())
}

pub fn write_pfm_to(out: &mut impl Write, depth: &Grid) -> Result<()> {
    if depth.channels() != 1 {
        return Err(Error::mismatch("1 channel", depth.channels()));
    }
    write!(out, "Pf\n{} {}\n-1.0\n", depth.width(), depth.height())?;
    for y in (0..depth.height()).rev() {
        for x in 0..depth.width() {
            out.write_all(&(depth.texel(x, y)[0] as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Grid> {
    let f = fs::File::open(path)?;
    read_pfm_from(&mut BufReader::new(f))
}

pub fn read_pfm_from(input: &mut impl BufRead) -> Result<Grid> {
    let bad = |msg: String| Error::Parse { location: "pfm header".into(), message: msg };
    let mut line = String::new();
    input.read_line(&mut line)?;
    let channels = match line.trim() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(bad(format!("unknown magic '{other}'"))),
    };
    line.clear();
    input.read_line(&mut line)?;
    let dims: Vec<usize> = line
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| bad(format!("bad dimension '{s}'"))))
        .collect::<Result<_>>()?;
    let [w, h] = dims[..] else {
        return Err(bad(format!("expected 'width height', got '{}'", line.trim())));
    };
    line.clear();
    input.read_line(&mut line)?;
    let scale: f64 = line.trim().parse().map_err(|_| bad(format!("bad scale '{}'", line.trim())))?;
    if scale == 0.0 {
        return Err(bad("scale must be non-zero".into()));
    }
    let little = scale < 0.0;
    let mut raw = vec![0u8; w * h * channels * 4];
    input.read_exact(&mut raw)?;
    let mut grid = Grid::new(w, h, channels)?;
    let mut chunks = raw.chunks_exact(4);
    for y in (0..h).rev() {
        for x in 0..w {
            for c in 0..channels {
                let b: [u8; 4] = chunks.next().unwrap().try_into().unwrap();
                let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
                grid.texel_mut(x, y)[c] = v as f64;
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_layout_is_bottom_up_little_endian() {
        let g = Grid::from_vec(2, 2, 1, vec![1.0, 2.0, 3.0, f64::INFINITY]).unwrap();
        let mut buf = Vec::new();
        write_pfm_to(&mut buf, &g).unwrap();
        let header = b"Pf\n2 2\n-1.0\n";
        assert_eq!(&buf[..header.len()], header);
        let body = &buf[header.len()..];
        assert_eq!(&body[..4], &3.0f32.to_le_bytes());
        assert_eq!(&body[4..8], &f32::INFINITY.to_le_bytes());
        assert_eq!(&body[8..12], &1.0f32.to_le_bytes());
        let back = read_pfm_from(&mut &buf[..]).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn pfm_big_endian_and_errors() {
        let mut buf = b"Pf\n1 1\n1.0\n".to_vec();
        buf.extend_from_slice(&2.5f32.to_be_bytes());
        assert_eq!(read_pfm_from(&mut &buf[..]).unwrap().data(), &[2.5]);
        assert!(read_pfm_from(&mut &b"P6\n1 1\n-1\n"[..]).is_err());
        assert!(read_pfm_from(&mut &b"Pf\n1\n-1\n"[..]).is_err());
        assert!(read_pfm_from(&mut &b"Pf\n1 1\n-1\n\x00"[..]).is_err());
    }

    #[test]
    fn png_quantizes() {
        let g = Grid::from_vec(2, 1, 3, vec![0.0, 0.5, 1.0, -0.2, 1.7, 0.25]).unwrap();
        let rgb = to_rgb8(&g).unwrap();
        assert_eq!(rgb.as_raw(), &[0, 128, 255, 0, 255, 64]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        write_png(&p, &g).unwrap();
        let back = read_png(&p).unwrap();
        assert_eq!(back.texel(0, 0), &[0.0, 128.0 / 255.0, 1.0]);
    }
}
