use std::fs;
use std::io::Cursor;
use std::path::Path;

use super::{EncodedImage, CHANNELS};
use crate::error::{Error, Result};

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Png(e.to_string())
}

/// 8-bit RGB, no alpha, no interlacing.
pub fn to_png_bytes(image: &EncodedImage) -> Result<Vec<u8>> {
    let side = image.side() as u32;
    let mut out = Vec::with_capacity(image.pixels().len() + 128);
    {
        let mut enc = png::Encoder::new(&mut out, side, side);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(png_err)?;
        w.write_image_data(image.pixels()).map_err(png_err)?;
        w.finish().map_err(png_err)?;
    }
    Ok(out)
}

/// Decodes a PNG produced for a `side`×`side` layout. The returned image
/// has label 0 and source row 0; both live outside the pixels.
pub fn from_png_bytes(bytes: &[u8], side: usize) -> Result<EncodedImage> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info().map_err(png_err)?;
    let info = reader.info();
    if (info.width as usize, info.height as usize) != (side, side) {
        return Err(Error::Format(format!(
            "expected {side}x{side}, found {}x{}",
            info.width, info.height
        )));
    }
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "expected 8-bit RGB, found {:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let len = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("image too large".into()))?;
    let mut buf = vec![0; len];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(frame.buffer_size());
    if buf.len() != side * side * CHANNELS {
        return Err(Error::Format(format!(
            "unexpected buffer size {}",
            buf.len()
        )));
    }
    EncodedImage::from_pixels(side, buf)
}

pub fn render_png(image: &EncodedImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_png_bytes(image)?).map_err(|e| Error::io(path, e))
}

pub fn read_png(path: impl AsRef<Path>, side: usize) -> Result<EncodedImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_png_bytes(&bytes, side)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy(side: usize) -> EncodedImage {
        let pixels = (0..side * side * 3).map(|i| (i * 37 % 251) as u8).collect();
        EncodedImage::from_pixels(side, pixels).unwrap()
    }

    #[test]
    fn lossless_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = noisy(32);
        render_png(&img, &path).unwrap();
        let back = read_png(&path, 32).unwrap();
        assert_eq!(back.pixels(), img.pixels());
        assert_eq!(back.pixels().len(), 3072);
    }

    #[test]
    fn wrong_dimensions() {
        let bytes = to_png_bytes(&noisy(16)).unwrap();
        assert!(matches!(from_png_bytes(&bytes, 32), Err(Error::Format(_))));
    }

    #[test]
    fn grayscale_rejected() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 32, 32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[0u8; 1024]).unwrap();
        }
        assert!(matches!(from_png_bytes(&out, 32), Err(Error::Format(_))));
    }

    #[test]
    fn rgba_rejected() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 32, 32);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[0u8; 4096]).unwrap();
        }
        assert!(matches!(from_png_bytes(&out, 32), Err(Error::Format(_))));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            read_png("/nonexistent/x.png", 32),
            Err(Error::Io { .. })
        ));
    }
}
