use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma, Rgb};

use super::{ImagePlane, ImageRgb, RasterError};

/// Quantizes a `[0, 1]` intensity to a byte: clamp, then `round(v * 255)`.
#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 16-bit counterpart of [`quantize_u8`].
#[inline]
pub fn quantize_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn map_image_error(err: image::ImageError) -> RasterError {
    match err {
        image::ImageError::IoError(e) => RasterError::Io(e),
        image::ImageError::Unsupported(e) => RasterError::Unsupported(e.to_string()),
        other => RasterError::Decode(other.to_string()),
    }
}

/// Loads an 8- or 16-bit PNG or a binary PPM/PGM as `[0, 1]` RGB.
///
/// Values are divided by the format's maximum code value. Grayscale input is
/// replicated to three channels and any alpha channel is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRgb, RasterError> {
    let reader = ImageReader::open(path.as_ref())?
        .with_guessed_format()
        .map_err(RasterError::Io)?;
    check_format(reader.format())?;
    let img = reader.decode().map_err(map_image_error)?;
    from_dynamic(img)
}

/// In-memory variant of [`load_image`].
pub fn decode_image(bytes: &[u8]) -> Result<ImageRgb, RasterError> {
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(RasterError::Io)?;
    check_format(reader.format())?;
    let img = reader.decode().map_err(map_image_error)?;
    from_dynamic(img)
}

fn check_format(format: Option<ImageFormat>) -> Result<(), RasterError> {
    match format {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => Ok(()),
        Some(other) => Err(RasterError::Unsupported(format!("{other:?}"))),
        None => Err(RasterError::Unsupported(
            "unrecognized file signature".into(),
        )),
    }
}

fn from_dynamic(img: DynamicImage) -> Result<ImageRgb, RasterError> {
    let (width, height) = (img.width() as usize, img.height() as usize);
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyDimensions { height, width });
    }
    let wide = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    if wide {
        let buf = img.to_rgb16();
        let raw = buf.as_raw();
        Ok(ImageRgb::from_fn(height, width, |r, c| {
            let i = (r * width + c) * 3;
            [
                raw[i] as f64 / 65535.0,
                raw[i + 1] as f64 / 65535.0,
                raw[i + 2] as f64 / 65535.0,
            ]
        }))
    } else {
        let buf = img.to_rgb8();
        let raw = buf.as_raw();
        Ok(ImageRgb::from_fn(height, width, |r, c| {
            let i = (r * width + c) * 3;
            [
                raw[i] as f64 / 255.0,
                raw[i + 1] as f64 / 255.0,
                raw[i + 2] as f64 / 255.0,
            ]
        }))
    }
}

fn interleave<T>(img: &ImageRgb, q: impl Fn(f64) -> T) -> Vec<T> {
    let [r, g, b] = img.channels();
    let mut out = Vec::with_capacity(img.len() * 3);
    for i in 0..img.len() {
        out.push(q(r.data()[i]));
        out.push(q(g.data()[i]));
        out.push(q(b.data()[i]));
    }
    out
}

/// Writes an 8-bit RGB PNG. Values are clamped to `[0, 1]` and quantized by
/// `round(v * 255)`.
pub fn save_image(img: &ImageRgb, path: impl AsRef<Path>) -> Result<(), RasterError> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_raw(
        img.width() as u32,
        img.height() as u32,
        interleave(img, quantize_u8),
    )
    .expect("buffer sized from image dimensions");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => RasterError::Io(io),
            other => RasterError::Encode(other.to_string()),
        })
}

/// Writes a 16-bit RGB PNG (quantized by `round(v * 65535)`).
pub fn save_image_16(img: &ImageRgb, path: impl AsRef<Path>) -> Result<(), RasterError> {
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::from_raw(
        img.width() as u32,
        img.height() as u32,
        interleave(img, quantize_u16),
    )
    .expect("buffer sized from image dimensions");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => RasterError::Io(io),
            other => RasterError::Encode(other.to_string()),
        })
}

/// Writes a single plane as an 8-bit grayscale PNG.
pub fn save_plane(plane: &ImagePlane, path: impl AsRef<Path>) -> Result<(), RasterError> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(
        plane.width() as u32,
        plane.height() as u32,
        plane.data().iter().map(|&v| quantize_u8(v)).collect(),
    )
    .expect("buffer sized from plane dimensions");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => RasterError::Io(io),
            other => RasterError::Encode(other.to_string()),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png8(path: &Path, w: u32, h: u32, data: Vec<u8>) {
        let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_raw(w, h, data).unwrap();
        buf.save_with_format(path, ImageFormat::Png).unwrap();
    }

    #[test]
    fn quantization_rule() {
        assert_eq!(quantize_u8(1.2), 255);
        assert_eq!(quantize_u8(0.5), 128);
        assert_eq!(quantize_u8(-0.1), 0);
        assert_eq!(quantize_u16(1.0), 65535);
    }

    #[test]
    fn load_single_pixel_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("px.png");
        write_png8(&path, 1, 1, vec![255, 0, 128]);
        let img = load_image(&path).unwrap();
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 128.0 / 255.0]);
    }

    #[test]
    fn load_black_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("black.png");
        write_png8(&path, 2, 2, vec![0; 12]);
        let img = load_image(&path).unwrap();
        assert_eq!(img.dims(), (2, 2));
        assert!(img.channels().iter().all(|p| p.max() == 0.0));
    }

    #[test]
    fn sixteen_bit_full_scale_is_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w16.png");
        let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
            ImageBuffer::from_raw(1, 2, vec![65535, 0, 32768, 1, 2, 3]).unwrap();
        buf.save_with_format(&path, ImageFormat::Png).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.pixel(0, 0)[0], 1.0);
        assert_eq!(img.pixel(0, 0)[2], 32768.0 / 65535.0);
        assert_eq!(img.pixel(1, 0)[0], 1.0 / 65535.0);
    }

    #[test]
    fn grayscale_is_replicated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(2, 1, vec![51, 204]).unwrap();
        buf.save_with_format(&path, ImageFormat::Png).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.pixel(0, 1), [0.8, 0.8, 0.8]);
    }

    #[test]
    fn binary_ppm_is_supported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ppm");
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 0, 255]);
        std::fs::write(&path, bytes).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 0.0]);
        assert_eq!(img.pixel(0, 1), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn rejects_unknown_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        std::fs::write(&path, b"definitely not an image").unwrap();
        assert!(matches!(
            load_image(&path),
            Err(RasterError::Unsupported(_))
        ));
        assert!(matches!(
            load_image(dir.path().join("missing.png")),
            Err(RasterError::Io(_))
        ));
    }

    #[test]
    fn save_clamps_and_rounds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.png");
        let img = ImageRgb::new(
            ImagePlane::new(1, 1, vec![1.2]).unwrap(),
            ImagePlane::new(1, 1, vec![0.5]).unwrap(),
            ImagePlane::new(1, 1, vec![-0.1]).unwrap(),
        )
        .unwrap();
        save_image(&img, &path).unwrap();
        let raw = image::open(&path).unwrap().to_rgb8().into_raw();
        assert_eq!(raw, vec![255, 128, 0]);
    }

    #[test]
    fn png_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.png");
        let b = dir.path().join("b.png");
        let data: Vec<u8> = (0..5 * 7 * 3).map(|i| (i * 37 % 256) as u8).collect();
        write_png8(&a, 7, 5, data.clone());
        let img = load_image(&a).unwrap();
        save_image(&img, &b).unwrap();
        let back = image::open(&b).unwrap().to_rgb8().into_raw();
        assert_eq!(back, data);
    }
}
