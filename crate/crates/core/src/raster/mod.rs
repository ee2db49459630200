//! Raster types shared by every solver stage.
//!
//! All math runs on [`ImagePlane`], a single-channel row-major `f64` raster.
//! Color images are three planes of identical size ([`ImageRgb`]). Intensities
//! live nominally in `[0, 1]`; reflectance may temporarily exceed 1.

mod hsv;
mod io;

pub use hsv::{hsv_to_rgb, hsv_to_rgb_pixel, rgb_to_hsv, rgb_to_hsv_pixel, HsvPlanes};
pub use io::{
    decode_image, load_image, quantize_u16, quantize_u8, save_image, save_image_16, save_plane,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster dimensions must be non-zero, got {height}x{width}")]
    EmptyDimensions { height: usize, width: usize },
    #[error("expected {expected} samples for the raster, got {actual}")]
    DataLength { expected: usize, actual: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("channel dimensions differ: {0:?}")]
    ChannelMismatch([(usize, usize); 3]),
    #[error("unsupported image format: {0}")]
    Unsupported(String),
    #[error("failed to decode image: {0}")]
    Decode(String),
    #[error("failed to encode image: {0}")]
    Encode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row/column address of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PixelCoord {
    pub row: usize,
    pub col: usize,
}

impl PixelCoord {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Chebyshev (king-move) distance between two coordinates.
    pub fn chebyshev(self, other: PixelCoord) -> usize {
        self.row
            .abs_diff(other.row)
            .max(self.col.abs_diff(other.col))
    }
}

/// Single-channel real-valued raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    /// Builds a plane from row-major samples, rejecting empty, mis-sized or
    /// non-finite input.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, RasterError> {
        if height == 0 || width == 0 {
            return Err(RasterError::EmptyDimensions { height, width });
        }
        if data.len() != height * width {
            return Err(RasterError::DataLength {
                expected: height * width,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(RasterError::NonFinite { index });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Constant plane. Panics on zero dimensions or a non-finite value.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "plane dimensions must be non-zero");
        assert!(value.is_finite(), "plane value must be finite");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    /// Builds a plane by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "plane dimensions must be non-zero");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    // Used internally where finiteness follows from the inputs.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn at(&self, coord: PixelCoord) -> f64 {
        self.get(coord.row, coord.col)
    }

    pub fn contains(&self, coord: PixelCoord) -> bool {
        coord.row < self.height && coord.col < self.width
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Element-wise combination of two planes of equal size.
    pub fn zip_map(&self, other: &ImagePlane, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dims(), other.dims(), "plane dimensions differ");
        Self::from_raw(
            self.height,
            self.width,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    pub fn add(&self, other: &ImagePlane) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ImagePlane) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Self {
        self.map(|v| v.clamp(lo, hi))
    }

    pub fn dot(&self, other: &ImagePlane) -> f64 {
        assert_eq!(self.dims(), other.dims(), "plane dimensions differ");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ImagePlane) -> f64 {
        assert_eq!(self.dims(), other.dims(), "plane dimensions differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Three-plane color raster (R, G, B).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    planes: [ImagePlane; 3],
}

impl ImageRgb {
    pub fn new(r: ImagePlane, g: ImagePlane, b: ImagePlane) -> Result<Self, RasterError> {
        if r.dims() != g.dims() || r.dims() != b.dims() {
            return Err(RasterError::ChannelMismatch([r.dims(), g.dims(), b.dims()]));
        }
        Ok(Self { planes: [r, g, b] })
    }

    pub fn from_planes(planes: [ImagePlane; 3]) -> Result<Self, RasterError> {
        let [r, g, b] = planes;
        Self::new(r, g, b)
    }

    /// Same plane in all three channels.
    pub fn gray(plane: ImagePlane) -> Self {
        Self {
            planes: [plane.clone(), plane.clone(), plane],
        }
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        Self {
            planes: rgb.map(|v| ImagePlane::filled(height, width, v)),
        }
    }

    /// Builds an image from a per-pixel closure returning `[r, g, b]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be non-zero");
        let n = height * width;
        let mut chans = [
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        ];
        for r in 0..height {
            for c in 0..width {
                let px = f(r, c);
                for k in 0..3 {
                    chans[k].push(px[k]);
                }
            }
        }
        Self {
            planes: chans.map(|d| ImagePlane::from_raw(height, width, d)),
        }
    }

    /// Decodes interleaved 8-bit RGBA (alpha ignored), as produced by a
    /// browser canvas.
    pub fn from_rgba8(width: usize, height: usize, rgba: &[u8]) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { height, width });
        }
        if rgba.len() != width * height * 4 {
            return Err(RasterError::DataLength {
                expected: width * height * 4,
                actual: rgba.len(),
            });
        }
        Ok(Self::from_fn(height, width, |r, c| {
            let i = (r * width + c) * 4;
            [
                rgba[i] as f64 / 255.0,
                rgba[i + 1] as f64 / 255.0,
                rgba[i + 2] as f64 / 255.0,
            ]
        }))
    }

    /// Interleaved 8-bit RGBA with opaque alpha, quantized by `round(v * 255)`.
    pub fn to_rgba8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * 4);
        for i in 0..self.len() {
            for p in &self.planes {
                out.push(quantize_u8(p.data[i]));
            }
            out.push(255);
        }
        out
    }

    pub fn height(&self) -> usize {
        self.planes[0].height
    }

    pub fn width(&self) -> usize {
        self.planes[0].width
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].dims()
    }

    /// Pixels per channel.
    pub fn len(&self) -> usize {
        self.planes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes[0].is_empty()
    }

    pub fn channel(&self, k: usize) -> &ImagePlane {
        &self.planes[k]
    }

    pub fn channels(&self) -> &[ImagePlane; 3] {
        &self.planes
    }

    pub fn into_channels(self) -> [ImagePlane; 3] {
        self.planes
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        [
            self.planes[0].get(row, col),
            self.planes[1].get(row, col),
            self.planes[2].get(row, col),
        ]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            planes: [
                self.planes[0].map(&f),
                self.planes[1].map(&f),
                self.planes[2].map(&f),
            ],
        }
    }

    /// Applies `f` to each channel independently.
    pub fn map_channels(&self, mut f: impl FnMut(&ImagePlane) -> ImagePlane) -> Self {
        let planes = [f(&self.planes[0]), f(&self.planes[1]), f(&self.planes[2])];
        assert!(
            planes.iter().all(|p| p.dims() == self.dims()),
            "channel map changed dimensions"
        );
        Self { planes }
    }

    pub fn try_map_channels<E>(
        &self,
        mut f: impl FnMut(&ImagePlane) -> Result<ImagePlane, E>,
    ) -> Result<Self, E> {
        let planes = [
            f(&self.planes[0])?,
            f(&self.planes[1])?,
            f(&self.planes[2])?,
        ];
        assert!(
            planes.iter().all(|p| p.dims() == self.dims()),
            "channel map changed dimensions"
        );
        Ok(Self { planes })
    }

    pub fn zip_map(&self, other: &ImageRgb, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            planes: [
                self.planes[0].zip_map(&other.planes[0], &f),
                self.planes[1].zip_map(&other.planes[1], &f),
                self.planes[2].zip_map(&other.planes[2], &f),
            ],
        }
    }

    /// Combines each channel with a shared single-channel plane.
    pub fn zip_plane(&self, plane: &ImagePlane, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            planes: [
                self.planes[0].zip_map(plane, &f),
                self.planes[1].zip_map(plane, &f),
                self.planes[2].zip_map(plane, &f),
            ],
        }
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Self {
        self.map(|v| v.clamp(lo, hi))
    }

    /// Frobenius norm over all three channels.
    pub fn norm(&self) -> f64 {
        self.planes
            .iter()
            .map(|p| p.data.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.planes.iter().map(ImagePlane::mean).sum::<f64>() / 3.0
    }

    pub fn max_abs_diff(&self, other: &ImageRgb) -> f64 {
        self.planes
            .iter()
            .zip(&other.planes)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub(crate) fn planes_mut(&mut self) -> &mut [ImagePlane; 3] {
        &mut self.planes
    }
}
