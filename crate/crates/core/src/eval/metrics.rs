//! Full-reference metrics on 8-bit quantized values.

use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EvalError;
use crate::raster::{quantize_u8, ImagePlane, ImageRgb};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 255.0;

/// Serializes non-finite values as the strings `"inf"`, `"-inf"` and `"nan"`.
pub mod lenient_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// Formats a metric value for CSV; `+∞` is written as `inf`.
pub fn format_metric(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// dB; `+∞` iff `mse == 0`.
    #[serde(with = "lenient_f64")]
    pub psnr: f64,
    pub ssim: f64,
    /// Mean squared difference of 8-bit code values.
    pub mse: f64,
}

fn check_dims(a: &ImageRgb, b: &ImageRgb) -> Result<(), EvalError> {
    if a.dims() != b.dims() {
        return Err(EvalError::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

fn quantized(p: &ImagePlane) -> ImagePlane {
    p.map(|v| f64::from(quantize_u8(v)))
}

pub fn mse(a: &ImageRgb, b: &ImageRgb) -> Result<f64, EvalError> {
    check_dims(a, b)?;
    let mut sum = 0.0;
    for (pa, pb) in a.channels().iter().zip(b.channels()) {
        for (&x, &y) in pa.data().iter().zip(pb.data()) {
            let d = f64::from(quantize_u8(x)) - f64::from(quantize_u8(y));
            sum += d * d;
        }
    }
    Ok(sum / (3 * a.len()) as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (DYNAMIC_RANGE * DYNAMIC_RANGE / mse).log10()
    }
}

pub fn psnr(a: &ImageRgb, b: &ImageRgb) -> Result<f64, EvalError> {
    mse(a, b).map(psnr_from_mse)
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let centre = (size as f64 - 1.0) / 2.0;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - centre;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Separable "valid" correlation: output is `(h − k + 1) × (w − k + 1)`.
fn filter_valid(p: &ImagePlane, taps: &[f64]) -> ImagePlane {
    let k = taps.len();
    let (h, w) = p.dims();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let data = p.data();
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * data[r * w + c + i])
                .sum();
        }
    }
    ImagePlane::from_fn(oh, ow, |r, c| {
        taps.iter()
            .enumerate()
            .map(|(i, t)| t * rows[(r + i) * ow + c])
            .sum()
    })
}

fn ssim_plane(a: &ImagePlane, b: &ImagePlane, taps: &[f64]) -> f64 {
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let mu_a = filter_valid(a, taps);
    let mu_b = filter_valid(b, taps);
    let aa = filter_valid(&a.zip_map(a, |x, y| x * y), taps);
    let bb = filter_valid(&b.zip_map(b, |x, y| x * y), taps);
    let ab = filter_valid(&a.zip_map(b, |x, y| x * y), taps);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a.data()[i], mu_b.data()[i]);
        let va = aa.data()[i] - ma * ma;
        let vb = bb.data()[i] - mb * mb;
        let cov = ab.data()[i] - ma * mb;
        total +=
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total / n as f64
}

/// Mean single-scale SSIM over the three channels.
pub fn ssim(a: &ImageRgb, b: &ImageRgb) -> Result<f64, EvalError> {
    check_dims(a, b)?;
    let (h, w) = a.dims();
    if h.min(w) < SSIM_WINDOW {
        return Err(EvalError::TooSmall {
            height: h,
            width: w,
            window: SSIM_WINDOW,
        });
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let total: f64 = a
        .channels()
        .iter()
        .zip(b.channels())
        .map(|(pa, pb)| ssim_plane(&quantized(pa), &quantized(pb), &taps))
        .sum();
    Ok(total / 3.0)
}

pub fn evaluate(result: &ImageRgb, reference: &ImageRgb) -> Result<MetricReport, EvalError> {
    let mse = mse(result, reference)?;
    Ok(MetricReport {
        psnr: psnr_from_mse(mse),
        ssim: ssim(result, reference)?,
        mse,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    #[serde(with = "lenient_f64")]
    pub psnr: f64,
    #[serde(with = "lenient_f64")]
    pub ssim: f64,
    #[serde(with = "lenient_f64")]
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedReport {
    pub image: String,
    #[serde(flatten)]
    pub report: MetricReport,
}

/// Per-image reports with their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub images: Vec<NamedReport>,
    pub mean: MetricStats,
    pub std: MetricStats,
}

/// Sample mean and standard deviation (`n − 1` denominator, 0 for one
/// value). With any infinite value the mean is infinite and the deviation
/// is NaN, unless every value is the same infinity.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    if values.iter().any(|v| !v.is_finite()) {
        let first = values[0];
        let uniform = values.iter().all(|&v| v == first);
        let mean = values.iter().sum::<f64>() / n as f64;
        return (mean, if uniform { 0.0 } else { f64::NAN });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl MetricTable {
    pub fn new(images: Vec<NamedReport>) -> Self {
        let column = |f: fn(&MetricReport) -> f64| {
            let values: Vec<f64> = images.iter().map(|r| f(&r.report)).collect();
            mean_std(&values)
        };
        let (psnr_m, psnr_s) = column(|r| r.psnr);
        let (ssim_m, ssim_s) = column(|r| r.ssim);
        let (mse_m, mse_s) = column(|r| r.mse);
        Self {
            images,
            mean: MetricStats {
                psnr: psnr_m,
                ssim: ssim_m,
                mse: mse_m,
            },
            std: MetricStats {
                psnr: psnr_s,
                ssim: ssim_s,
                mse: mse_s,
            },
        }
    }

    /// `image,psnr,ssim,mse` rows followed by `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,psnr,ssim,mse\n");
        let mut row = |name: &str, p: f64, s: f64, m: f64| {
            let _ = writeln!(
                out,
                "{name},{},{},{}",
                format_metric(p),
                format_metric(s),
                format_metric(m)
            );
        };
        for r in &self.images {
            row(&r.image, r.report.psnr, r.report.ssim, r.report.mse);
        }
        row("mean", self.mean.psnr, self.mean.ssim, self.mean.mse);
        row("std", self.std.psnr, self.std.ssim, self.std.mse);
        out
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric table serializes")
    }
}
