use super::{ImagePlane, ImageRgb};

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvPlanes {
    pub h: ImagePlane,
    pub s: ImagePlane,
    pub v: ImagePlane,
}

/// Hexcone RGB to HSV for one pixel. Achromatic pixels get hue 0.
pub fn rgb_to_hsv_pixel([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let h = if h >= 360.0 { h - 360.0 } else { h };
    [h, s, max]
}

pub fn hsv_to_rgb_pixel([h, s, v]: [f64; 3]) -> [f64; 3] {
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r + m, g + m, b + m]
}

pub fn rgb_to_hsv(img: &ImageRgb) -> HsvPlanes {
    let (h, w) = img.dims();
    let n = img.len();
    let (mut hh, mut ss, mut vv) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let [r, g, b] = img.channels();
    for i in 0..n {
        let [a, s, v] = rgb_to_hsv_pixel([r.data()[i], g.data()[i], b.data()[i]]);
        hh.push(a);
        ss.push(s);
        vv.push(v);
    }
    HsvPlanes {
        h: ImagePlane::from_raw(h, w, hh),
        s: ImagePlane::from_raw(h, w, ss),
        v: ImagePlane::from_raw(h, w, vv),
    }
}

pub fn hsv_to_rgb(hsv: &HsvPlanes) -> ImageRgb {
    let (h, w) = hsv.v.dims();
    ImageRgb::from_fn(h, w, |r, c| {
        hsv_to_rgb_pixel([hsv.h.get(r, c), hsv.s.get(r, c), hsv.v.get(r, c)])
    })
}
