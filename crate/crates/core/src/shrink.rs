/// Soft shrinkage `η(x, c) = sign(x) · max(|x| − c, 0)`.
///
/// The proximal operator of `c·|x|`. `η(0, c)` is 0 for every `c`.
#[inline]
pub fn soft_shrink(x: f64, c: f64) -> f64 {
    let mag = x.abs() - c;
    if mag > 0.0 {
        x.signum() * mag
    } else {
        0.0
    }
}
