use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Real;

/// Dilated local contrast measure of a single-channel feature map.
///
/// `f(y, x) = min over the four line directions (i, j) of (S − S₋)(S − S₊)`, where `S₋`/`S₊`
/// are the two neighbours at distance `d` along the direction. Out-of-range neighbours read 0.
/// Kept for comparison only; it is not used inside the trained network.
pub fn dlcm<T: Real>(feature: &Tensor<T>, d: usize) -> Result<Tensor<T>> {
    let (b, c, h, w) = feature.dims4()?;
    if b != 1 || c != 1 {
        return Err(Error::invalid("dlcm", "expects a single-channel [1,1,H,W] map"));
    }
    if d == 0 {
        return Err(Error::invalid("dlcm", "dilation must be >= 1"));
    }
    let d = d as isize;
    let dirs = [(d, d), (d, 0), (d, -d), (0, d)];
    let px = |y: isize, x: isize| -> T {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            T::zero()
        } else {
            feature.at(0, 0, y as usize, x as usize)
        }
    };
    Ok(Tensor::from_fn(&[1, 1, h, w], |i| {
        let (y, x) = (i[2] as isize, i[3] as isize);
        let s = px(y, x);
        dirs.iter()
            .map(|&(dy, dx)| (s - px(y - dy, x - dx)) * (s - px(y + dy, x + dx)))
            .fold(T::infinity(), T::min)
    }))
}
