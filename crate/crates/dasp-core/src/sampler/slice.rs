//! Univariate slice sampler with stepping out and shrinkage (Neal 2003),
//! operating on log-density targets.

use rand::Rng;

/// One slice sampling transition from `x0` under log target `log_f`.
///
/// `log_f` may return -inf outside the support; `log_f(x0)` must be finite.
/// `max_steps` caps the stepping-out expansion on each side.
pub fn slice_sample_log<F, R>(x0: f64, mut log_f: F, width: f64, max_steps: u32, rng: &mut R) -> f64
where
    F: FnMut(f64) -> f64,
    R: Rng,
{
    let f0 = log_f(x0);
    debug_assert!(f0.is_finite(), "slice sampler started outside support");
    let y = f0 + rng.gen::<f64>().ln();

    // Step 2: stepping out.
    let mut left = x0 - rng.gen::<f64>() * width;
    let mut right = left + width;
    let mut j = (rng.gen::<f64>() * max_steps as f64).floor() as u32;
    let mut k = max_steps.saturating_sub(1 + j);
    while j > 0 && y < log_f(left) {
        left -= width;
        j -= 1;
    }
    while k > 0 && y < log_f(right) {
        right += width;
        k -= 1;
    }

    // Step 3: shrinkage.
    for _ in 0..200 {
        let x1 = left + rng.gen::<f64>() * (right - left);
        if y < log_f(x1) {
            return x1;
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
    }
    // Interval collapsed onto the current point.
    x0
}
