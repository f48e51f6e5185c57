//! Halton low-discrepancy point sets.

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Number of points used by the sampled demand route.
pub const DEFAULT_POINTS: usize = 1 << 17;

pub const MAX_DIM: usize = PRIMES.len();

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let base = base as u64;
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

/// Coordinate `dim` of Halton point `index`. Index 0 (the origin) is skipped
/// so every coordinate lies strictly inside `(0,1)`.
pub fn halton(index: u64, dim: usize) -> f64 {
    radical_inverse(index + 1, PRIMES[dim])
}

/// Fills `point` with the first `point.len()` coordinates of point `index`.
pub fn halton_point(index: u64, point: &mut [f64]) {
    assert!(
        point.len() <= MAX_DIM,
        "Halton set supports at most {MAX_DIM} dimensions"
    );
    for (d, x) in point.iter_mut().enumerate() {
        *x = halton(index, d);
    }
}
