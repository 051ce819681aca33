//! Stateless lattice value noise keyed by a 64-bit seed.

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` for an integer lattice point.
#[inline]
pub(crate) fn lattice(seed: u64, x: i64, y: i64) -> f64 {
    let h = mix64(
        seed ^ mix64((x as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (y as u64).rotate_left(32)),
    );
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[inline]
fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smoothly interpolated lattice noise in `[0, 1)`.
pub(crate) fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (tx, ty) = (smooth(x - x0), smooth(y - y0));
    let (ix, iy) = (x0 as i64, y0 as i64);
    let a = lattice(seed, ix, iy);
    let b = lattice(seed, ix + 1, iy);
    let c = lattice(seed, ix, iy + 1);
    let d = lattice(seed, ix + 1, iy + 1);
    let top = a + tx * (b - a);
    let bottom = c + tx * (d - c);
    top + ty * (bottom - top)
}

/// Multi-octave noise centered on zero, normalized to `[-1, 1)`.
pub(crate) fn fractal_noise(seed: u64, x: f64, y: f64, octaves: u32, persistence: f64) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    let mut norm = 0.0;
    let mut freq = 1.0;
    for o in 0..octaves {
        total += weight
            * (2.0 * value_noise(mix64(seed.wrapping_add(o as u64)), x * freq, y * freq) - 1.0);
        norm += weight;
        weight *= persistence;
        freq *= 2.0;
    }
    total / norm
}
