//! Premultiplied-alpha "over" compositing.

/// Places premultiplied `front` over the accumulated `acc` (back-to-front order).
///
/// `acc` and `front` are `[r, g, b, a]` with color already multiplied by alpha.
#[inline]
pub fn over_premultiplied(acc: &mut [f64; 4], front: [f64; 4]) {
    let t = 1.0 - front[3];
    for c in 0..4 {
        acc[c] = front[c] + t * acc[c];
    }
}

/// Associative combination of two premultiplied samples, `front` over `back`.
#[inline]
pub fn over(front: [f64; 4], back: [f64; 4]) -> [f64; 4] {
    let mut acc = back;
    over_premultiplied(&mut acc, front);
    acc
}
