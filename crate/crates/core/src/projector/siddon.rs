//! Exact ray/pixel intersection lengths by parametric traversal.

/// Unit direction of the rays and of the detector axis for an angle.
///
/// At 0° rays run along image columns (direction `+y`) and the detector axis
/// is `+x`.
pub(crate) fn ray_frame(angle_deg: f64) -> ((f64, f64), (f64, f64)) {
    let (s, c) = angle_deg.to_radians().sin_cos();
    ((-s, c), (c, s))
}

/// Signed detector coordinate of bin `index` out of `count`, unit spacing,
/// centred on the rotation axis.
pub(crate) fn bin_offset(index: usize, count: usize) -> f64 {
    index as f64 - count as f64 / 2.0 + 0.5
}

const MIN_SEGMENT: f64 = 1e-12;

/// Appends `(pixel_index, length)` for the line `{t*u + l*d}` crossing an
/// `n x n` grid of unit pixels centred on the origin. Pixels are visited in
/// order along the ray; zero-length touches are skipped.
pub(crate) fn trace(n: usize, angle_deg: f64, t: f64, out: &mut Vec<(usize, f64)>, scratch: &mut Vec<f64>) {
    let ((dx, dy), (ux, uy)) = ray_frame(angle_deg);
    let (px, py) = (t * ux, t * uy);
    let half = n as f64 / 2.0;

    // clip the line against the grid's bounding box
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (p, d) in [(px, dx), (py, dy)] {
        if d.abs() < 1e-15 {
            if p <= -half || p >= half {
                return;
            }
        } else {
            let a = (-half - p) / d;
            let b = (half - p) / d;
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    if hi - lo <= MIN_SEGMENT {
        return;
    }

    scratch.clear();
    scratch.push(lo);
    scratch.push(hi);
    for (p, d) in [(px, dx), (py, dy)] {
        if d.abs() < 1e-15 {
            continue;
        }
        for k in 0..=n {
            let l = (k as f64 - half - p) / d;
            if l > lo && l < hi {
                scratch.push(l);
            }
        }
    }
    scratch.sort_by(f64::total_cmp);

    for w in scratch.windows(2) {
        let len = w[1] - w[0];
        if len <= MIN_SEGMENT {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let x = px + mid * dx;
        let y = py + mid * dy;
        let col = ((x + half).floor() as isize).clamp(0, n as isize - 1) as usize;
        let row = ((half - y).floor() as isize).clamp(0, n as isize - 1) as usize;
        out.push((row * n + col, len));
    }
}
