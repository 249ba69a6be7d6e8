//! Exact Euclidean distance and feature transforms on cell centres
//! (separable lower-envelope algorithm of Felzenszwalb and Huttenlocher),
//! with anisotropic spacing.

/// Nearest feature cell and its centre-to-centre distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub distance: f64,
    pub feature: usize,
}

/// For every cell of an x-fastest `dims` block, the nearest cell with
/// `mask == true`, searching only along the axes flagged in `axes` (so
/// `[false, true, true]` gives independent 2-D transforms per `x` slice).
/// `None` where no feature is reachable.
pub fn feature_transform(mask: &[bool], dims: [usize; 3], spacing: [f64; 3], axes: [bool; 3]) -> Vec<Option<Nearest>> {
    let len = dims[0] * dims[1] * dims[2];
    assert_eq!(mask.len(), len, "mask length does not match dims");
    let mut d2: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    let mut feat: Vec<usize> = (0..len).collect();
    let stride = [1, dims[0], dims[0] * dims[1]];
    let mut buf_f = Vec::new();
    let mut buf_i = Vec::new();
    let mut out_f = Vec::new();
    let mut out_i = Vec::new();
    for axis in 0..3 {
        if !axes[axis] || dims[axis] < 2 {
            continue;
        }
        let n = dims[axis];
        let (o1, o2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for b in 0..dims[o2] {
            for a in 0..dims[o1] {
                let base = a * stride[o1] + b * stride[o2];
                buf_f.clear();
                buf_i.clear();
                for p in 0..n {
                    let idx = base + p * stride[axis];
                    buf_f.push(d2[idx]);
                    buf_i.push(feat[idx]);
                }
                envelope_1d(&buf_f, &buf_i, spacing[axis], &mut out_f, &mut out_i);
                for p in 0..n {
                    let idx = base + p * stride[axis];
                    d2[idx] = out_f[p];
                    feat[idx] = out_i[p];
                }
            }
        }
    }
    d2.iter()
        .zip(&feat)
        .map(|(&d, &f)| {
            d.is_finite().then(|| Nearest {
                distance: d.sqrt(),
                feature: f,
            })
        })
        .collect()
}

/// `out[p] = min_q f[q] + (h(p − q))²`, with the feature of the minimiser.
fn envelope_1d(f: &[f64], feat: &[usize], h: f64, out: &mut Vec<f64>, out_feat: &mut Vec<usize>) {
    let n = f.len();
    out.clear();
    out_feat.clear();
    out.resize(n, f64::INFINITY);
    out_feat.resize(n, 0);
    let x = |q: usize| h * q as f64;
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&r) => {
                    let s = ((f[q] + x(q) * x(q)) - (f[r] + x(r) * x(r))) / (2.0 * (x(q) - x(r)));
                    if s <= *z.last().expect("z tracks v") {
                        v.pop();
                        z.pop();
                        if v.is_empty() {
                            continue;
                        }
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        return;
    }
    let mut k = 0;
    for p in 0..n {
        let xp = x(p);
        while k + 1 < v.len() && z[k + 1] < xp {
            k += 1;
        }
        let q = v[k];
        let d = xp - x(q);
        out[p] = f[q] + d * d;
        out_feat[p] = feat[q];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(mask: &[bool], dims: [usize; 3], h: [f64; 3]) -> Vec<Option<f64>> {
        let pos = |i: usize| {
            let x = i % dims[0];
            let y = (i / dims[0]) % dims[1];
            let z = i / (dims[0] * dims[1]);
            [x as f64 * h[0], y as f64 * h[1], z as f64 * h[2]]
        };
        (0..mask.len())
            .map(|i| {
                let p = pos(i);
                mask.iter()
                    .enumerate()
                    .filter(|(_, &m)| m)
                    .map(|(j, _)| {
                        let q = pos(j);
                        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
                    })
                    .min_by(f64::total_cmp)
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_on_random_masks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let dims = [rng.gen_range(1..7), rng.gen_range(1..7), rng.gen_range(1..7)];
            let h = [rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0)];
            let len = dims[0] * dims[1] * dims[2];
            let mask: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.15)).collect();
            let got = feature_transform(&mask, dims, h, [true; 3]);
            let want = brute(&mask, dims, h);
            for i in 0..len {
                match (got[i], want[i]) {
                    (Some(g), Some(w)) => {
                        assert!((g.distance - w).abs() < 1e-12, "trial {trial} cell {i}");
                        assert!(mask[g.feature]);
                    }
                    (None, None) => {}
                    other => panic!("trial {trial} cell {i}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn restricted_axes_stay_within_slices() {
        let dims = [2, 3, 1];
        // Feature only in the x = 0 slice.
        let mask = vec![true, false, false, false, false, false];
        let t = feature_transform(&mask, dims, [1.0; 3], [false, true, true]);
        assert_eq!(t[0].unwrap().distance, 0.0);
        assert!((t[2].unwrap().distance - 1.0).abs() < 1e-15);
        assert!(t[1].is_none() && t[3].is_none());
    }
}
