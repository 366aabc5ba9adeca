//! Seeded sampling primitives.
//!
//! Every random draw in the crate goes through [`stream_rng`], which derives an
//! independent ChaCha stream from `(seed, tag, index)`. Work item `index` of a
//! batch therefore sees the same numbers regardless of how the batch is split
//! across threads, and a batch of `2n` items shares its first `n` items with a
//! batch of `n`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream tags keep unrelated consumers of the same seed apart.
pub mod tags {
    pub const TWISTED_X: u64 = 0x01;
    pub const TWISTED_Y: u64 = 0x02;
    pub const NONDEGENERATE: u64 = 0x03;
    pub const LIP_HESSIAN: u64 = 0x04;
    pub const DOM_CONV_X: u64 = 0x05;
    pub const DOM_CONV_Y: u64 = 0x06;
    pub const PROBES: u64 = 0x10;
    pub const PROBES_INDEPENDENT: u64 = 0x11;
    pub const A3_SCAN: u64 = 0x20;
    pub const LEMMA_LIP: u64 = 0x30;
    pub const LEMMA_GRAD: u64 = 0x31;
    pub const LEMMA_CONE: u64 = 0x32;
    pub const LEMMA_BOUNDARY: u64 = 0x33;
    pub const LEMMA_NEAR: u64 = 0x34;
    pub const LEMMA_LOCAL: u64 = 0x35;
    pub const LEMMA_CONCAVE: u64 = 0x36;
    pub const LEMMA_PILOT: u64 = 0x37;
    pub const LEMMA_PROP: u64 = 0x38;
    pub const SUBLEVEL: u64 = 0x40;
    pub const ANCHORS: u64 = 0x50;
}

/// Independent generator for work item `index` of the consumer `tag`.
pub fn stream_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17)
        ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    rng.set_stream(index);
    rng
}

/// Radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
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

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Point `index` of the Halton sequence in `[0,1)^dim` (dim ≤ 8).
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton sequence supports at most 8 dimensions");
    PRIMES[..dim]
        .iter()
        .map(|&b| radical_inverse(index + 1, b))
        .collect()
}

/// Uniform direction on the unit sphere of ℝⁿ.
pub fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Unit vector drawn uniformly from the orthogonal complement of the unit vector `xi`.
///
/// Returns `None` in dimension 1, where the complement is trivial.
pub fn orthogonal_unit<R: Rng>(rng: &mut R, xi: &DVector<f64>) -> Option<DVector<f64>> {
    if xi.len() < 2 {
        return None;
    }
    loop {
        let mut v = unit_vector(rng, xi.len());
        // two Gram-Schmidt passes keep |<xi, eta>| at roundoff level
        for _ in 0..2 {
            let proj = v.dot(xi);
            v -= xi * proj;
        }
        let n = v.norm();
        if n > 1e-6 {
            return Some(v / n);
        }
    }
}

/// Orthonormal basis of the complement of the unit vector `axis`.
pub fn complement_basis(axis: &DVector<f64>) -> Vec<DVector<f64>> {
    let dim = axis.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim.saturating_sub(1));
    for i in 0..dim {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        for _ in 0..2 {
            let p = v.dot(axis);
            v -= axis * p;
            for b in &basis {
                let p = v.dot(b);
                v -= b * p;
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / n);
        }
        if basis.len() + 1 == dim {
            break;
        }
    }
    basis
}

/// Unit direction whose cosine with the unit vector `axis` is uniform-on-the-sphere
/// distributed within `[cos_min, cos_max]`.
///
/// In dimension 2 the angle is drawn uniformly, in dimension 3 the cosine is
/// (Archimedes), otherwise directions are rejection-sampled from the sphere.
pub fn direction_in_band<R: Rng>(
    rng: &mut R,
    axis: &DVector<f64>,
    cos_min: f64,
    cos_max: f64,
) -> Option<DVector<f64>> {
    let dim = axis.len();
    let cos_min = cos_min.clamp(-1.0, 1.0);
    let cos_max = cos_max.clamp(-1.0, 1.0);
    if cos_min > cos_max {
        return None;
    }
    match dim {
        1 => {
            let candidates: Vec<f64> = [1.0, -1.0]
                .into_iter()
                .filter(|c| *c >= cos_min && *c <= cos_max)
                .collect();
            if candidates.is_empty() {
                return None;
            }
            let c = candidates[rng.gen_range(0..candidates.len())];
            Some(axis * c)
        }
        2 => {
            let perp = DVector::from_vec(vec![-axis[1], axis[0]]);
            let lo = cos_max.acos();
            let hi = cos_min.acos();
            let theta = lo + (hi - lo) * rng.gen::<f64>();
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            Some(axis * theta.cos() + perp * (sign * theta.sin()))
        }
        3 => {
            let basis = complement_basis(axis);
            let c = cos_min + (cos_max - cos_min) * rng.gen::<f64>();
            let s = (1.0 - c * c).max(0.0).sqrt();
            let phi = std::f64::consts::TAU * rng.gen::<f64>();
            Some(axis * c + &basis[0] * (s * phi.cos()) + &basis[1] * (s * phi.sin()))
        }
        _ => {
            for _ in 0..100_000 {
                let u = unit_vector(rng, dim);
                let c = u.dot(axis);
                if c >= cos_min && c <= cos_max {
                    return Some(u);
                }
            }
            None
        }
    }
}

/// Radius distributed uniformly in `(0, r]`.
pub fn radius_in<R: Rng>(rng: &mut R, r: f64) -> f64 {
    r * (1.0 - rng.gen::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream_rng(42, 1, 7).gen()).collect();
        let b: Vec<u64> = (0..4).map(|_| stream_rng(42, 1, 7).gen()).collect();
        assert_eq!(a, b);
        let x: u64 = stream_rng(42, 1, 7).gen();
        let y: u64 = stream_rng(42, 1, 8).gen();
        let z: u64 = stream_rng(42, 2, 7).gen();
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn halton_stays_in_unit_cube() {
        for i in 0..200 {
            for c in halton(i, 4) {
                assert!((0.0..1.0).contains(&c));
            }
        }
        assert_eq!(halton(0, 2), vec![0.5, 1.0 / 3.0]);
    }

    #[test]
    fn orthogonal_pairs_are_orthonormal() {
        let mut rng = stream_rng(0, 0, 0);
        for dim in 2..=4 {
            for _ in 0..50 {
                let xi = unit_vector(&mut rng, dim);
                let eta = orthogonal_unit(&mut rng, &xi).unwrap();
                assert!(xi.dot(&eta).abs() <= 1e-12);
                assert!((eta.norm() - 1.0).abs() <= 1e-12);
            }
        }
        assert!(orthogonal_unit(&mut rng, &DVector::from_vec(vec![1.0])).is_none());
    }

    #[test]
    fn band_directions_respect_cosine_limits() {
        let mut rng = stream_rng(3, 0, 0);
        for dim in 1..=4 {
            let axis = unit_vector(&mut rng, dim);
            for _ in 0..200 {
                if let Some(d) = direction_in_band(&mut rng, &axis, 0.25, 1.0) {
                    let c = d.dot(&axis);
                    assert!(c >= 0.25 - 1e-12, "dim {dim}: cos {c}");
                    assert!((d.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
