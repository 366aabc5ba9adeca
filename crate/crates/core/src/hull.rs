//! Planar convex hulls and polygon distances.

/// Counter-clockwise convex hull (Andrew's monotone chain). Collinear points are dropped.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Outward unit normals and offsets `(n, b)` with the polygon equal to `{p : <n,p> ≤ b}`.
pub fn halfplanes(ccw: &[[f64; 2]]) -> Vec<([f64; 2], f64)> {
    let m = ccw.len();
    (0..m)
        .filter_map(|i| {
            let a = ccw[i];
            let b = ccw[(i + 1) % m];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = (dx * dx + dy * dy).sqrt();
            if len == 0.0 {
                return None;
            }
            let n = [dy / len, -dx / len];
            Some((n, n[0] * a[0] + n[1] * a[1]))
        })
        .collect()
}

/// Membership in a counter-clockwise convex polygon, inflated by `tol`.
pub fn polygon_contains(ccw: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    halfplanes(ccw)
        .iter()
        .all(|(n, b)| n[0] * p[0] + n[1] * p[1] <= b + tol)
}

/// Euclidean distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt()
}

/// Distance from `p` to the closed polyline through `ring`.
pub fn ring_distance(ring: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let m = ring.len();
    match m {
        0 => f64::INFINITY,
        1 => ((p[0] - ring[0][0]).powi(2) + (p[1] - ring[0][1]).powi(2)).sqrt(),
        _ => (0..m)
            .map(|i| segment_distance(p, ring[i], ring[(i + 1) % m]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Largest inscribed circle of a convex polygon, as `(center, radius)`.
///
/// The optimum of the Chebyshev-center program is attained where three edge
/// constraints are active, so enumerating edge triples is exact.
pub fn chebyshev_center(ccw: &[[f64; 2]]) -> Option<([f64; 2], f64)> {
    let hp = halfplanes(ccw);
    let m = hp.len();
    let mut best: Option<([f64; 2], f64)> = None;
    for i in 0..m {
        for j in (i + 1)..m {
            for k in (j + 1)..m {
                // n·c + r = b for the three active edges
                let rows = [hp[i], hp[j], hp[k]];
                let a = nalgebra::Matrix3::from_fn(|r, c| match c {
                    0 => rows[r].0[0],
                    1 => rows[r].0[1],
                    _ => 1.0,
                });
                let rhs = nalgebra::Vector3::new(rows[0].1, rows[1].1, rows[2].1);
                let Some(sol) = a.lu().solve(&rhs) else { continue };
                let (c, r) = ([sol[0], sol[1]], sol[2]);
                if !r.is_finite() || r <= 0.0 {
                    continue;
                }
                let feasible = hp
                    .iter()
                    .all(|(n, b)| n[0] * c[0] + n[1] * c[1] + r <= b + 1e-12 * (1.0 + b.abs()));
                if feasible && best.map_or(true, |(_, br)| r > br) {
                    best = Some((c, r));
                }
            }
        }
    }
    best
}
