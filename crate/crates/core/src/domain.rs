//! Compact convex domains of ℝⁿ: axis-aligned boxes, balls and planar polygons.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull;
use crate::sampling::unit_vector;
use crate::Vector;

/// Shape parameters of a domain, as they appear in configuration files and reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum DomainSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// Convex hull of the listed vertices; planar only.
    Polytope { vertices: Vec<Vec<f64>> },
}

impl DomainSpec {
    pub fn unit_box(dim: usize) -> Self {
        DomainSpec::Box { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn build(&self) -> Result<Domain> {
        Domain::new(self.clone())
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Box { lower: Vector, upper: Vector },
    Ball { center: Vector, radius: f64 },
    Polygon { ring: Vec<[f64; 2]>, planes: Vec<([f64; 2], f64)> },
}

/// A validated domain with its derived geometric quantities.
#[derive(Clone, Debug)]
pub struct Domain {
    spec: DomainSpec,
    shape: Shape,
    dim: usize,
    diameter: f64,
    inradius: f64,
    center: Vector,
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        let (shape, dim, diameter, inradius, center) = match &spec {
            DomainSpec::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::InvalidParameter(format!(
                        "box bounds have lengths {} and {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(u > l) || !l.is_finite() || !u.is_finite()) {
                    return Err(Error::DegenerateDomain("box with empty interior".into()));
                }
                let lo = DVector::from_column_slice(lower);
                let hi = DVector::from_column_slice(upper);
                let widths = &hi - &lo;
                let diameter = widths.norm();
                let inradius = widths.min() / 2.0;
                let center = (&lo + &hi) / 2.0;
                (Shape::Box { lower: lo, upper: hi }, lower.len(), diameter, inradius, center)
            }
            DomainSpec::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::InvalidParameter("ball center is empty".into()));
                }
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::DegenerateDomain(format!("ball radius {radius}")));
                }
                let c = DVector::from_column_slice(center);
                (
                    Shape::Ball { center: c.clone(), radius: *radius },
                    center.len(),
                    2.0 * radius,
                    *radius,
                    c,
                )
            }
            DomainSpec::Polytope { vertices } => {
                if vertices.iter().any(|v| v.len() != 2) {
                    let found = vertices.iter().map(Vec::len).find(|&l| l != 2).unwrap_or(0);
                    return Err(Error::UnsupportedDimension(found));
                }
                let pts: Vec<[f64; 2]> = vertices.iter().map(|v| [v[0], v[1]]).collect();
                let ring = hull::convex_hull_2d(&pts);
                if ring.len() < 3 {
                    return Err(Error::DegenerateDomain("polygon with fewer than 3 extreme vertices".into()));
                }
                let (c, r) = hull::chebyshev_center(&ring)
                    .ok_or_else(|| Error::DegenerateDomain("polygon with empty interior".into()))?;
                let mut diameter: f64 = 0.0;
                for a in &ring {
                    for b in &ring {
                        diameter = diameter.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
                    }
                }
                let planes = hull::halfplanes(&ring);
                (
                    Shape::Polygon { ring, planes },
                    2,
                    diameter,
                    r,
                    DVector::from_vec(vec![c[0], c[1]]),
                )
            }
        };
        Ok(Domain { spec, shape, dim, diameter, inradius, center })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Radius of the largest ball contained in the domain.
    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    /// Center of a largest inscribed ball.
    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn contains(&self, p: &Vector, tol: f64) -> bool {
        if p.len() != self.dim {
            return false;
        }
        match &self.shape {
            Shape::Box { lower, upper } => (0..self.dim).all(|i| p[i] >= lower[i] - tol && p[i] <= upper[i] + tol),
            Shape::Ball { center, radius } => (p - center).norm() <= radius + tol,
            Shape::Polygon { planes, .. } => planes.iter().all(|(n, b)| n[0] * p[0] + n[1] * p[1] <= b + tol),
        }
    }

    /// Signed depth: distance to the boundary inside, a negative distance-like margin outside.
    pub fn depth(&self, p: &Vector) -> f64 {
        match &self.shape {
            Shape::Box { lower, upper } => (0..self.dim)
                .map(|i| (p[i] - lower[i]).min(upper[i] - p[i]))
                .fold(f64::INFINITY, f64::min),
            Shape::Ball { center, radius } => radius - (p - center).norm(),
            Shape::Polygon { planes, .. } => planes
                .iter()
                .map(|(n, b)| b - (n[0] * p[0] + n[1] * p[1]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Moves the candidate `to` back into the domain, given a feasible `from`.
    ///
    /// Boxes clamp coordinates and balls project radially; polygons clip the
    /// segment `from → to` at the first boundary crossing.
    pub fn pull_inside(&self, from: &Vector, to: &Vector) -> Vector {
        match &self.shape {
            Shape::Box { lower, upper } => {
                DVector::from_fn(self.dim, |i, _| to[i].clamp(lower[i], upper[i]))
            }
            Shape::Ball { center, radius } => {
                let d = to - center;
                let n = d.norm();
                if n <= *radius {
                    to.clone()
                } else {
                    center + d * (radius / n)
                }
            }
            Shape::Polygon { planes, .. } => {
                let dir = to - from;
                let mut tau: f64 = 1.0;
                for (n, b) in planes {
                    let rate = n[0] * dir[0] + n[1] * dir[1];
                    if rate > 0.0 {
                        let slack = (b - (n[0] * from[0] + n[1] * from[1])).max(0.0);
                        tau = tau.min(slack / rate);
                    }
                }
                from + dir * tau
            }
        }
    }

    pub fn bounding_box(&self) -> (Vector, Vector) {
        match &self.shape {
            Shape::Box { lower, upper } => (lower.clone(), upper.clone()),
            Shape::Ball { center, radius } => (
                center.map(|c| c - radius),
                center.map(|c| c + radius),
            ),
            Shape::Polygon { ring, .. } => {
                let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                for v in ring {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (DVector::from_vec(lo.to_vec()), DVector::from_vec(hi.to_vec()))
            }
        }
    }

    /// Points of the `m`-per-axis lattice over the bounding box (corners included) that lie in the domain.
    pub fn lattice(&self, m: usize) -> Vec<Vector> {
        let (lo, hi) = self.bounding_box();
        let m = m.max(2);
        let total = m.pow(self.dim as u32);
        (0..total)
            .filter_map(|mut idx| {
                let p = DVector::from_fn(self.dim, |i, _| {
                    let k = idx % m;
                    idx /= m;
                    lo[i] + (hi[i] - lo[i]) * k as f64 / (m - 1) as f64
                });
                self.contains(&p, 1e-12).then_some(p)
            })
            .collect()
    }

    pub fn sample_interior<R: Rng>(&self, rng: &mut R) -> Vector {
        match &self.shape {
            Shape::Box { lower, upper } => {
                DVector::from_fn(self.dim, |i, _| lower[i] + (upper[i] - lower[i]) * rng.gen::<f64>())
            }
            Shape::Ball { center, radius } => {
                let u = unit_vector(rng, self.dim);
                let r = radius * rng.gen::<f64>().powf(1.0 / self.dim as f64);
                center + u * r
            }
            Shape::Polygon { .. } => {
                let (lo, hi) = self.bounding_box();
                loop {
                    let p = DVector::from_fn(2, |i, _| lo[i] + (hi[i] - lo[i]) * rng.gen::<f64>());
                    if self.contains(&p, 0.0) {
                        return p;
                    }
                }
            }
        }
    }

    /// Uniform random point on the boundary (by surface measure).
    pub fn sample_boundary<R: Rng>(&self, rng: &mut R) -> Vector {
        match &self.shape {
            Shape::Box { lower, upper } => {
                if self.dim == 1 {
                    return if rng.gen::<bool>() { lower.clone() } else { upper.clone() };
                }
                let widths = upper - lower;
                // face k (pair of opposite faces normal to axis k) has measure ∏_{i≠k} w_i
                let areas: Vec<f64> = (0..self.dim)
                    .map(|k| (0..self.dim).filter(|&i| i != k).map(|i| widths[i]).product())
                    .collect();
                let total: f64 = areas.iter().sum();
                let mut pick = rng.gen::<f64>() * total;
                let mut axis = self.dim - 1;
                for (k, a) in areas.iter().enumerate() {
                    if pick < *a {
                        axis = k;
                        break;
                    }
                    pick -= a;
                }
                let mut p = DVector::from_fn(self.dim, |i, _| lower[i] + widths[i] * rng.gen::<f64>());
                p[axis] = if rng.gen::<bool>() { lower[axis] } else { upper[axis] };
                p
            }
            Shape::Ball { center, radius } => center + unit_vector(rng, self.dim) * *radius,
            Shape::Polygon { ring, .. } => {
                let m = ring.len();
                let lens: Vec<f64> = (0..m)
                    .map(|i| {
                        let (a, b) = (ring[i], ring[(i + 1) % m]);
                        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
                    })
                    .collect();
                let total: f64 = lens.iter().sum();
                let mut pick = rng.gen::<f64>() * total;
                for i in 0..m {
                    if pick <= lens[i] || i == m - 1 {
                        let s = (pick / lens[i]).clamp(0.0, 1.0);
                        let (a, b) = (ring[i], ring[(i + 1) % m]);
                        return DVector::from_vec(vec![a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
                    }
                    pick -= lens[i];
                }
                unreachable!()
            }
        }
    }

    /// Deterministic boundary mesh of roughly `n` points.
    ///
    /// In the plane the points are ordered counter-clockwise along the boundary and
    /// every corner is included, so the mesh doubles as a polygonal approximation.
    pub fn boundary_mesh(&self, n: usize) -> Vec<Vector> {
        let n = n.max(4);
        match (&self.shape, self.dim) {
            (Shape::Box { lower, upper }, 1) => {
                vec![lower.clone(), upper.clone()]
            }
            (Shape::Ball { center, radius }, 1) => {
                vec![center.map(|c| c - radius), center.map(|c| c + radius)]
            }
            (Shape::Box { lower, upper }, 2) => {
                let ring = [
                    [lower[0], lower[1]],
                    [upper[0], lower[1]],
                    [upper[0], upper[1]],
                    [lower[0], upper[1]],
                ];
                ring_mesh(&ring, n)
            }
            (Shape::Polygon { ring, .. }, _) => ring_mesh(ring, n),
            (Shape::Ball { center, radius }, 2) => (0..n)
                .map(|i| {
                    let th = std::f64::consts::TAU * i as f64 / n as f64;
                    DVector::from_vec(vec![center[0] + radius * th.cos(), center[1] + radius * th.sin()])
                })
                .collect(),
            (Shape::Ball { center, radius }, 3) => {
                // Fibonacci sphere
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                (0..n)
                    .map(|i| {
                        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let th = golden * i as f64;
                        center + DVector::from_vec(vec![r * th.cos(), r * th.sin(), z]) * *radius
                    })
                    .collect()
            }
            (Shape::Box { lower, upper }, d) => {
                // grid of k^(d-1) points on each of the 2d faces
                let faces = 2 * d;
                let k = ((n as f64 / faces as f64).powf(1.0 / (d - 1) as f64).ceil() as usize).max(2);
                let mut out = Vec::new();
                for axis in 0..d {
                    for side in [lower[axis], upper[axis]] {
                        let total = k.pow((d - 1) as u32);
                        for mut idx in 0..total {
                            let mut p = DVector::zeros(d);
                            for i in 0..d {
                                if i == axis {
                                    p[i] = side;
                                } else {
                                    let j = idx % k;
                                    idx /= k;
                                    p[i] = lower[i] + (upper[i] - lower[i]) * j as f64 / (k - 1) as f64;
                                }
                            }
                            out.push(p);
                        }
                    }
                }
                out
            }
            (Shape::Ball { center, radius }, d) => {
                let mut rng = crate::sampling::stream_rng(0, u64::MAX, 0);
                (0..n).map(|_| center + unit_vector(&mut rng, d) * *radius).collect()
            }
        }
    }

    /// Lower bound on the distance between two domains (exact for pairs of boxes or balls).
    pub fn separation(&self, other: &Domain) -> f64 {
        match (&self.shape, &other.shape) {
            (Shape::Box { lower: l1, upper: u1 }, Shape::Box { lower: l2, upper: u2 }) => (0..self.dim)
                .map(|i| (l2[i] - u1[i]).max(l1[i] - u2[i]).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt(),
            (Shape::Ball { center: c1, radius: r1 }, Shape::Ball { center: c2, radius: r2 }) => {
                ((c1 - c2).norm() - r1 - r2).max(0.0)
            }
            _ => {
                let a = self.boundary_mesh(400);
                let b = other.boundary_mesh(400);
                let mut d = f64::INFINITY;
                for p in &a {
                    for q in &b {
                        d = d.min((p - q).norm());
                    }
                }
                // mesh spacing bounds the discretization error
                (d - (self.diameter + other.diameter) * std::f64::consts::PI / 400.0).max(0.0)
            }
        }
    }
}

fn ring_mesh(ring: &[[f64; 2]], n: usize) -> Vec<Vector> {
    let m = ring.len();
    let lens: Vec<f64> = (0..m)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % m]);
            ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
        })
        .collect();
    let perimeter: f64 = lens.iter().sum();
    let mut out = Vec::with_capacity(n + m);
    for i in 0..m {
        let (a, b) = (ring[i], ring[(i + 1) % m]);
        let pieces = ((n as f64 * lens[i] / perimeter).round() as usize).max(1);
        for j in 0..pieces {
            let s = j as f64 / pieces as f64;
            out.push(DVector::from_vec(vec![a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::stream_rng;

    fn square() -> Domain {
        DomainSpec::unit_box(2).build().unwrap()
    }

    #[test]
    fn box_quantities_match_parameters() {
        let d = DomainSpec::Box { lower: vec![1.0, 1.0], upper: vec![1.2, 1.5] }.build().unwrap();
        assert!((d.diameter() - (0.2f64.powi(2) + 0.5f64.powi(2)).sqrt()).abs() < 1e-12);
        assert!((d.inradius() - 0.1).abs() < 1e-12);
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn ball_and_polygon_quantities() {
        let b = DomainSpec::Ball { center: vec![0.0, 0.0, 0.0], radius: 0.5 }.build().unwrap();
        assert_eq!(b.diameter(), 1.0);
        assert_eq!(b.inradius(), 0.5);
        let p = DomainSpec::Polytope {
            vertices: vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![2.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.5]],
        }
        .build()
        .unwrap();
        assert!((p.inradius() - 0.5).abs() < 1e-12);
        assert!((p.diameter() - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(DomainSpec::Box { lower: vec![0.0], upper: vec![0.0] }.build().is_err());
        assert!(DomainSpec::Ball { center: vec![0.0], radius: 0.0 }.build().is_err());
        assert!(matches!(
            DomainSpec::Polytope { vertices: vec![vec![0.0, 0.0, 0.0]] }.build(),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn samplers_stay_inside() {
        let shapes = [
            DomainSpec::unit_box(1),
            DomainSpec::unit_box(2),
            DomainSpec::unit_box(3),
            DomainSpec::Ball { center: vec![0.5, -0.5], radius: 0.3 },
            DomainSpec::Ball { center: vec![0.0, 0.0, 1.0], radius: 2.0 },
            DomainSpec::Polytope { vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]] },
        ];
        let mut rng = stream_rng(1, 0, 0);
        for s in shapes {
            let d = s.build().unwrap();
            for _ in 0..200 {
                assert!(d.contains(&d.sample_interior(&mut rng), 0.0));
                let b = d.sample_boundary(&mut rng);
                assert!(d.contains(&b, 1e-12));
                assert!(d.depth(&b).abs() < 1e-12, "{s:?} {b}");
            }
            for p in d.boundary_mesh(64) {
                assert!(d.contains(&p, 1e-12));
            }
            for p in d.lattice(5) {
                assert!(d.contains(&p, 1e-12));
            }
        }
    }

    #[test]
    fn pull_inside_lands_in_domain() {
        let d = square();
        let from = DVector::from_vec(vec![0.5, 0.5]);
        let to = DVector::from_vec(vec![1.5, -0.25]);
        let p = d.pull_inside(&from, &to);
        assert_eq!(p, DVector::from_vec(vec![1.0, 0.0]));
        let tri = DomainSpec::Polytope { vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]] }
            .build()
            .unwrap();
        let q = tri.pull_inside(&DVector::from_vec(vec![0.1, 0.1]), &DVector::from_vec(vec![2.0, 2.0]));
        assert!(tri.contains(&q, 1e-12));
        assert!(tri.depth(&q).abs() < 1e-12);
    }

    #[test]
    fn separation_of_catalog_log_boxes() {
        let x = DomainSpec::Box { lower: vec![0.0, 0.0], upper: vec![0.2, 0.2] }.build().unwrap();
        let y = DomainSpec::Box { lower: vec![1.0, 1.0], upper: vec![1.2, 1.2] }.build().unwrap();
        assert!((x.separation(&y) - 0.8 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn planar_mesh_includes_corners() {
        let mesh = square().boundary_mesh(16);
        assert_eq!(mesh.len(), 16);
        for c in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] {
            assert!(mesh.iter().any(|p| p[0] == c[0] && p[1] == c[1]));
        }
    }
}
