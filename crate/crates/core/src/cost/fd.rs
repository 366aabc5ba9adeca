//! Finite-difference derivatives of a cost kernel.
//!
//! Central stencils are used in the interior. When a central stencil would leave
//! the domain along some coordinate, that coordinate switches to a one-sided
//! stencil of the same (second) order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CostKernel;
use crate::domain::Domain;
use crate::{Matrix, Vector};

/// Base steps; each coordinate step is scaled by `max(1, |coordinate|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub first: f64,
    pub second: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy { first: 1e-6, second: 1e-5 }
    }
}

impl StepPolicy {
    pub fn halved(self) -> Self {
        StepPolicy { first: self.first / 2.0, second: self.second / 2.0 }
    }

    pub fn step_at(base: f64, coordinate: f64) -> f64 {
        base * coordinate.abs().max(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Direction {
    Central,
    Forward,
    Backward,
}

struct Stencil {
    offsets: &'static [f64],
    weights: &'static [f64],
}

const FIRST_CENTRAL: Stencil = Stencil { offsets: &[-1.0, 1.0], weights: &[-0.5, 0.5] };
const FIRST_FORWARD: Stencil = Stencil { offsets: &[0.0, 1.0, 2.0], weights: &[-1.5, 2.0, -0.5] };
const FIRST_BACKWARD: Stencil = Stencil { offsets: &[0.0, -1.0, -2.0], weights: &[1.5, -2.0, 0.5] };
const SECOND_CENTRAL: Stencil = Stencil { offsets: &[-1.0, 0.0, 1.0], weights: &[1.0, -2.0, 1.0] };
const SECOND_FORWARD: Stencil = Stencil { offsets: &[0.0, 1.0, 2.0, 3.0], weights: &[2.0, -5.0, 4.0, -1.0] };
const SECOND_BACKWARD: Stencil = Stencil { offsets: &[0.0, -1.0, -2.0, -3.0], weights: &[2.0, -5.0, 4.0, -1.0] };

fn first(dir: Direction) -> &'static Stencil {
    match dir {
        Direction::Central => &FIRST_CENTRAL,
        Direction::Forward => &FIRST_FORWARD,
        Direction::Backward => &FIRST_BACKWARD,
    }
}

fn second(dir: Direction) -> &'static Stencil {
    match dir {
        Direction::Central => &SECOND_CENTRAL,
        Direction::Forward => &SECOND_FORWARD,
        Direction::Backward => &SECOND_BACKWARD,
    }
}

/// Picks the stencil direction for coordinate `i` of `p` with step `h`,
/// requiring `reach` steps of room on the one-sided variants.
pub(crate) fn direction(domain: &Domain, p: &Vector, i: usize, h: f64, reach: f64) -> Direction {
    let shifted = |s: f64| {
        let mut q = p.clone();
        q[i] += s;
        q
    };
    if domain.contains(&shifted(h), 0.0) && domain.contains(&shifted(-h), 0.0) {
        Direction::Central
    } else if domain.contains(&shifted(reach * h), 0.0) {
        Direction::Forward
    } else {
        Direction::Backward
    }
}

/// Which argument of `c(x, y)` a coordinate belongs to.
#[derive(Clone, Copy)]
enum Arg {
    X,
    Y,
}

pub(crate) struct FiniteDifferences<'a> {
    pub kernel: &'a dyn CostKernel,
    pub x_domain: &'a Domain,
    pub y_domain: &'a Domain,
    pub steps: StepPolicy,
}

impl FiniteDifferences<'_> {
    fn eval_shifted(&self, x: &Vector, y: &Vector, shifts: &[(Arg, usize, f64)]) -> f64 {
        let mut xs = x.clone();
        let mut ys = y.clone();
        for &(arg, i, s) in shifts {
            match arg {
                Arg::X => xs[i] += s,
                Arg::Y => ys[i] += s,
            }
        }
        self.kernel.value(&xs, &ys)
    }

    fn plan(&self, arg: Arg, x: &Vector, y: &Vector, i: usize, base: f64, reach: f64) -> (f64, Direction) {
        let (p, dom) = match arg {
            Arg::X => (x, self.x_domain),
            Arg::Y => (y, self.y_domain),
        };
        let h = StepPolicy::step_at(base, p[i]);
        (h, direction(dom, p, i, h, reach))
    }

    fn gradient(&self, arg: Arg, x: &Vector, y: &Vector) -> Vector {
        let n = match arg {
            Arg::X => x.len(),
            Arg::Y => y.len(),
        };
        DVector::from_fn(n, |i, _| {
            let (h, dir) = self.plan(arg, x, y, i, self.steps.first, 2.0);
            let st = first(dir);
            let sum: f64 = st
                .offsets
                .iter()
                .zip(st.weights)
                .map(|(o, w)| w * self.eval_shifted(x, y, &[(arg, i, o * h)]))
                .sum();
            sum / h
        })
    }

    fn mixed_entry(&self, a: Arg, i: usize, b: Arg, j: usize, x: &Vector, y: &Vector) -> f64 {
        let (h, da) = self.plan(a, x, y, i, self.steps.second, 2.0);
        let (k, db) = self.plan(b, x, y, j, self.steps.second, 2.0);
        let (sa, sb) = (first(da), first(db));
        let mut sum = 0.0;
        for (oa, wa) in sa.offsets.iter().zip(sa.weights) {
            for (ob, wb) in sb.offsets.iter().zip(sb.weights) {
                sum += wa * wb * self.eval_shifted(x, y, &[(a, i, oa * h), (b, j, ob * k)]);
            }
        }
        sum / (h * k)
    }

    fn pure_entry(&self, a: Arg, i: usize, x: &Vector, y: &Vector) -> f64 {
        let (h, d) = self.plan(a, x, y, i, self.steps.second, 3.0);
        let st = second(d);
        let sum: f64 = st
            .offsets
            .iter()
            .zip(st.weights)
            .map(|(o, w)| w * self.eval_shifted(x, y, &[(a, i, o * h)]))
            .sum();
        sum / (h * h)
    }

    pub fn grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        self.gradient(Arg::X, x, y)
    }

    pub fn grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        self.gradient(Arg::Y, x, y)
    }

    pub fn hess_xy(&self, x: &Vector, y: &Vector) -> Matrix {
        DMatrix::from_fn(x.len(), y.len(), |i, j| self.mixed_entry(Arg::X, i, Arg::Y, j, x, y))
    }

    pub fn hess_yx(&self, x: &Vector, y: &Vector) -> Matrix {
        DMatrix::from_fn(y.len(), x.len(), |i, j| self.mixed_entry(Arg::Y, i, Arg::X, j, x, y))
    }

    pub fn hess_xx(&self, x: &Vector, y: &Vector) -> Matrix {
        self.pure_block(Arg::X, x, y)
    }

    pub fn hess_yy(&self, x: &Vector, y: &Vector) -> Matrix {
        self.pure_block(Arg::Y, x, y)
    }

    fn pure_block(&self, arg: Arg, x: &Vector, y: &Vector) -> Matrix {
        let n = match arg {
            Arg::X => x.len(),
            Arg::Y => y.len(),
        };
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.pure_entry(arg, i, x, y);
            for j in (i + 1)..n {
                let v = self.mixed_entry(arg, i, arg, j, x, y);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;

    #[test]
    fn one_sided_near_boundary() {
        let d = DomainSpec::unit_box(2).build().unwrap();
        let p = DVector::from_vec(vec![0.0, 0.5]);
        assert_eq!(direction(&d, &p, 0, 1e-6, 2.0), Direction::Forward);
        assert_eq!(direction(&d, &p, 1, 1e-6, 2.0), Direction::Central);
        let q = DVector::from_vec(vec![1.0, 0.5]);
        assert_eq!(direction(&d, &q, 0, 1e-6, 2.0), Direction::Backward);
    }

    #[test]
    fn stencils_are_exact_on_quadratics() {
        // first-derivative weights sum to 0 and reproduce the slope; second-derivative weights reproduce 2
        for st in [&FIRST_CENTRAL, &FIRST_FORWARD, &FIRST_BACKWARD] {
            let w0: f64 = st.weights.iter().sum();
            let w1: f64 = st.offsets.iter().zip(st.weights).map(|(o, w)| o * w).sum();
            let w2: f64 = st.offsets.iter().zip(st.weights).map(|(o, w)| o * o * w).sum();
            assert_eq!((w0, w1, w2), (0.0, 1.0, 0.0));
        }
        for st in [&SECOND_CENTRAL, &SECOND_FORWARD, &SECOND_BACKWARD] {
            let m: Vec<f64> = (0..4)
                .map(|k| st.offsets.iter().zip(st.weights).map(|(o, w)| o.powi(k) * w).sum())
                .collect();
            assert_eq!(m, vec![0.0, 0.0, 2.0, 0.0]);
        }
    }
}
