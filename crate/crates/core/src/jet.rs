//! Truncated multivariate Taylor jets of order at most three.
//!
//! A [`Jet`] carries the value of a scalar function together with its
//! gradient, Hessian and third-derivative tensor at a point, stored densely
//! (row-major, all index orderings present). Arithmetic propagates the
//! derivatives exactly by the Leibniz and Faà di Bruno rules, so a tree of
//! elementary operations evaluated on jets yields exact derivatives up to
//! rounding. Mixed-order operands are truncated to the lower order.
//!
//! Higher entries are always computed once for a sorted index tuple and then
//! mirrored, which keeps the Hessian and third tensor exactly symmetric.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Highest supported derivative order.
pub const MAX_ORDER: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    nvars: usize,
    order: usize,
    data: Vec<f64>,
}

fn len_for(n: usize, order: usize) -> usize {
    let mut len = 1;
    if order >= 1 {
        len += n;
    }
    if order >= 2 {
        len += n * n;
    }
    if order >= 3 {
        len += n * n * n;
    }
    len
}

impl Jet {
    pub fn constant(nvars: usize, order: usize, value: f64) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut data = vec![0.0; len_for(nvars, order)];
        data[0] = value;
        Jet { nvars, order, data }
    }

    /// The coordinate function `x_index` at `value`.
    pub fn variable(nvars: usize, order: usize, value: f64, index: usize) -> Self {
        assert!(index < nvars);
        let mut j = Self::constant(nvars, order, value);
        if order >= 1 {
            j.data[1 + index] = 1.0;
        }
        j
    }

    /// Coordinate jets of the identity map around `p`.
    pub fn identity_point(p: &[f64], order: usize) -> Vec<Jet> {
        p.iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(p.len(), order, v, i))
            .collect()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.data[0]
    }

    pub fn grad(&self, i: usize) -> f64 {
        if self.order < 1 {
            return 0.0;
        }
        self.data[1 + i]
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        if self.order < 2 {
            return 0.0;
        }
        let n = self.nvars;
        self.data[1 + n + i * n + j]
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        if self.order < 3 {
            return 0.0;
        }
        let n = self.nvars;
        self.data[1 + n + n * n + (i * n + j) * n + k]
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.nvars).map(|i| self.grad(i)).collect()
    }

    pub fn hessian(&self) -> Vec<f64> {
        let n = self.nvars;
        (0..n * n).map(|ij| self.hess(ij / n, ij % n)).collect()
    }

    pub fn third_tensor(&self) -> Vec<f64> {
        let n = self.nvars;
        (0..n * n * n)
            .map(|ijk| self.third(ijk / (n * n), (ijk / n) % n, ijk % n))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn set_grad(&mut self, i: usize, v: f64) {
        self.data[1 + i] = v;
    }

    fn set_hess_sym(&mut self, i: usize, j: usize, v: f64) {
        let n = self.nvars;
        self.data[1 + n + i * n + j] = v;
        self.data[1 + n + j * n + i] = v;
    }

    fn set_third_sym(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.nvars;
        let base = 1 + n + n * n;
        for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
            self.data[base + (a * n + b) * n + c] = v;
        }
    }

    /// Drops derivatives above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        Jet {
            nvars: self.nvars,
            order,
            data: self.data[..len_for(self.nvars, order)].to_vec(),
        }
    }

    /// Partial derivative along variable `i`; the result has one order less.
    pub fn derivative(&self, i: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let n = self.nvars;
        let mut out = Jet::constant(n, self.order - 1, self.grad(i));
        if self.order >= 2 {
            for j in 0..n {
                out.set_grad(j, self.hess(i, j));
            }
        }
        if self.order >= 3 {
            for j in 0..n {
                for k in j..n {
                    out.set_hess_sym(j, k, self.third(i, j, k));
                }
            }
        }
        out
    }

    /// Applies a scalar function given its derivatives `d[0..=3]` at the
    /// current value.
    pub fn chain(&self, d: [f64; 4]) -> Jet {
        let n = self.nvars;
        let mut out = Jet::constant(n, self.order, d[0]);
        if self.order >= 1 {
            for i in 0..n {
                out.set_grad(i, d[1] * self.grad(i));
            }
        }
        if self.order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = d[2] * self.grad(i) * self.grad(j) + d[1] * self.hess(i, j);
                    out.set_hess_sym(i, j, v);
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let (ai, aj, ak) = (self.grad(i), self.grad(j), self.grad(k));
                        let v = d[3] * ai * aj * ak
                            + d[2] * (self.hess(i, j) * ak + self.hess(i, k) * aj + self.hess(j, k) * ai)
                            + d[1] * self.third(i, j, k);
                        out.set_third_sym(i, j, k, v);
                    }
                }
            }
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.chain([e, e, e, e])
    }

    /// Natural logarithm; caller guarantees a positive value.
    pub fn ln(&self) -> Jet {
        let x = self.value();
        let r = 1.0 / x;
        self.chain([x.ln(), r, -r * r, 2.0 * r * r * r])
    }

    pub fn sqrt(&self) -> Jet {
        let x = self.value();
        let s = x.sqrt();
        self.chain([s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x)])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.chain([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.chain([c, -s, -c, s])
    }

    pub fn recip(&self) -> Jet {
        let r = 1.0 / self.value();
        self.chain([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn powi(&self, k: i32) -> Jet {
        let x = self.value();
        let kf = k as f64;
        let d = [
            x.powi(k),
            kf * x.powi(k - 1),
            kf * (kf - 1.0) * x.powi(k - 2),
            kf * (kf - 1.0) * (kf - 2.0) * x.powi(k - 3),
        ];
        // x^k with k in {0,1,2} has vanishing higher derivatives even at x = 0
        let d = d.map(|v| if v.is_nan() { 0.0 } else { v });
        self.chain(d)
    }

    pub fn powf(&self, a: f64) -> Jet {
        let x = self.value();
        self.chain([
            x.powf(a),
            a * x.powf(a - 1.0),
            a * (a - 1.0) * x.powf(a - 2.0),
            a * (a - 1.0) * (a - 2.0) * x.powf(a - 3.0),
        ])
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            nvars: self.nvars,
            order: self.order,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        assert_eq!(self.nvars, other.nvars, "jet variable count mismatch");
        let order = self.order.min(other.order);
        let len = len_for(self.nvars, order);
        Jet {
            nvars: self.nvars,
            order,
            data: (0..len).map(|i| f(self.data[i], other.data[i])).collect(),
        }
    }

    fn product(&self, b: &Jet) -> Jet {
        assert_eq!(self.nvars, b.nvars, "jet variable count mismatch");
        let a = self;
        let n = a.nvars;
        let order = a.order.min(b.order);
        let (a0, b0) = (a.value(), b.value());
        let mut out = Jet::constant(n, order, a0 * b0);
        if order >= 1 {
            for i in 0..n {
                out.set_grad(i, a.grad(i) * b0 + a0 * b.grad(i));
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = a.hess(i, j) * b0 + a.grad(i) * b.grad(j) + a.grad(j) * b.grad(i) + a0 * b.hess(i, j);
                    out.set_hess_sym(i, j, v);
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let v = a.third(i, j, k) * b0
                            + a.hess(i, j) * b.grad(k)
                            + a.hess(i, k) * b.grad(j)
                            + a.hess(j, k) * b.grad(i)
                            + a.grad(i) * b.hess(j, k)
                            + a.grad(j) * b.hess(i, k)
                            + a.grad(k) * b.hess(i, j)
                            + a0 * b.third(i, j, k);
                        out.set_third_sym(i, j, k, v);
                    }
                }
            }
        }
        out
    }

    /// Substitutes `inner` (jets in another set of variables, one per
    /// variable of `self`) into the Taylor polynomial of `self`.
    pub fn compose(&self, inner: &[Jet]) -> Jet {
        assert_eq!(inner.len(), self.nvars, "composition arity mismatch");
        if is_identity(inner) && inner.iter().all(|j| j.order >= self.order) {
            return self.clone();
        }
        let m = inner.first().map(|j| j.nvars).unwrap_or(0);
        let order = inner
            .iter()
            .map(|j| j.order)
            .min()
            .unwrap_or(self.order)
            .min(self.order);
        let deltas: Vec<Jet> = inner
            .iter()
            .map(|j| {
                let mut d = j.truncate(order);
                d.data[0] = 0.0;
                d
            })
            .collect();
        let n = self.nvars;
        let mut out = Jet::constant(m, order, self.value());
        if order >= 1 {
            for i in 0..n {
                out += &deltas[i].scale(self.grad(i));
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    let h = self.hess(i, j);
                    if h != 0.0 {
                        out += &(&deltas[i] * &deltas[j]).scale(0.5 * h);
                    }
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    let dij = &deltas[i] * &deltas[j];
                    for k in 0..n {
                        let t = self.third(i, j, k);
                        if t != 0.0 {
                            out += &(&dij * &deltas[k]).scale(t / 6.0);
                        }
                    }
                }
            }
        }
        out
    }
}

/// True when `x` are exactly the coordinate jets `x_i = p_i + e_i`.
pub fn is_identity(x: &[Jet]) -> bool {
    x.iter().enumerate().all(|(i, j)| {
        j.nvars == x.len()
            && j.data[1..]
                .iter()
                .enumerate()
                .all(|(k, &v)| if k == i { v == 1.0 } else { v == 0.0 })
            && (j.order >= 1 || x.is_empty())
    })
}

/// Values of a jet point.
pub fn values(x: &[Jet]) -> Vec<f64> {
    x.iter().map(Jet::value).collect()
}

/// Common order of a jet point (0 when empty).
pub fn point_order(x: &[Jet]) -> usize {
    x.iter().map(Jet::order).min().unwrap_or(0)
}

/// Solves `a * X = b` for a row-major `n x n` jet matrix `a` and an
/// `n x m` right-hand side, by Gaussian elimination with partial pivoting
/// on the values. Returns `None` when the value matrix is singular.
pub fn solve(a: &[Jet], b: &[Jet], n: usize, m: usize) -> Option<Vec<Jet>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * m);
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let scale = a.iter().map(|j| j.value().abs()).fold(0.0, f64::max);
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r * n + col].value().abs().total_cmp(&a[s * n + col].value().abs()))?;
        if a[piv * n + col].value().abs() <= 1e-300_f64.max(scale * 1e-15) {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            for k in 0..m {
                b.swap(piv * m + k, col * m + k);
            }
        }
        let inv = a[col * n + col].recip();
        for r in col + 1..n {
            let f = &a[r * n + col] * &inv;
            for k in col..n {
                let t = &f * &a[col * n + k];
                a[r * n + k] = &a[r * n + k] - &t;
            }
            for k in 0..m {
                let t = &f * &b[col * m + k];
                b[r * m + k] = &b[r * m + k] - &t;
            }
        }
    }
    let mut x = b.clone();
    for row in (0..n).rev() {
        let inv = a[row * n + row].recip();
        for k in 0..m {
            let mut acc = b[row * m + k].clone();
            for c in row + 1..n {
                acc = &acc - &(&a[row * n + c] * &x[c * m + k]);
            }
            x[row * m + k] = &acc * &inv;
        }
    }
    Some(x)
}

/// Inverse of a row-major `n x n` jet matrix.
pub fn inverse(a: &[Jet], n: usize) -> Option<Vec<Jet>> {
    let nv = a.first()?.nvars;
    let order = point_order(a);
    let eye: Vec<Jet> = (0..n * n)
        .map(|ij| Jet::constant(nv, order, if ij / n == ij % n { 1.0 } else { 0.0 }))
        .collect();
    solve(a, &eye, n, n)
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| a.zip(b, |x, y| x + y));
binop!(Sub, sub, |a, b| a.zip(b, |x, y| x - y));
binop!(Mul, mul, |a, b| a.product(b));
binop!(Div, div, |a, b| a.product(&b.recip()));

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        *self = &*self + rhs;
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.data[0] += rhs;
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.data[0] += rhs;
        self
    }
}
