//! Forward-mode jets over the two spatial coordinates.
//!
//! A [`Jet2`] carries a value, its gradient with respect to (x, y), and
//! optionally the symmetric Hessian. Arithmetic applies the chain rule
//! exactly, so evaluating a composite expression on seeded jets yields
//! machine-accurate derivatives of that expression. Second-order tracking is
//! opt-in because most loss variants only need first derivatives and the
//! Hessian triples the work.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::Error;

/// Derivative depth a jet computation is seeded with.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum JetOrder {
    First,
    Second,
}

/// Component selector for reading jets (and tape buffers) uniformly.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Comp {
    Val,
    Gx,
    Gy,
    Hxx,
    Hxy,
    Hyy,
}

impl Comp {
    /// Position of the component in a flattened [val, gx, gy, hxx, hxy, hyy]
    /// layout.
    pub fn idx(self) -> usize {
        match self {
            Comp::Val => 0,
            Comp::Gx => 1,
            Comp::Gy => 2,
            Comp::Hxx => 3,
            Comp::Hxy => 4,
            Comp::Hyy => 5,
        }
    }
}

/// Value plus spatial derivatives at a point.
///
/// `hess` is `[d²/dx², d²/dxdy, d²/dy²]` and is present exactly when the
/// enclosing computation was seeded second-order. Mixing orders in one
/// expression is a programming error and panics.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub val: f64,
    pub gx: f64,
    pub gy: f64,
    pub hess: Option<[f64; 3]>,
}

/// Coordinate jets for a point: unit gradient seeds, zero Hessian.
pub fn jet_seed(x: [f64; 2], order: JetOrder) -> [Jet2; 2] {
    [Jet2::var(x[0], 0, order), Jet2::var(x[1], 1, order)]
}

impl Jet2 {
    /// Seed for the coordinate along `axis` (0 = x, 1 = y).
    pub fn var(val: f64, axis: usize, order: JetOrder) -> Jet2 {
        assert!(axis < 2, "axis must be 0 or 1, got {axis}");
        Jet2 {
            val,
            gx: if axis == 0 { 1.0 } else { 0.0 },
            gy: if axis == 1 { 1.0 } else { 0.0 },
            hess: match order {
                JetOrder::First => None,
                JetOrder::Second => Some([0.0; 3]),
            },
        }
    }

    /// A constant: zero derivatives at the given order.
    pub fn constant(val: f64, order: JetOrder) -> Jet2 {
        Jet2 {
            val,
            gx: 0.0,
            gy: 0.0,
            hess: match order {
                JetOrder::First => None,
                JetOrder::Second => Some([0.0; 3]),
            },
        }
    }

    pub fn order(&self) -> JetOrder {
        if self.hess.is_some() {
            JetOrder::Second
        } else {
            JetOrder::First
        }
    }

    fn hess_or_panic(&self) -> [f64; 3] {
        self.hess
            .expect("second-order component requested from a first-order jet")
    }

    pub fn hxx(&self) -> f64 {
        self.hess_or_panic()[0]
    }

    pub fn hxy(&self) -> f64 {
        self.hess_or_panic()[1]
    }

    pub fn hyy(&self) -> f64 {
        self.hess_or_panic()[2]
    }

    /// Read one component; Hessian components panic on first-order jets.
    pub fn comp(&self, c: Comp) -> f64 {
        match c {
            Comp::Val => self.val,
            Comp::Gx => self.gx,
            Comp::Gy => self.gy,
            Comp::Hxx => self.hxx(),
            Comp::Hxy => self.hxy(),
            Comp::Hyy => self.hyy(),
        }
    }

    fn zip_hess(a: &Jet2, b: &Jet2) -> Option<(Option<[f64; 3]>, Option<[f64; 3]>)> {
        match (a.hess, b.hess) {
            (Some(ha), Some(hb)) => Some((Some(ha), Some(hb))),
            (None, None) => Some((None, None)),
            _ => None,
        }
    }

    fn assert_same_order(a: &Jet2, b: &Jet2) {
        assert!(
            Self::zip_hess(a, b).is_some(),
            "jet order mismatch: one operand carries a Hessian, the other does not"
        );
    }

    pub fn sin(self) -> Jet2 {
        let (s, c) = self.val.sin_cos();
        Jet2 {
            val: s,
            gx: c * self.gx,
            gy: c * self.gy,
            hess: self.hess.map(|h| {
                [
                    c * h[0] - s * self.gx * self.gx,
                    c * h[1] - s * self.gx * self.gy,
                    c * h[2] - s * self.gy * self.gy,
                ]
            }),
        }
    }

    pub fn cos(self) -> Jet2 {
        let (s, c) = self.val.sin_cos();
        Jet2 {
            val: c,
            gx: -s * self.gx,
            gy: -s * self.gy,
            hess: self.hess.map(|h| {
                [
                    -s * h[0] - c * self.gx * self.gx,
                    -s * h[1] - c * self.gx * self.gy,
                    -s * h[2] - c * self.gy * self.gy,
                ]
            }),
        }
    }

    pub fn exp(self) -> Jet2 {
        let e = self.val.exp();
        Jet2 {
            val: e,
            gx: e * self.gx,
            gy: e * self.gy,
            hess: self.hess.map(|h| {
                [
                    e * (h[0] + self.gx * self.gx),
                    e * (h[1] + self.gx * self.gy),
                    e * (h[2] + self.gy * self.gy),
                ]
            }),
        }
    }

    /// Uniform scaling by a plain constant; identical to `self * s`.
    pub fn scale(self, s: f64) -> Jet2 {
        self * s
    }

    /// Division that reports a zero denominator instead of panicking.
    pub fn checked_div(self, rhs: Jet2) -> crate::Result<Jet2> {
        if rhs.val == 0.0 {
            return Err(Error::domain("jet division by a zero-valued jet"));
        }
        Ok(self / rhs)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        Jet2::assert_same_order(&self, &rhs);
        Jet2 {
            val: self.val + rhs.val,
            gx: self.gx + rhs.gx,
            gy: self.gy + rhs.gy,
            hess: self.hess.map(|h| {
                let hb = rhs.hess.unwrap();
                [h[0] + hb[0], h[1] + hb[1], h[2] + hb[2]]
            }),
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        Jet2::assert_same_order(&self, &rhs);
        Jet2 {
            val: self.val - rhs.val,
            gx: self.gx - rhs.gx,
            gy: self.gy - rhs.gy,
            hess: self.hess.map(|h| {
                let hb = rhs.hess.unwrap();
                [h[0] - hb[0], h[1] - hb[1], h[2] - hb[2]]
            }),
        }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        Jet2::assert_same_order(&self, &rhs);
        Jet2 {
            val: self.val * rhs.val,
            gx: self.gx * rhs.val + self.val * rhs.gx,
            gy: self.gy * rhs.val + self.val * rhs.gy,
            hess: self.hess.map(|ha| {
                let hb = rhs.hess.unwrap();
                [
                    ha[0] * rhs.val + 2.0 * self.gx * rhs.gx + self.val * hb[0],
                    ha[1] * rhs.val + self.gx * rhs.gy + self.gy * rhs.gx + self.val * hb[1],
                    ha[2] * rhs.val + 2.0 * self.gy * rhs.gy + self.val * hb[2],
                ]
            }),
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    /// Quotient rule via `r = a/b`, `r' = (a' - r b')/b`,
    /// `r'' = (a'' - r'⊗b' - b'⊗r' - r b'')/b`. Panics on a zero-valued
    /// denominator; use [`Jet2::checked_div`] to get an error instead.
    fn div(self, rhs: Jet2) -> Jet2 {
        Jet2::assert_same_order(&self, &rhs);
        assert!(rhs.val != 0.0, "jet division by a zero-valued jet");
        let inv = 1.0 / rhs.val;
        let val = self.val * inv;
        let gx = (self.gx - val * rhs.gx) * inv;
        let gy = (self.gy - val * rhs.gy) * inv;
        Jet2 {
            val,
            gx,
            gy,
            hess: self.hess.map(|ha| {
                let hb = rhs.hess.unwrap();
                [
                    (ha[0] - 2.0 * gx * rhs.gx - val * hb[0]) * inv,
                    (ha[1] - gx * rhs.gy - gy * rhs.gx - val * hb[1]) * inv,
                    (ha[2] - 2.0 * gy * rhs.gy - val * hb[2]) * inv,
                ]
            }),
        }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 {
            val: -self.val,
            gx: -self.gx,
            gy: -self.gy,
            hess: self.hess.map(|h| [-h[0], -h[1], -h[2]]),
        }
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: f64) -> Jet2 {
        Jet2 { val: self.val + rhs, ..self }
    }
}

impl Sub<f64> for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: f64) -> Jet2 {
        Jet2 { val: self.val - rhs, ..self }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        Jet2 {
            val: self.val * rhs,
            gx: self.gx * rhs,
            gy: self.gy * rhs,
            hess: self.hess.map(|h| [h[0] * rhs, h[1] * rhs, h[2] * rhs]),
        }
    }
}

impl Mul<Jet2> for f64 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        rhs * self
    }
}

impl Add<Jet2> for f64 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        rhs + self
    }
}

impl Sub<Jet2> for f64 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        -rhs + self
    }
}
