//! Truncated multi-directional Taylor values.
//!
//! A [`Jet`] carries a value together with its first and second derivative
//! along each of the coordinate axes `x`, `y`, `t`. Cross partials are not
//! tracked: the second-order entry for an axis is the pure second derivative
//! along that axis.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Coordinate direction of an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X = 0,
    Y = 1,
    T = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::T];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::T => "t",
        }
    }
}

/// The set of directions a jet tracks, and to which order.
///
/// `order[axis]` is 0 (not tracked), 1 (first derivative only) or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Directions {
    order: [u8; 3],
}

impl Directions {
    pub const NONE: Directions = Directions { order: [0; 3] };

    /// Burgers needs `u_x`, `u_xx` and `u_t`.
    pub const BURGERS: Directions = Directions { order: [2, 0, 1] };

    /// Heat needs `u_xx`, `u_yy` and `u_t`.
    pub const HEAT2D: Directions = Directions { order: [2, 2, 1] };

    pub fn new(x: u8, y: u8, t: u8) -> Result<Self> {
        if x > 2 || y > 2 || t > 2 {
            return Err(Error::Usage("direction order must be 0, 1 or 2".into()));
        }
        Ok(Directions { order: [x, y, t] })
    }

    pub fn order(&self, axis: Axis) -> u8 {
        self.order[axis.index()]
    }

    pub fn tracks(&self, axis: Axis) -> bool {
        self.order(axis) > 0
    }

    /// Components tracked besides the value, in canonical order:
    /// for each axis, first then (if tracked) second.
    pub fn components(&self) -> Vec<Component> {
        let mut out = Vec::new();
        for axis in Axis::ALL {
            let o = self.order(axis);
            if o >= 1 {
                out.push(Component::First(axis));
            }
            if o >= 2 {
                out.push(Component::Second(axis));
            }
        }
        out
    }

    /// Total number of scalar channels including the value.
    pub fn width(&self) -> usize {
        1 + self.order.iter().map(|&o| o as usize).sum::<usize>()
    }
}

/// One scalar channel of a jet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Value,
    First(Axis),
    Second(Axis),
}

/// A value with first and second directional derivatives.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub first: [f64; 3],
    pub second: [f64; 3],
    dirs: Directions,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Jet");
        s.field("value", &self.value);
        for axis in Axis::ALL {
            match self.dirs.order(axis) {
                0 => {}
                1 => {
                    s.field(axis.label(), &self.first[axis.index()]);
                }
                _ => {
                    s.field(axis.label(), &(self.first[axis.index()], self.second[axis.index()]));
                }
            }
        }
        s.finish()
    }
}

impl Jet {
    pub fn constant(value: f64, dirs: Directions) -> Self {
        Jet {
            value,
            first: [0.0; 3],
            second: [0.0; 3],
            dirs,
        }
    }

    /// Seed jet for the input coordinate along `axis`: derivative 1 in that
    /// direction, zero elsewhere.
    pub fn seed(value: f64, axis: Axis, dirs: Directions) -> Result<Self> {
        if !dirs.tracks(axis) {
            return Err(Error::Usage(format!(
                "seed axis {} is not part of the direction set",
                axis.label()
            )));
        }
        let mut j = Jet::constant(value, dirs);
        j.first[axis.index()] = 1.0;
        Ok(j)
    }

    pub fn directions(&self) -> Directions {
        self.dirs
    }

    pub fn component(&self, c: Component) -> Result<f64> {
        match c {
            Component::Value => Ok(self.value),
            Component::First(a) if self.dirs.order(a) >= 1 => Ok(self.first[a.index()]),
            Component::Second(a) if self.dirs.order(a) >= 2 => Ok(self.second[a.index()]),
            _ => Err(Error::Usage(format!("jet does not carry {c:?}"))),
        }
    }

    /// Derivative along `axis` of order 1.
    pub fn d1(&self, axis: Axis) -> f64 {
        self.first[axis.index()]
    }

    pub fn d2(&self, axis: Axis) -> f64 {
        self.second[axis.index()]
    }

    /// Apply a scalar function given its value and first two derivatives at
    /// `self.value`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet::constant(f0, self.dirs);
        for i in 0..3 {
            let a1 = self.first[i];
            out.first[i] = f1 * a1;
            out.second[i] = f1 * self.second[i] + f2 * a1 * a1;
        }
        out.mask();
        out
    }

    pub fn scale(&self, k: f64) -> Jet {
        let mut out = *self;
        out.value *= k;
        for i in 0..3 {
            out.first[i] *= k;
            out.second[i] *= k;
        }
        out
    }

    pub fn tanh(&self) -> Jet {
        let y = self.value.tanh();
        let s = 1.0 - y * y;
        self.chain(y, s, -2.0 * y * s)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn powi(&self, n: i32) -> Jet {
        let x = self.value;
        let nf = n as f64;
        let f1 = if n == 0 { 0.0 } else { nf * x.powi(n - 1) };
        let f2 = if n == 0 || n == 1 {
            0.0
        } else {
            nf * (nf - 1.0) * x.powi(n - 2)
        };
        self.chain(x.powi(n), f1, f2)
    }

    pub fn recip(&self) -> Result<Jet> {
        if self.value == 0.0 {
            return Err(Error::Domain("reciprocal of a jet with value 0".into()));
        }
        let r = 1.0 / self.value;
        Ok(self.chain(r, -r * r, 2.0 * r * r * r))
    }

    pub fn checked_div(&self, rhs: &Jet) -> Result<Jet> {
        same_dirs(self, rhs)?;
        Ok(*self * rhs.recip()?)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.first.iter().all(|v| v.is_finite()) && self.second.iter().all(|v| v.is_finite())
    }

    // Zero the channels outside the direction set so untracked entries never
    // pick up garbage from chain-rule arithmetic.
    fn mask(&mut self) {
        for axis in Axis::ALL {
            let o = self.dirs.order(axis);
            if o < 1 {
                self.first[axis.index()] = 0.0;
            }
            if o < 2 {
                self.second[axis.index()] = 0.0;
            }
        }
    }
}

fn same_dirs(a: &Jet, b: &Jet) -> Result<()> {
    if a.dirs != b.dirs {
        return Err(Error::Usage(format!(
            "mismatched direction sets: {:?} vs {:?}",
            a.dirs, b.dirs
        )));
    }
    Ok(())
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.dirs, rhs.dirs);
        let mut out = self;
        out.value += rhs.value;
        for i in 0..3 {
            out.first[i] += rhs.first[i];
            out.second[i] += rhs.second[i];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.dirs, rhs.dirs);
        let mut out = Jet::constant(self.value * rhs.value, self.dirs);
        for i in 0..3 {
            let (f, f1, f2) = (self.value, self.first[i], self.second[i]);
            let (g, g1, g2) = (rhs.value, rhs.first[i], rhs.second[i]);
            out.first[i] = f1 * g + f * g1;
            out.second[i] = f2 * g + 2.0 * f1 * g1 + f * g2;
        }
        out
    }
}

/// Elementary operations understood by [`jet_apply`] and the tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale(f64),
    Tanh,
    Sin,
    Cos,
    Exp,
    Powi(i32),
}

impl ElementaryOp {
    pub fn arity(&self) -> usize {
        match self {
            ElementaryOp::Add | ElementaryOp::Sub | ElementaryOp::Mul | ElementaryOp::Div => 2,
            _ => 1,
        }
    }
}

/// Apply `op` to `args` with full precondition checking.
pub fn jet_apply(op: ElementaryOp, args: &[Jet]) -> Result<Jet> {
    if args.len() != op.arity() {
        return Err(Error::Usage(format!(
            "{op:?} expects {} argument(s), got {}",
            op.arity(),
            args.len()
        )));
    }
    if args.len() == 2 {
        same_dirs(&args[0], &args[1])?;
    }
    let a = args[0];
    Ok(match op {
        ElementaryOp::Add => a + args[1],
        ElementaryOp::Sub => a - args[1],
        ElementaryOp::Mul => a * args[1],
        ElementaryOp::Div => a.checked_div(&args[1])?,
        ElementaryOp::Neg => -a,
        ElementaryOp::Scale(k) => a.scale(k),
        ElementaryOp::Tanh => a.tanh(),
        ElementaryOp::Sin => a.sin(),
        ElementaryOp::Cos => a.cos(),
        ElementaryOp::Exp => a.exp(),
        ElementaryOp::Powi(n) => a.powi(n),
    })
}
