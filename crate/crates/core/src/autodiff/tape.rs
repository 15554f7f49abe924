//! Reverse-mode tape whose node payloads are [`Jet`]s.
//!
//! Every node records the full jet produced by its operation. The reverse
//! sweep propagates an adjoint for each jet channel, so a loss that depends on
//! `u_xx` differentiates exactly through the second-order chain rule.

use super::jet::{Axis, Component, Directions, Jet};
use crate::error::{Error, Result};

/// Index of a node on a [`Tape`].
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
enum TapeOp {
    Param,
    Input,
    Const,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// Unary map with derivatives f', f'', f''' of the scalar function at the
    /// operand value.
    Unary(NodeId, [f64; 3]),
    /// Lift one channel of the operand into the value of a constant jet.
    Extract(NodeId, Component),
}

/// Adjoint with one entry per jet channel.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct JetAdjoint {
    value: f64,
    first: [f64; 3],
    second: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Tape {
    dirs: Directions,
    ops: Vec<TapeOp>,
    values: Vec<Jet>,
    adjoints: Vec<JetAdjoint>,
}

impl Tape {
    pub fn new(dirs: Directions) -> Self {
        Tape {
            dirs,
            ops: Vec::new(),
            values: Vec::new(),
            adjoints: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn directions(&self) -> Directions {
        self.dirs
    }

    pub fn value(&self, id: NodeId) -> &Jet {
        &self.values[id]
    }

    fn push(&mut self, op: TapeOp, value: Jet) -> NodeId {
        self.ops.push(op);
        self.values.push(value);
        self.ops.len() - 1
    }

    /// A trainable leaf. Parameters do not depend on the inputs.
    pub fn param(&mut self, value: f64) -> NodeId {
        self.push(TapeOp::Param, Jet::constant(value, self.dirs))
    }

    /// An input coordinate seeded along `axis`. Axes outside the tape's
    /// direction set become constants.
    pub fn input(&mut self, value: f64, axis: Axis) -> NodeId {
        let jet = Jet::seed(value, axis, self.dirs).unwrap_or(Jet::constant(value, self.dirs));
        self.push(TapeOp::Input, jet)
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.push(TapeOp::Const, Jet::constant(value, self.dirs))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.values[a] + self.values[b];
        self.push(TapeOp::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.values[a] - self.values[b];
        self.push(TapeOp::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.values[a] * self.values[b];
        self.push(TapeOp::Mul(a, b), v)
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let v = self.values[a].scale(k);
        self.push(TapeOp::Scale(a, k), v)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.scale(a, -1.0)
    }

    fn unary(&mut self, a: NodeId, f: [f64; 4]) -> NodeId {
        let v = self.values[a].chain(f[0], f[1], f[2]);
        self.push(TapeOp::Unary(a, [f[1], f[2], f[3]]), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let y = self.values[a].value.tanh();
        let s = 1.0 - y * y;
        let f2 = -2.0 * y * s;
        let f3 = -2.0 * s * s + 4.0 * y * y * s;
        self.unary(a, [y, s, f2, f3])
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        let (s, c) = self.values[a].value.sin_cos();
        self.unary(a, [s, c, -s, -c])
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        let (s, c) = self.values[a].value.sin_cos();
        self.unary(a, [c, -s, -c, s])
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let e = self.values[a].value.exp();
        self.unary(a, [e, e, e, e])
    }

    pub fn powi(&mut self, a: NodeId, n: i32) -> NodeId {
        let x = self.values[a].value;
        let nf = n as f64;
        let p = |k: i32, c: f64| if c == 0.0 { 0.0 } else { c * x.powi(n - k) };
        self.unary(
            a,
            [
                x.powi(n),
                p(1, nf),
                p(2, nf * (nf - 1.0)),
                p(3, nf * (nf - 1.0) * (nf - 2.0)),
            ],
        )
    }

    pub fn recip(&mut self, a: NodeId) -> Result<NodeId> {
        let x = self.values[a].value;
        if x == 0.0 {
            return Err(Error::Domain("reciprocal of a jet with value 0".into()));
        }
        let r = 1.0 / x;
        Ok(self.unary(a, [r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let r = self.recip(b)?;
        Ok(self.mul(a, r))
    }

    /// New node whose value is channel `c` of `a` (derivative channels zero).
    pub fn extract(&mut self, a: NodeId, c: Component) -> Result<NodeId> {
        let v = self.values[a].component(c)?;
        Ok(self.push(TapeOp::Extract(a, c), Jet::constant(v, self.dirs)))
    }

    /// Reverse sweep seeded with d(output.value) = 1.
    ///
    /// Adjoints are reset before every sweep, so repeated calls are
    /// idempotent.
    pub fn backward(&mut self, output: NodeId) -> Result<()> {
        if output >= self.ops.len() {
            return Err(Error::Usage(format!(
                "node {output} out of range (tape has {} nodes)",
                self.ops.len()
            )));
        }
        self.adjoints.clear();
        self.adjoints.resize(output + 1, JetAdjoint::default());
        self.adjoints[output].value = 1.0;

        for id in (0..=output).rev() {
            let bar = self.adjoints[id];
            if bar == JetAdjoint::default() {
                continue;
            }
            match self.ops[id] {
                TapeOp::Param | TapeOp::Input | TapeOp::Const => {}
                TapeOp::Add(a, b) => {
                    self.accumulate(a, &bar, 1.0);
                    self.accumulate(b, &bar, 1.0);
                }
                TapeOp::Sub(a, b) => {
                    self.accumulate(a, &bar, 1.0);
                    self.accumulate(b, &bar, -1.0);
                }
                TapeOp::Scale(a, k) => self.accumulate(a, &bar, k),
                TapeOp::Mul(a, b) => {
                    let (fa, fb) = (self.values[a], self.values[b]);
                    self.adjoints[a] = add_adj(self.adjoints[a], mul_partner_adjoint(&bar, &fb));
                    self.adjoints[b] = add_adj(self.adjoints[b], mul_partner_adjoint(&bar, &fa));
                }
                TapeOp::Unary(a, [f1, f2, f3]) => {
                    let x = self.values[a];
                    let mut g = JetAdjoint {
                        value: bar.value * f1,
                        ..Default::default()
                    };
                    for i in 0..3 {
                        let (x1, x2) = (x.first[i], x.second[i]);
                        g.value += bar.first[i] * f2 * x1 + bar.second[i] * (f2 * x2 + f3 * x1 * x1);
                        g.first[i] = bar.first[i] * f1 + bar.second[i] * 2.0 * f2 * x1;
                        g.second[i] = bar.second[i] * f1;
                    }
                    self.adjoints[a] = add_adj(self.adjoints[a], g);
                }
                TapeOp::Extract(a, c) => {
                    let mut g = JetAdjoint::default();
                    match c {
                        Component::Value => g.value = bar.value,
                        Component::First(ax) => g.first[ax.index()] = bar.value,
                        Component::Second(ax) => g.second[ax.index()] = bar.value,
                    }
                    self.adjoints[a] = add_adj(self.adjoints[a], g);
                }
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, to: NodeId, bar: &JetAdjoint, k: f64) {
        let cur = &mut self.adjoints[to];
        cur.value += k * bar.value;
        for i in 0..3 {
            cur.first[i] += k * bar.first[i];
            cur.second[i] += k * bar.second[i];
        }
    }

    /// Adjoint of the value channel of `id` after the last sweep.
    pub fn adjoint(&self, id: NodeId) -> f64 {
        self.adjoints.get(id).map(|a| a.value).unwrap_or(0.0)
    }

    /// d(loss.value)/d(param) for every requested parameter node.
    pub fn grad_wrt_params(&mut self, loss: NodeId, params: &[NodeId]) -> Result<Vec<f64>> {
        self.backward(loss)?;
        params
            .iter()
            .map(|&p| match self.ops.get(p) {
                Some(TapeOp::Param) => Ok(self.adjoint(p)),
                Some(_) => Err(Error::Usage(format!("node {p} is not a parameter"))),
                None => Err(Error::Usage(format!("node {p} out of range"))),
            })
            .collect()
    }
}

// Adjoint contribution to one factor of a product given the other factor.
fn mul_partner_adjoint(bar: &JetAdjoint, other: &Jet) -> JetAdjoint {
    let mut g = JetAdjoint {
        value: bar.value * other.value,
        ..Default::default()
    };
    for i in 0..3 {
        g.value += bar.first[i] * other.first[i] + bar.second[i] * other.second[i];
        g.first[i] = bar.first[i] * other.value + bar.second[i] * 2.0 * other.first[i];
        g.second[i] = bar.second[i] * other.value;
    }
    g
}

fn add_adj(mut a: JetAdjoint, b: JetAdjoint) -> JetAdjoint {
    a.value += b.value;
    for i in 0..3 {
        a.first[i] += b.first[i];
        a.second[i] += b.second[i];
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_gradient() {
        let mut tape = Tape::new(Directions::new(2, 0, 0).unwrap());
        let w = tape.param(3.0);
        let x = tape.input(2.0, Axis::X);
        let loss = tape.mul(w, x);
        assert_eq!(tape.grad_wrt_params(loss, &[w]).unwrap(), vec![2.0]);
    }

    #[test]
    fn squared_input_derivative() {
        let mut tape = Tape::new(Directions::new(2, 0, 0).unwrap());
        let w = tape.param(3.0);
        let x = tape.input(2.0, Axis::X);
        let u = tape.mul(w, x);
        let ux = tape.extract(u, Component::First(Axis::X)).unwrap();
        assert_eq!(tape.value(ux).value, 3.0);
        let loss = tape.mul(ux, ux);
        assert_eq!(tape.grad_wrt_params(loss, &[w]).unwrap(), vec![6.0]);
    }

    #[test]
    fn backward_is_idempotent() {
        let mut tape = Tape::new(Directions::BURGERS);
        let w = tape.param(0.4);
        let x = tape.input(0.3, Axis::X);
        let z = tape.mul(w, x);
        let h = tape.tanh(z);
        let hxx = tape.extract(h, Component::Second(Axis::X)).unwrap();
        let first = tape.grad_wrt_params(hxx, &[w]).unwrap();
        let second = tape.grad_wrt_params(hxx, &[w]).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn out_of_range_loss_is_usage_error() {
        let mut tape = Tape::new(Directions::BURGERS);
        let w = tape.param(1.0);
        assert!(matches!(tape.grad_wrt_params(7, &[w]), Err(Error::Usage(_))));
        let c = tape.constant(1.0);
        assert!(tape.grad_wrt_params(c, &[c]).is_err());
    }

    #[test]
    fn node_order_is_topological() {
        let mut tape = Tape::new(Directions::BURGERS);
        let a = tape.param(1.0);
        let b = tape.input(0.5, Axis::T);
        let c = tape.mul(a, b);
        let d = tape.sin(c);
        assert!(a < c && b < c && c < d);
        assert_eq!(tape.len(), 4);
    }

    #[test]
    fn division_by_zero_node() {
        let mut tape = Tape::new(Directions::BURGERS);
        let a = tape.param(1.0);
        let z = tape.constant(0.0);
        assert!(matches!(tape.div(a, z), Err(Error::Domain(_))));
    }
}
