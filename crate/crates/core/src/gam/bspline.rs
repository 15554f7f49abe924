//! Clamped B-spline bases on a uniform knot grid.

use crate::error::{usage, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    degree: usize,
    /// Full knot vector: `degree + 1` copies of each end knot around the
    /// uniform interior knots.
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// `n_basis` cubic (or `degree`) B-splines spanning `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, n_basis: usize, degree: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return usage(format!("invalid spline range [{lo}, {hi}]"));
        }
        if n_basis < degree + 1 {
            return usage(format!(
                "need at least {} basis functions for degree {degree}",
                degree + 1
            ));
        }
        let segments = n_basis - degree;
        let mut knots = Vec::with_capacity(n_basis + degree + 1);
        knots.extend(std::iter::repeat_n(lo, degree));
        for i in 0..=segments {
            knots.push(if i == segments {
                hi
            } else {
                lo + (hi - lo) * i as f64 / segments as f64
            });
        }
        knots.extend(std::iter::repeat_n(hi, degree));
        Ok(BSplineBasis { degree, knots })
    }

    pub fn from_knots(knots: Vec<f64>, degree: usize) -> Result<Self> {
        if knots.len() < 2 * (degree + 1) || knots.windows(2).any(|w| w[1] < w[0]) {
            return usage("knot vector must be non-decreasing with repeated end knots");
        }
        let lo = knots[0];
        let hi = knots[knots.len() - 1];
        if !(lo < hi)
            || knots[..=degree].iter().any(|&k| k != lo)
            || knots[knots.len() - degree - 1..].iter().any(|&k| k != hi)
        {
            return usage("knot vector must be clamped at both ends");
        }
        Ok(BSplineBasis { degree, knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Distinct knots, strictly ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if b.last() != Some(&k) {
                b.push(k);
            }
        }
        b
    }

    /// Values of all basis functions at `x` (clamped into range).
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let (start, vals) = self.eval_nonzero(x);
        out[start..start + vals.len()].copy_from_slice(&vals);
        out
    }

    /// The `degree + 1` possibly-nonzero basis values at `x` and the index of
    /// the first one (de Boor's recursion).
    pub fn eval_nonzero(&self, x: f64) -> (usize, Vec<f64>) {
        let p = self.degree;
        let (lo, hi) = self.range();
        let x = x.clamp(lo, hi);
        let t = &self.knots;
        // span index: t[span] <= x < t[span + 1], last span closed on the right
        let last = self.len() - 1;
        let span = if x >= hi {
            last
        } else {
            let mut s = p;
            while s < last && t[s + 1] <= x {
                s += 1;
            }
            s
        };
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        (span - p, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        let b = BSplineBasis::uniform(-1.0, 1.0, 12, 3).unwrap();
        for i in 0..=100 {
            let x = -1.0 + 2.0 * i as f64 / 100.0;
            let s: f64 = b.eval(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "x={x} sum={s}");
        }
    }

    #[test]
    fn clamped_ends() {
        let b = BSplineBasis::uniform(0.0, 1.0, 8, 3).unwrap();
        assert_eq!(b.len(), 8);
        let v0 = b.eval(0.0);
        assert!((v0[0] - 1.0).abs() < 1e-15);
        let v1 = b.eval(1.0);
        assert!((v1[7] - 1.0).abs() < 1e-15);
        // out-of-range clamps
        assert_eq!(b.eval(-3.0), v0);
        assert_eq!(b.eval(2.0), v1);
        assert_eq!(b.knots().len(), 12);
        assert!(b.breakpoints().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BSplineBasis::uniform(1.0, 1.0, 8, 3).is_err());
        assert!(BSplineBasis::uniform(0.0, 1.0, 3, 3).is_err());
        assert!(BSplineBasis::from_knots(vec![0.0, 0.0, 1.0, 1.0], 3).is_err());
    }

    #[test]
    fn from_knots_round_trip() {
        let b = BSplineBasis::uniform(-0.5, 2.0, 10, 3).unwrap();
        let c = BSplineBasis::from_knots(b.knots().to_vec(), 3).unwrap();
        assert_eq!(b, c);
    }
}
