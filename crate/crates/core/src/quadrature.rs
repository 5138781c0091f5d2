//! Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{param, Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub relative: f64,
    pub absolute: f64,
    /// Maximum number of interval bisections.
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            relative: 1e-9,
            absolute: 0.0,
            max_subdivisions: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rule<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let diff = ((kronrod - gauss) * h).abs();
    // QUADPACK-style error scaling; pessimistic for smooth integrands
    let error = if diff == 0.0 {
        0.0
    } else {
        diff * (200.0 * diff / value.abs().max(f64::MIN_POSITIVE))
            .powf(1.5)
            .min(1.0)
    };
    Piece {
        a,
        b,
        value,
        error: error.max(diff * 1e-3),
    }
}

/// Integrates `f` over `[a, b]`, bisecting the piece with the largest error
/// estimate until the total error is below `max(absolute, relative |I|)`.
/// Endpoints are never evaluated.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(param("interval", format!("[{a}, {b}] must be finite")));
    }
    if !(tol.relative >= 0.0 && tol.absolute >= 0.0) || (tol.relative == 0.0 && tol.absolute == 0.0)
    {
        return Err(param(
            "tolerance",
            "needs a positive relative or absolute tolerance",
        ));
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let first = rule(&mut f, a, b);
    let mut evaluations = 15;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut splits = 0;
    loop {
        let target = tol.absolute.max(tol.relative * value.abs());
        if !value.is_finite() {
            return Err(Error::Quadrature {
                achieved: f64::NAN,
                requested: target,
            });
        }
        if error <= target {
            return Ok(Estimate {
                value,
                error,
                evaluations,
            });
        }
        if splits == tol.max_subdivisions {
            return Err(Error::Quadrature {
                achieved: error,
                requested: target,
            });
        }
        let worst = heap.pop().expect("heap holds at least one piece");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a.min(worst.b) && mid < worst.a.max(worst.b)) {
            // interval exhausted at machine precision
            return Err(Error::Quadrature {
                achieved: error,
                requested: target,
            });
        }
        let left = rule(&mut f, worst.a, mid);
        let right = rule(&mut f, mid, worst.b);
        evaluations += 30;
        splits += 1;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if splits % 64 == 0 {
            // resum to limit drift from the incremental updates
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let e = integrate(|x| x.powi(9) - 3.0 * x * x, -1.0, 2.0, Tolerance::default()).unwrap();
        let want = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0);
        assert!((e.value - want).abs() < 1e-12);
        assert_eq!(e.evaluations, 15);
    }

    #[test]
    fn endpoint_singularity_and_reversed_interval() {
        let tol = Tolerance {
            relative: 1e-10,
            ..Tolerance::default()
        };
        let e = integrate(|x| x.powf(-0.5), 0.0, 1.0, tol).unwrap();
        assert!((e.value - 2.0).abs() < 1e-9, "{}", e.value);
        let r = integrate(|x| x.cos(), 1.0, 0.0, tol).unwrap();
        assert!((r.value + 1f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn budget_exhaustion_reports_achieved_error() {
        let tol = Tolerance {
            relative: 1e-14,
            absolute: 0.0,
            max_subdivisions: 3,
        };
        match integrate(|x| x.powf(-0.9), 0.0, 1.0, tol) {
            Err(Error::Quadrature {
                achieved,
                requested,
            }) => assert!(achieved > requested),
            other => panic!("{other:?}"),
        }
    }
}
