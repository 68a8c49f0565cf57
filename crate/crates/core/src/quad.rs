//! Globally adaptive Gauss-Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = r * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    Panel {
        a,
        b,
        value: k * r,
        error: ((k - g) * r).abs(),
    }
}

/// Integrate `f` over `[breaks[0], breaks[last]]`, starting from one panel per
/// consecutive pair of `breaks` and bisecting the worst panel until the summed
/// error estimate is at most `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    abs_tol: f64,
    max_panels: usize,
) -> Result<Integral> {
    let mut heap: BinaryHeap<Panel> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| kronrod(&f, w[0], w[1]))
        .collect();
    let mut total_err: f64 = heap.iter().map(|p| p.error).sum();
    while !(total_err <= abs_tol) {
        if !total_err.is_finite() || heap.len() >= max_panels {
            return Err(Error::Quadrature {
                tol: abs_tol,
                estimate: total_err,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // panel cannot be split further in floating point
            return Err(Error::Quadrature {
                tol: abs_tol,
                estimate: total_err,
            });
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        heap.push(left);
        heap.push(right);
        // re-sum to avoid drift from repeated subtraction
        total_err = heap.iter().map(|p| p.error).sum();
    }
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    Ok(Integral {
        value: panels.iter().map(|p| p.value).sum(),
        error: total_err,
        intervals: panels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, &[0.0, 2.0], 1e-13, 100).unwrap();
        assert!((r.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory() {
        let r = integrate(|x| (40.0 * x).cos(), &[0.0, 1.0, 2.0, 3.0], 1e-12, 10_000).unwrap();
        assert!((r.value - (120.0f64).sin() / 40.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_tail() {
        let r = integrate(|x| (-x * x / 2.0).exp(), &[0.0, 5.0, 40.0], 1e-13, 10_000).unwrap();
        let exact = (std::f64::consts::PI / 2.0).sqrt() * libm::erf(40.0 / 2f64.sqrt());
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn reports_failure() {
        assert!(integrate(|x| 1.0 / x.abs().sqrt(), &[-1.0, 1.0], 1e-14, 50).is_err());
    }
}
