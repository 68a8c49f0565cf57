//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;

use timechange_cn::heat::{dirac_initial, SolutionField};
use timechange_cn::mesh::build_space_grid;
use timechange_cn::tridiag::{step_heat_timechanged, Closure};

/// Direct DFT `h sum_j u_j exp(-i s x_j)` over the distinct nodes of a
/// periodic field, evaluated without any library transform code.
pub fn direct_dft(field: &SolutionField, s: f64) -> (f64, f64) {
    let g = field.grid();
    let m = g.intervals();
    let h = g.h();
    let mut re = 0.0;
    let mut im = 0.0;
    for j in 0..m {
        let x = g.x_min() + j as f64 * h;
        re += h * field.values()[j] * (s * x).cos();
        im -= h * field.values()[j] * (s * x).sin();
    }
    (re, im)
}

/// Product of the per-step amplification factors, evaluated factor by factor.
pub fn naive_symbol(steps: usize, xi: f64) -> f64 {
    let mut v = 1.0 / (1.0 + steps as f64 * xi);
    for m in 1..steps {
        v *= (1.0 - m as f64 * xi) / (1.0 + m as f64 * xi);
    }
    v
}

/// Periodic Dirac solution on `[-10, 10]` with `intervals` cells after `steps`
/// time-changed steps.
pub fn periodic_dirac(steps: usize, lambda: f64, intervals: usize) -> SolutionField {
    let grid = build_space_grid(-10.0, 10.0, intervals).unwrap();
    let mut u = dirac_initial(&grid).unwrap();
    for n in 0..steps {
        u = step_heat_timechanged(&u, n, lambda, Closure::Periodic).unwrap();
    }
    u
}

/// Largest `|DFT - symbol|` over the discrete frequencies `2 pi p / L`.
pub fn symbol_oracle_deviation(steps: usize, lambda: f64, intervals: usize) -> f64 {
    let u = periodic_dirac(steps, lambda, intervals);
    let h = u.grid().h();
    let len = 20.0;
    let mut worst = 0.0f64;
    for p in 0..=intervals / 2 {
        let s = 2.0 * PI * p as f64 / len;
        let (re, im) = direct_dft(&u, s);
        let sn = (0.5 * s * h).sin();
        let xi = 2.0 * lambda * lambda * sn * sn;
        let sym = timechange_cn::symbol::symbol_product(steps, xi);
        worst = worst.max((re - sym).hypot(im));
    }
    worst
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Normal CDF by Simpson integration of the density, independent of erfc.
pub fn normal_cdf_simpson(x: f64) -> f64 {
    let n = 20_000;
    let a = 0.0;
    let b = x;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    0.5 + s * h / 3.0
}
