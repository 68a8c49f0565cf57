//! Fourier-domain analysis of the time-changed scheme.
//!
//! With Dirac data the discrete transform after `N` steps is the product
//!
//! ```text
//! U^N(s) = prod_{m=1}^{N-1} (1 - m xi) / prod_{m=1}^{N} (1 + m xi),   xi = 2 l^2 sin^2(s h / 2)
//! ```
//!
//! and the error against the exact transform `exp(-s^2/2)` at `t = 1` splits
//! into four wave-number regimes bounded by the zeros `xi = 1/m` of the
//! product. Everything here assumes `T = 1`, so `N = 1/k = 1/(lambda h)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{invalid, Error, Result};
use crate::heat::dirac_initial;
use crate::mesh::build_space_grid;
use crate::quad;
use crate::tridiag::{heat_operator, Closure};

/// `xi = 2 lambda^2 sin^2(s h / 2)`.
pub fn xi(s: f64, h: f64, lambda: f64) -> f64 {
    let sn = (0.5 * s * h).sin();
    2.0 * lambda * lambda * sn * sn
}

/// Wave number at which the symbol has the zero `xi = 1/n`, if it exists.
pub fn zero_wave_number(n: usize, h: f64, lambda: f64) -> Option<f64> {
    let arg = 1.0 / (2.0 * lambda * lambda * n as f64);
    if arg > 1.0 + 1e-12 {
        return None;
    }
    Some(2.0 / h * arg.min(1.0).sqrt().asin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolQuery {
    pub s: f64,
    pub h: f64,
    pub lambda: f64,
    pub steps: usize,
}

impl SymbolQuery {
    pub fn new(s: f64, h: f64, lambda: f64, steps: usize) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid("h", format!("must be positive, got {h}")));
        }
        if !(lambda > 0.0) {
            return Err(invalid("lambda", format!("must be positive, got {lambda}")));
        }
        if steps == 0 {
            return Err(invalid("N", "need at least one step"));
        }
        if s.abs() > PI / h * (1.0 + 1e-12) {
            return Err(Error::OutOfRange {
                value: s,
                range: format!("[-pi/h, pi/h] = [-{0}, {0}]", PI / h),
            });
        }
        Ok(Self {
            s,
            h,
            lambda,
            steps,
        })
    }

    pub fn xi(&self) -> f64 {
        xi(self.s, self.h, self.lambda)
    }
}

/// Sign and natural log of `|prod (1 - m xi)| / prod (1 + m xi)` over the
/// given ranges, or `None` if a numerator factor vanishes.
fn log_factors(
    xi: f64,
    numerators: std::ops::Range<usize>,
    denominators: std::ops::RangeInclusive<usize>,
) -> Option<(f64, f64)> {
    let mut sign = 1.0;
    let mut log = 0.0;
    for m in numerators {
        let t = m as f64 * xi;
        if t == 1.0 {
            return None;
        }
        if t < 1.0 {
            log += (-t).ln_1p();
        } else {
            sign = -sign;
            log += (t - 1.0).ln();
        }
    }
    for m in denominators {
        log -= (m as f64 * xi).ln_1p();
    }
    Some((sign, log))
}

/// The `N`-step symbol product, evaluated in sign/log-magnitude form.
pub fn symbol_product(steps: usize, xi: f64) -> f64 {
    match log_factors(xi, 1..steps, 1..=steps) {
        Some((sign, log)) => sign * log.exp(),
        None => 0.0,
    }
}

/// The part of `|U^N|` that depends on `N` at fixed `xi`:
/// `prod_{m=m*+1}^{N-1} |1 - m xi| / (1 + m xi)` times `1 / (1 + N xi)`.
///
/// Away from the zeros of the first `m*` factors, `|U^N|` is this tail times
/// an `N`-independent factor, so both share the same `h`-exponent.
pub fn regime4_tail_magnitude(steps: usize, xi: f64, m_star: usize) -> f64 {
    if steps <= m_star {
        return 1.0 / (1.0 + steps as f64 * xi);
    }
    let mut log = -(steps as f64 * xi).ln_1p();
    for m in m_star + 1..steps {
        let t = m as f64 * xi;
        log += (1.0 - t).abs().ln() - t.ln_1p();
    }
    log.exp()
}

/// Transform of the exact solution at `t = 1`.
pub fn exact_transform(s: f64) -> f64 {
    (-0.5 * s * s).exp()
}

pub fn transform_error(q: &SymbolQuery) -> f64 {
    symbol_product(q.steps, q.xi()) - exact_transform(q.s)
}

/// Time-stepping family for the low-wave-number error coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowWaveScheme {
    TimeChanged,
    Rannacher,
}

/// Leading `h^2` term of the transform error in regime I.
pub fn regime1_error_prediction(s: f64, lambda: f64, h: f64, scheme: LowWaveScheme) -> f64 {
    let (s2, l2) = (s * s, lambda * lambda);
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    let sixth = match scheme {
        LowWaveScheme::TimeChanged => l2 * s6 / 48.0,
        LowWaveScheme::Rannacher => l2 * s6 / 96.0,
    };
    exact_transform(s) * (s4 / 24.0 - sixth + l2 * s4 / 8.0) * h * h
}

/// Smallest `m >= 1` with `1/m <= 2 lambda^2`. An exactly integral `1/(2 lambda^2)`
/// (to 1e-9 relative, which absorbs rounding in e.g. `lambda = 1/sqrt(2)`) is kept.
pub fn m_star(lambda: f64) -> usize {
    let v = 1.0 / (2.0 * lambda * lambda);
    let nearest = v.round();
    let m = if (v - nearest).abs() <= 1e-9 * v {
        nearest
    } else {
        v.ceil()
    };
    (m as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    I,
    II,
    III,
    IV,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::I, Regime::II, Regime::III, Regime::IV];

    pub fn label(&self) -> &'static str {
        match self {
            Regime::I => "I",
            Regime::II => "II",
            Regime::III => "III",
            Regime::IV => "IV",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeBounds {
    pub regime: Regime,
    pub s_min: f64,
    pub s_max: f64,
    pub xi_min: f64,
    pub xi_max: f64,
}

/// Partition of `[0, pi/h]` into the four wave-number regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimePartition {
    pub h: f64,
    pub lambda: f64,
    pub r: f64,
    pub steps: usize,
    pub m_star: usize,
    /// `h^-r`
    pub s_i_max: f64,
    /// `s_N`
    pub s_ii_max: f64,
    /// `s_{m*}`
    pub s_iii_max: f64,
    /// `pi / h`
    pub s_iv_max: f64,
}

impl RegimePartition {
    pub fn new(h: f64, lambda: f64, r: f64, steps: usize) -> Result<Self> {
        if !(r > 0.0 && r < 1.0 / 3.0) {
            return Err(invalid("r", format!("must lie in (0, 1/3), got {r}")));
        }
        if !(h > 0.0 && lambda > 0.0) {
            return Err(invalid("h, lambda", "must be positive"));
        }
        let m_star = m_star(lambda);
        if steps < m_star {
            return Err(Error::RegimeOrdering {
                h,
                detail: format!("N = {steps} below m* = {m_star}"),
            });
        }
        let s_i_max = h.powf(-r);
        let s_ii_max = zero_wave_number(steps, h, lambda).expect("steps >= m*");
        let s_iii_max = zero_wave_number(m_star, h, lambda).expect("m* has a zero");
        let s_iv_max = PI / h;
        if !(s_i_max <= s_ii_max) {
            return Err(Error::RegimeOrdering {
                h,
                detail: format!("h^-r = {s_i_max} exceeds s_N = {s_ii_max}"),
            });
        }
        if !(s_ii_max <= s_iii_max && s_iii_max <= s_iv_max * (1.0 + 1e-12)) {
            return Err(Error::RegimeOrdering {
                h,
                detail: format!("s_N = {s_ii_max}, s_m* = {s_iii_max}, pi/h = {s_iv_max}"),
            });
        }
        Ok(Self {
            h,
            lambda,
            r,
            steps,
            m_star,
            s_i_max,
            s_ii_max,
            s_iii_max: s_iii_max.min(s_iv_max),
            s_iv_max,
        })
    }

    pub fn bounds(&self) -> [RegimeBounds; 4] {
        let x = |s: f64| xi(s, self.h, self.lambda);
        let two_l2 = 2.0 * self.lambda * self.lambda;
        let edges = [
            0.0,
            self.s_i_max,
            self.s_ii_max,
            self.s_iii_max,
            self.s_iv_max,
        ];
        let xi_edges = [
            0.0,
            x(self.s_i_max),
            1.0 / self.steps as f64,
            (1.0 / self.m_star as f64).min(two_l2),
            two_l2,
        ];
        let mut out = [RegimeBounds {
            regime: Regime::I,
            s_min: 0.0,
            s_max: 0.0,
            xi_min: 0.0,
            xi_max: 0.0,
        }; 4];
        for (i, regime) in Regime::ALL.into_iter().enumerate() {
            out[i] = RegimeBounds {
                regime,
                s_min: edges[i],
                s_max: edges[i + 1],
                xi_min: xi_edges[i],
                xi_max: xi_edges[i + 1],
            };
        }
        out
    }

    pub fn regime_of(&self, s: f64) -> Regime {
        let s = s.abs();
        if s < self.s_i_max {
            Regime::I
        } else if s < self.s_ii_max {
            Regime::II
        } else if s <= self.s_iii_max {
            Regime::III
        } else {
            Regime::IV
        }
    }
}

/// Regime partition for `T = 1`, where `N = 1/(lambda h)`.
pub fn regime_partition(h: f64, lambda: f64, r: f64) -> Result<RegimePartition> {
    let steps = (1.0 / (lambda * h)).round().max(1.0) as usize;
    RegimePartition::new(h, lambda, r, steps)
}

/// Default regime-I exponent for diagnostic partitions.
pub const DEFAULT_R: f64 = 0.3;

/// Bound `W_{N,m} = ((m+1)!)^2 (N-m-1)! / ((2m+2) (N+m)!)` on `|U^N|` for
/// `xi` in `[1/(m+1), 1/m]`, via log-gamma.
pub fn regime3_bound(steps: usize, m: usize) -> Result<f64> {
    if m == 0 || m + 1 > steps {
        return Err(Error::OutOfRange {
            value: m as f64,
            range: format!("[1, {}]", steps.saturating_sub(1)),
        });
    }
    let lg = |v: usize| libm::lgamma(v as f64 + 1.0);
    let log = 2.0 * lg(m + 1) + lg(steps - m - 1) - ((2 * m + 2) as f64).ln() - lg(steps + m);
    Ok(log.exp())
}

/// Predicted `h`-exponent `1 + 2/xi` of `|U^N|` at fixed `xi` in regime IV.
pub fn regime4_exponent(xi: f64, lambda: f64) -> Result<f64> {
    let lo = 1.0 / m_star(lambda) as f64;
    let hi = 2.0 * lambda * lambda;
    let slack = 1e-12 * hi;
    if !(xi >= lo - slack && xi <= hi + slack) {
        return Err(Error::OutOfRange {
            value: xi,
            range: format!("[{lo}, {hi}]"),
        });
    }
    Ok(1.0 + 2.0 / xi)
}

/// Convergence order `min(2, 1/lambda^2)` of the time-changed scheme.
/// Values within 1e-12 of 2 are reported as 2, so that `lambda = 1/sqrt(2)`
/// is not split by rounding.
pub fn theoretical_order(lambda: f64) -> f64 {
    let v = 1.0 / (lambda * lambda);
    if v >= 2.0 * (1.0 - 1e-12) {
        2.0
    } else {
        v
    }
}

/// Tolerance of the inverse-transform quadrature.
pub const QUAD_TOL: f64 = 1e-12;
const QUAD_MAX_PANELS: usize = 200_000;

/// `(1/pi) int_a^b f(s) cos(s x) ds`, adaptively, with `breaks` as extra
/// panel edges and a cosine-period subdivision added.
pub fn inverse_cosine_transform<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    x: f64,
    breaks: &[f64],
) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let mut pts = vec![a, b];
    pts.extend(breaks.iter().copied().filter(|&s| s > a && s < b));
    if x != 0.0 {
        let period = PI / x.abs();
        let mut s = (a / period).floor() * period + period;
        while s < b {
            pts.push(s);
            s += period;
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let r = quad::integrate(|s| f(s) * (s * x).cos(), &pts, QUAD_TOL, QUAD_MAX_PANELS)?;
    Ok(r.value / PI)
}

fn error_integral(a: f64, b: f64, x: f64, steps: usize, h: f64, lambda: f64) -> Result<f64> {
    let zeros: Vec<f64> = (m_star(lambda)..steps)
        .filter_map(|m| zero_wave_number(m, h, lambda))
        .collect();
    let f = |s: f64| symbol_product(steps, xi(s, h, lambda)) - exact_transform(s);
    inverse_cosine_transform(f, a, b, x, &zeros)
}

/// Error of the discrete solution at `x`, `(1/pi) int_0^{pi/h} E(s) cos(s x) ds`.
pub fn inverse_transform_error(x: f64, steps: usize, h: f64, lambda: f64) -> Result<f64> {
    if !(h > 0.0 && lambda > 0.0) || steps == 0 {
        return Err(invalid("N, h, lambda", "must be positive"));
    }
    error_integral(0.0, PI / h, x, steps, h, lambda)
}

/// The inverse-transform error at `x` split over the four regimes of `partition`.
pub fn regime_error_contributions(x: f64, partition: &RegimePartition) -> Result<[f64; 4]> {
    let p = partition;
    let mut out = [0.0; 4];
    for (i, b) in p.bounds().iter().enumerate() {
        out[i] = error_integral(b.s_min, b.s_max, x, p.steps, p.h, p.lambda)?;
    }
    Ok(out)
}

/// Ratio of the Rannacher to the time-changed error at `x = 0` from the
/// regime-I coefficients, using `N^(5)(0) = 3` and `N^(7)(0) = -15`.
pub fn error_ratio_rannacher_tc(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= FRAC_1_SQRT_2 * (1.0 + 1e-12)) {
        return Err(Error::OutOfRange {
            value: lambda,
            range: "(0, 1/sqrt(2)]".into(),
        });
    }
    let l2 = lambda * lambda;
    let common = 3.0 * (1.0 / 24.0 + l2 / 8.0);
    Ok((common - 15.0 * l2 / 96.0) / (common - 15.0 * l2 / 48.0))
}

/// Errors of the two schemes at equal cost `C ~ c/(k h)`, normalised to `c/C = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostComparison {
    pub e_rannacher: f64,
    pub e_timechanged: f64,
    /// Minimiser of the Rannacher error, `sqrt(12/21)`.
    pub lambda_star_rannacher: f64,
    /// Minimiser of the time-changed error within `lambda <= 1/sqrt(2)`.
    pub lambda_star_timechanged: f64,
}

pub fn cost_constrained_errors(lambda: f64) -> CostComparison {
    let e_rannacher = 0.125 / lambda + 21.0 / 96.0 * lambda;
    let e_timechanged = 0.125 / lambda + lambda / 16.0;
    let unconstrained_tc = (0.125f64 * 16.0).sqrt();
    CostComparison {
        e_rannacher,
        e_timechanged,
        lambda_star_rannacher: (0.125f64 * 96.0 / 21.0).sqrt(),
        lambda_star_timechanged: unconstrained_tc.min(FRAC_1_SQRT_2),
    }
}

/// One discrete frequency of [`periodic_dft_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DftSample {
    pub s: f64,
    pub xi: f64,
    pub symbol: f64,
    pub dft: f64,
    /// `|DFT - symbol|` relative to the peak `U^N(0) = 1`, including any
    /// imaginary residue.
    pub rel_err: f64,
}

/// March Dirac data `steps` steps on a periodic grid of `intervals` cells over
/// `[-10, 10]` and compare its DFT with [`symbol_product`] at the frequencies
/// `2 pi p / (M h)`, `p = 0..=M/2`.
pub fn periodic_dft_check(steps: usize, lambda: f64, intervals: usize) -> Result<Vec<DftSample>> {
    if !intervals.is_multiple_of(2) {
        return Err(invalid("M", format!("must be even, got {intervals}")));
    }
    let grid = build_space_grid(-10.0, 10.0, intervals)?;
    let op = heat_operator(intervals, Closure::Periodic);
    let mut field = dirac_initial(&grid)?;
    for n in 0..steps {
        field = crate::tridiag::timechanged_step_with(&op, &field, n, lambda, Closure::Periodic)?;
    }
    let h = grid.h();
    let u = &field.values()[..intervals];
    let len = intervals as f64 * h;
    Ok((0..=intervals / 2)
        .map(|p| {
            let s = 2.0 * PI * p as f64 / len;
            let (re, im) = u.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, v)| {
                // phase of x_j = (j - M/2) h, reduced modulo the period
                let q = (p * j) % intervals;
                let arg = 2.0 * PI * q as f64 / intervals as f64 - PI * p as f64;
                (re + h * v * arg.cos(), im - h * v * arg.sin())
            });
            let x = xi(s, h, lambda);
            let symbol = symbol_product(steps, x);
            DftSample {
                s,
                xi: x,
                symbol,
                dft: re,
                rel_err: (re - symbol).hypot(im),
            }
        })
        .collect())
}
