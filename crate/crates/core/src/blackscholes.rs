//! Black-Scholes closed forms and the time-changed Crank-Nicolson solver.
//!
//! In time to expiry `tau` the equation is `V_tau = L V` with
//! `L = 1/2 sigma^2 S^2 d_SS + r S d_S - r`. Setting `t~ = sqrt(tau)` gives
//! `V_t~ = 2 t~ L V`, and a Crank-Nicolson step of size `k` in `t~` reads
//!
//! ```text
//! (I - k t~_{n+1} L_h) V^{n+1} = (I + k t~_n L_h) V^n
//! ```
//!
//! with `L_h` the central-difference discretisation of `L` on a uniform S grid.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::heat::{graded_step, SolutionField};
use crate::mesh::{build_space_grid, build_time_grid, SpaceGrid, TimeGrid};
use crate::tridiag::{theta_step, Closure, ThreePointOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payoff {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BSParams {
    pub sigma: f64,
    pub rate: f64,
    pub strike: f64,
    pub expiry: f64,
    pub payoff: Payoff,
}

impl BSParams {
    pub fn new(sigma: f64, rate: f64, strike: f64, expiry: f64, payoff: Payoff) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma", format!("must be positive, got {sigma}")));
        }
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(invalid("K", format!("must be positive, got {strike}")));
        }
        if !(expiry > 0.0 && expiry.is_finite()) {
            return Err(invalid("T", format!("must be positive, got {expiry}")));
        }
        if !rate.is_finite() {
            return Err(invalid("r", "must be finite"));
        }
        Ok(Self {
            sigma,
            rate,
            strike,
            expiry,
            payoff,
        })
    }

    /// sigma = 0.2, r = 0.05, K = 100, T = 0.25.
    pub fn reference(payoff: Payoff) -> Self {
        Self {
            sigma: 0.2,
            rate: 0.05,
            strike: 100.0,
            expiry: 0.25,
            payoff,
        }
    }

    pub fn payoff_at(&self, s: f64) -> f64 {
        match self.payoff {
            Payoff::Call => (s - self.strike).max(0.0),
            Payoff::Put => (self.strike - s).max(0.0),
        }
    }
}

/// Right end of the S domain used by the experiments.
pub const REFERENCE_S_MAX: f64 = 200.0;

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Greeks {
    pub value: f64,
    pub delta: f64,
    pub gamma: f64,
    /// `n(d1) S sigma / (2 sqrt(tau)) - r K e^{-r tau} N(d2)` for a call;
    /// puts add `r K e^{-r tau}`.
    pub theta: f64,
}

fn d1_d2(s: f64, tau: f64, p: &BSParams) -> (f64, f64) {
    let sd = p.sigma * tau.sqrt();
    let d1 = ((s / p.strike).ln() + (p.rate + 0.5 * p.sigma * p.sigma) * tau) / sd;
    (d1, d1 - sd)
}

pub fn bs_analytic(s: f64, tau: f64, p: &BSParams) -> Result<Greeks> {
    if !(s > 0.0) {
        return Err(invalid("S", format!("must be positive, got {s}")));
    }
    if !(tau > 0.0) {
        return Err(invalid("tau", format!("must be positive, got {tau}")));
    }
    let (d1, d2) = d1_d2(s, tau, p);
    let disc = p.strike * (-p.rate * tau).exp();
    let gamma = norm_pdf(d1) / (s * p.sigma * tau.sqrt());
    let theta_call = s * norm_pdf(d1) * p.sigma / (2.0 * tau.sqrt()) - p.rate * disc * norm_cdf(d2);
    Ok(match p.payoff {
        Payoff::Call => Greeks {
            value: s * norm_cdf(d1) - disc * norm_cdf(d2),
            delta: norm_cdf(d1),
            gamma,
            theta: theta_call,
        },
        Payoff::Put => Greeks {
            value: disc * norm_cdf(-d2) - s * norm_cdf(-d1),
            delta: norm_cdf(d1) - 1.0,
            gamma,
            theta: theta_call + p.rate * disc,
        },
    })
}

/// Theta in the square-root time variable, `-2 t~ theta`, written so that it
/// stays finite at `t~ = 0`:
/// `-S n(d1) sigma + 2 t~ r K e^{-r t~^2} N(d2)` for a call.
pub fn transformed_theta(s: f64, t_tilde: f64, p: &BSParams) -> Result<f64> {
    if !(s > 0.0) {
        return Err(invalid("S", format!("must be positive, got {s}")));
    }
    if t_tilde < 0.0 {
        return Err(invalid(
            "t~",
            format!("must be non-negative, got {t_tilde}"),
        ));
    }
    let (pdf_d1, cdf_d2) = if t_tilde == 0.0 {
        let pdf = if s == p.strike { norm_pdf(0.0) } else { 0.0 };
        (pdf, if s > p.strike { 1.0 } else { 0.0 })
    } else {
        let (d1, d2) = d1_d2(s, t_tilde * t_tilde, p);
        (norm_pdf(d1), norm_cdf(d2))
    };
    let disc = p.strike * (-p.rate * t_tilde * t_tilde).exp();
    let call = -s * pdf_d1 * p.sigma + 2.0 * t_tilde * p.rate * disc * cdf_d2;
    Ok(match p.payoff {
        Payoff::Call => call,
        Payoff::Put => call - 2.0 * t_tilde * p.rate * disc,
    })
}

/// `-L_h` on the interior nodes of `grid`, with `S_j = x_j`.
///
/// Rows whose central-difference system `I + c L` would lose strict diagonal
/// dominance for `c = max_weight` switch to a forward difference for the
/// first-order term.
pub fn bs_operator(grid: &SpaceGrid, p: &BSParams, max_weight: f64) -> ThreePointOperator {
    let rows = grid.intervals() - 1;
    let h = grid.h();
    let mut op = ThreePointOperator::constant(rows, 0.0, 0.0, 0.0);
    let s2 = p.sigma * p.sigma;
    for i in 0..rows {
        // S/h, exact for grids starting at 0
        let js = grid.node(i + 1) / h;
        let diff = 0.5 * s2 * js * js;
        let conv = 0.5 * p.rate * js;
        let (lo, di, up) = (-(diff - conv), 2.0 * diff + p.rate, -(diff + conv));
        let dominant = 1.0 + max_weight * di > max_weight * (lo.abs() + up.abs());
        if dominant {
            op.lower[i] = lo;
            op.diag[i] = di;
            op.upper[i] = up;
        } else {
            let c = 2.0 * conv;
            op.lower[i] = -diff;
            op.diag[i] = 2.0 * diff + c + p.rate;
            op.upper[i] = -(diff + c);
        }
    }
    op
}

/// Dirichlet data of the European option at time to expiry `tau`.
pub fn european_boundary(grid: &SpaceGrid, p: &BSParams, tau: f64) -> Closure {
    let disc = p.strike * (-p.rate * tau).exp();
    let (s0, s1) = (grid.x_min(), grid.x_max());
    match p.payoff {
        Payoff::Call => Closure::Dirichlet {
            left: (s0 - disc).max(0.0),
            right: s1 - disc,
        },
        Payoff::Put => Closure::Dirichlet {
            left: (disc - s0).max(0.0),
            right: (disc - s1).max(0.0),
        },
    }
}

pub fn payoff_field(grid: &SpaceGrid, p: &BSParams) -> Result<SolutionField> {
    SolutionField::new(*grid, grid.nodes().map(|s| p.payoff_at(s)).collect(), 0)
}

fn check_setup(grid: &SpaceGrid, p: &BSParams) -> Result<usize> {
    if grid.x_min() < 0.0 {
        return Err(Error::InvalidGrid(format!(
            "S grid must start at or above 0, got {}",
            grid.x_min()
        )));
    }
    grid.index_of(p.strike).ok_or(Error::OffGrid(p.strike))
}

/// One step of the time-changed scheme from `t~_n` to `t~_{n+1}`, with
/// European boundary data at the new level.
pub fn step_bs_timechanged(
    field: &SolutionField,
    t_tilde_n: f64,
    t_tilde_np1: f64,
    p: &BSParams,
) -> Result<SolutionField> {
    if !(t_tilde_np1 > t_tilde_n && t_tilde_n >= 0.0) {
        return Err(invalid("t~", "need 0 <= t~_n < t~_{n+1}"));
    }
    let k = t_tilde_np1 - t_tilde_n;
    let op = bs_operator(field.grid(), p, k * t_tilde_np1);
    let closure = european_boundary(field.grid(), p, t_tilde_np1 * t_tilde_np1);
    theta_step(field, &op, k * t_tilde_n, k * t_tilde_np1, closure)
}

/// European value at `tau = T` on `grid`, marching `tg.steps()` uniform steps
/// in `t~` from the payoff.
pub fn solve_european(p: &BSParams, grid: &SpaceGrid, tg: &TimeGrid) -> Result<SolutionField> {
    check_setup(grid, p)?;
    let k = tg.k();
    let op = bs_operator(grid, p, k * tg.transformed_time(tg.steps()));
    let mut field = payoff_field(grid, p)?;
    for n in 0..tg.steps() {
        let (t0, t1) = (tg.transformed_time(n), tg.transformed_time(n + 1));
        let closure = european_boundary(grid, p, tg.original_time(n + 1));
        field = theta_step(&field, &op, k * t0, k * t1, closure)?;
    }
    Ok(field)
}

/// Crank-Nicolson on the graded nodes `tau_n = (n k)^2` in original time,
/// weighting the explicit and implicit halves by `t~_n` and `t~_{n+1}`
/// (see [`graded_step`]).
pub fn solve_european_graded(
    p: &BSParams,
    grid: &SpaceGrid,
    tg: &TimeGrid,
) -> Result<SolutionField> {
    check_setup(grid, p)?;
    let op = bs_operator(grid, p, tg.k() * tg.transformed_time(tg.steps()));
    let mut field = payoff_field(grid, p)?;
    for n in 0..tg.steps() {
        let (dtau, w) = graded_step(tg, n);
        let tau1 = tg.original_time(n + 1);
        let closure = european_boundary(grid, p, tau1);
        field = theta_step(&field, &op, dtau * w, dtau * (1.0 - w), closure)?;
    }
    Ok(field)
}

/// Central-difference delta and gamma at every node; second-order one-sided
/// delta and first-order one-sided gamma at the two ends.
pub fn greeks_from_field(field: &SolutionField) -> Result<(Vec<f64>, Vec<f64>)> {
    let v = field.values();
    let n = v.len();
    if n < 3 {
        return Err(Error::InvalidGrid(format!(
            "need at least 3 nodes, got {n}"
        )));
    }
    let h = field.grid().h();
    let mut delta = vec![0.0; n];
    let mut gamma = vec![0.0; n];
    for j in 1..n - 1 {
        delta[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
        gamma[j] = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h);
    }
    delta[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    delta[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    gamma[0] = (v[0] - 2.0 * v[1] + v[2]) / (h * h);
    gamma[n - 1] = (v[n - 1] - 2.0 * v[n - 2] + v[n - 3]) / (h * h);
    Ok((delta, gamma))
}

/// Value, delta and gamma at the node `S = K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmQuote {
    pub value: f64,
    pub delta: f64,
    pub gamma: f64,
}

pub fn atm_quote(field: &SolutionField, strike: f64) -> Result<AtmQuote> {
    let j = field
        .grid()
        .index_of(strike)
        .ok_or(Error::OffGrid(strike))?;
    if j == 0 || j + 1 >= field.grid().len() {
        return Err(Error::OffGrid(strike));
    }
    let v = field.values();
    let h = field.grid().h();
    Ok(AtmQuote {
        value: v[j],
        delta: (v[j + 1] - v[j - 1]) / (2.0 * h),
        gamma: (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h),
    })
}

/// `lambda` above which the gamma order is expected to drop below 2.
pub fn critical_lambda(p: &BSParams) -> f64 {
    1.0 / (p.sigma * p.strike * SQRT_2)
}

/// `min(2, 1/(sigma^2 K^2 lambda^2))`.
pub fn predicted_bs_order(lambda: f64, p: &BSParams) -> f64 {
    let d = p.sigma * p.strike * lambda;
    (1.0 / (d * d)).min(2.0)
}

/// Grids on `[0, s_max]` with `intervals` steps in S and `k = lambda h` in
/// `t~`. The implied step count `sqrt(T) / k` must be an integer.
pub fn bs_grids(
    p: &BSParams,
    s_max: f64,
    intervals: usize,
    lambda: f64,
) -> Result<(SpaceGrid, TimeGrid)> {
    let grid = build_space_grid(0.0, s_max, intervals)?;
    let steps = p.expiry.sqrt() / (lambda * grid.h());
    let rounded = steps.round();
    if rounded < 1.0 || (steps - rounded).abs() > 1e-9 * steps {
        return Err(invalid(
            "lambda",
            format!("sqrt(T)/(lambda h) = {steps} is not an integer step count"),
        ));
    }
    let tg = build_time_grid(p.expiry, rounded as usize)?;
    Ok((grid, tg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call() -> BSParams {
        BSParams::reference(Payoff::Call)
    }

    #[test]
    fn analytic_reference_point() {
        let g = bs_analytic(100.0, 0.25, &call()).unwrap();
        // scipy.stats.norm reference values
        assert!((g.value - 4.614_997_129_602_855).abs() < 1e-10);
        assert!((g.gamma - 0.039_288_000_944_737_93).abs() < 1e-12);
        assert!((g.delta - 0.569_460_183_207_673_7).abs() < 1e-12);
        assert!(bs_analytic(0.0, 0.25, &call()).is_err());
        assert!(bs_analytic(100.0, 0.0, &call()).is_err());
    }

    #[test]
    fn put_call_parity() {
        let c = bs_analytic(93.0, 0.4, &call()).unwrap();
        let p = bs_analytic(93.0, 0.4, &BSParams::reference(Payoff::Put)).unwrap();
        let fwd = 93.0 - 100.0 * (-0.05f64 * 0.4).exp();
        assert!((c.value - p.value - fwd).abs() < 1e-12);
        assert!((c.delta - p.delta - 1.0).abs() < 1e-15);
    }

    #[test]
    fn call_above_lower_bound() {
        for s in [50.0, 80.0, 99.0, 100.0, 130.0, 190.0] {
            for tau in [1e-4, 0.01, 0.25, 2.0] {
                let g = bs_analytic(s, tau, &call()).unwrap();
                let bound = (s - 100.0 * (-0.05 * tau).exp()).max(0.0);
                assert!(g.value >= bound - 1e-12, "S={s} tau={tau}");
            }
        }
    }

    #[test]
    fn transformed_theta_limits() {
        let p = call();
        let v = transformed_theta(100.0, 0.0, &p).unwrap();
        assert!((v + 100.0 * 0.2 / (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((v + 7.978_845_608_028_654).abs() < 1e-12);
        assert_eq!(transformed_theta(150.0, 0.0, &p).unwrap(), 0.0);
        assert_eq!(transformed_theta(60.0, 0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn transformed_theta_matches_definition() {
        for payoff in [Payoff::Call, Payoff::Put] {
            let p = BSParams::reference(payoff);
            for s in [70.0, 95.0, 100.0, 104.0, 160.0] {
                for tt in [0.05, 0.2, 0.5, 1.0] {
                    let g = bs_analytic(s, tt * tt, &p).unwrap();
                    let lhs = transformed_theta(s, tt, &p).unwrap();
                    let rhs = -2.0 * tt * g.theta;
                    assert!(
                        (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300),
                        "{lhs} {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn first_step_rhs_is_payoff() {
        let (grid, _) = bs_grids(&call(), 200.0, 400, 0.0125).unwrap();
        let op = bs_operator(&grid, &call(), 0.01);
        let v0 = payoff_field(&grid, &call()).unwrap();
        let sys = op
            .assemble_dirichlet(v0.values(), 0.0, 0.01, 0.0, 100.0)
            .unwrap();
        let mut expect = v0.values()[1..400].to_vec();
        expect[398] -= 0.01 * op.upper[398] * 100.0;
        assert_eq!(sys.rhs, expect);
    }

    #[test]
    fn constant_preserved_without_rates() {
        let p = BSParams::new(0.3, 0.0, 100.0, 0.25, Payoff::Call).unwrap();
        let grid = build_space_grid(0.0, 200.0, 100).unwrap();
        let op = bs_operator(&grid, &p, 1.0);
        let field = SolutionField::new(grid, vec![2.5; 101], 0).unwrap();
        let next = theta_step(
            &field,
            &op,
            0.01,
            0.02,
            Closure::Dirichlet {
                left: 2.5,
                right: 2.5,
            },
        )
        .unwrap();
        assert!(next.values().iter().all(|v| (v - 2.5).abs() < 1e-13));
    }

    #[test]
    fn greeks_of_polynomials() {
        let grid = build_space_grid(-1.0, 3.0, 40).unwrap();
        let lin = SolutionField::new(grid, grid.nodes().collect(), 0).unwrap();
        let (d, g) = greeks_from_field(&lin).unwrap();
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(g.iter().all(|v| v.abs() < 1e-9));
        let quad = SolutionField::new(grid, grid.nodes().map(|x| x * x).collect(), 0).unwrap();
        let (_, g) = greeks_from_field(&quad).unwrap();
        assert!(g.iter().all(|v| (v - 2.0).abs() < 1e-9));
        let short =
            SolutionField::new(build_space_grid(0.0, 1.0, 2).unwrap(), vec![0.0; 3], 0).unwrap();
        assert!(greeks_from_field(&short).is_ok());
    }

    #[test]
    fn sampled_analytic_gamma_is_second_order() {
        let p = call();
        let errs: Vec<f64> = [200usize, 400, 800]
            .iter()
            .map(|&m| {
                let grid = build_space_grid(0.0, 200.0, m).unwrap();
                let v: Vec<f64> = grid
                    .nodes()
                    .map(|s| {
                        if s == 0.0 {
                            0.0
                        } else {
                            bs_analytic(s, 0.25, &p).unwrap().value
                        }
                    })
                    .collect();
                let f = SolutionField::new(grid, v, 0).unwrap();
                let q = atm_quote(&f, 100.0).unwrap();
                (q.gamma - bs_analytic(100.0, 0.25, &p).unwrap().gamma).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1] - 4.0).abs() < 0.1);
        }
    }

    #[test]
    fn order_prediction() {
        let p = call();
        let lc = critical_lambda(&p);
        assert!((lc - 0.035_355_339_059_327_38).abs() < 1e-15);
        assert_eq!(predicted_bs_order(lc / 2.0, &p), 2.0);
        assert!((predicted_bs_order(2.0 * lc, &p) - 0.5).abs() < 1e-12);
        assert!((predicted_bs_order(0.05, &p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_helper() {
        let (g, tg) = bs_grids(&call(), 200.0, 3200, 0.0125).unwrap();
        assert_eq!(g.h(), 0.0625);
        assert_eq!(tg.steps(), 640);
        assert!(bs_grids(&call(), 200.0, 3200, 0.013).is_err());
    }

    #[test]
    fn strike_must_be_on_grid() {
        let p = call();
        let grid = build_space_grid(0.0, 200.0, 3).unwrap();
        let tg = build_time_grid(0.25, 10).unwrap();
        assert_eq!(solve_european(&p, &grid, &tg), Err(Error::OffGrid(100.0)));
    }
}
