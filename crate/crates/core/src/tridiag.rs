//! Tridiagonal systems for one theta-scheme step, and the heat-equation step
//! kernels built on them.
//!
//! A step advances `u_t + A u = 0` from level `n` to `n + 1` as
//!
//! ```text
//! (I + c_imp A) U^{n+1} = (I - c_exp A) U^n
//! ```
//!
//! where `A` is a three-point operator and the scalar weights carry the time
//! step and any time-dependent diffusion multiplier.

use crate::error::{Error, Result};
use crate::heat::SolutionField;

/// Interior system with Dirichlet boundaries already folded into `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || rhs.len() != n || lower.len() + 1 != n || upper.len() + 1 != n {
            return Err(Error::InvalidGrid(format!(
                "inconsistent tridiagonal lengths: lower {}, diag {}, upper {}, rhs {}",
                lower.len(),
                n,
                upper.len(),
                rhs.len()
            )));
        }
        Ok(Self {
            lower,
            diag,
            upper,
            rhs,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Strict diagonal dominance, row by row.
    pub fn check_dominance(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            let mut off = 0.0;
            if i > 0 {
                off += self.lower[i - 1].abs();
            }
            if i + 1 < n {
                off += self.upper[i].abs();
            }
            if !(self.diag[i].abs() > off) {
                return Err(Error::NotDiagonallyDominant { row: i });
            }
        }
        Ok(())
    }

    /// `A x`, for residual checks.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * x[i + 1];
                }
                v
            })
            .collect()
    }
}

/// Thomas algorithm, no pivoting.
pub fn solve_tridiagonal(sys: &TridiagonalSystem) -> Result<Vec<f64>> {
    thomas(&sys.lower, &sys.diag, &sys.upper, &sys.rhs)
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::ZeroPivot { row: 0 });
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / pivot;
        pivot = diag[i] - lower[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::ZeroPivot { row: i });
        }
        x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Periodic tridiagonal system: row 0 couples to the last unknown through
/// `lower[0]`, the last row to the first through `upper[n-1]`. All three
/// vectors have the full length `n >= 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl CyclicSystem {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                self.lower[i] * x[(i + n - 1) % n]
                    + self.diag[i] * x[i]
                    + self.upper[i] * x[(i + 1) % n]
            })
            .collect()
    }

    pub fn check_dominance(&self) -> Result<()> {
        for i in 0..self.diag.len() {
            if !(self.diag[i].abs() > self.lower[i].abs() + self.upper[i].abs()) {
                return Err(Error::NotDiagonallyDominant { row: i });
            }
        }
        Ok(())
    }
}

/// Sherman-Morrison reduction of the periodic system to two Thomas solves.
pub fn solve_cyclic(sys: &CyclicSystem) -> Result<Vec<f64>> {
    let n = sys.diag.len();
    if n < 3 || sys.lower.len() != n || sys.upper.len() != n || sys.rhs.len() != n {
        return Err(Error::InvalidGrid(format!(
            "cyclic system needs >= 3 consistent rows, got {n}"
        )));
    }
    let alpha = sys.upper[n - 1];
    let beta = sys.lower[0];
    let gamma = -sys.diag[0];
    let mut diag = sys.diag.clone();
    diag[0] -= gamma;
    diag[n - 1] -= alpha * beta / gamma;
    let lower = &sys.lower[1..];
    let upper = &sys.upper[..n - 1];
    let x = thomas(lower, &diag, upper, &sys.rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(lower, &diag, upper, &u)?;
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

/// Boundary treatment of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Closure {
    /// Values imposed at the two end nodes for the new level.
    Dirichlet { left: f64, right: f64 },
    /// The last node is identified with the first.
    Periodic,
}

impl Closure {
    pub const ZERO: Closure = Closure::Dirichlet {
        left: 0.0,
        right: 0.0,
    };
}

/// Three-point operator `A`, one row per unknown node.
///
/// For Dirichlet closure the rows are nodes `1..M`; for periodic closure they
/// are nodes `0..M` with wrap-around couplings in `lower[0]` and `upper[last]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreePointOperator {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ThreePointOperator {
    pub fn constant(rows: usize, lower: f64, diag: f64, upper: f64) -> Self {
        Self {
            lower: vec![lower; rows],
            diag: vec![diag; rows],
            upper: vec![upper; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.diag.len()
    }

    /// `(I - c_exp A) u` on the Dirichlet interior, `u` holding all nodes.
    fn explicit_interior(&self, u: &[f64], c_exp: f64) -> Vec<f64> {
        (0..self.rows())
            .map(|i| {
                let j = i + 1;
                let au = self.lower[i] * u[j - 1] + self.diag[i] * u[j] + self.upper[i] * u[j + 1];
                u[j] - c_exp * au
            })
            .collect()
    }

    fn explicit_periodic(&self, u: &[f64], c_exp: f64) -> Vec<f64> {
        let n = self.rows();
        (0..n)
            .map(|j| {
                let au = self.lower[j] * u[(j + n - 1) % n]
                    + self.diag[j] * u[j]
                    + self.upper[j] * u[(j + 1) % n];
                u[j] - c_exp * au
            })
            .collect()
    }

    /// Implicit system of one step with Dirichlet closure.
    pub fn assemble_dirichlet(
        &self,
        old: &[f64],
        c_exp: f64,
        c_imp: f64,
        left: f64,
        right: f64,
    ) -> Result<TridiagonalSystem> {
        let rows = self.rows();
        if old.len() != rows + 2 {
            return Err(Error::InvalidGrid(format!(
                "operator has {rows} interior rows but field has {} nodes",
                old.len()
            )));
        }
        let mut rhs = if c_exp == 0.0 {
            old[1..=rows].to_vec()
        } else {
            self.explicit_interior(old, c_exp)
        };
        rhs[0] -= c_imp * self.lower[0] * left;
        rhs[rows - 1] -= c_imp * self.upper[rows - 1] * right;
        let diag = self.diag.iter().map(|d| 1.0 + c_imp * d).collect();
        let lower = self.lower[1..].iter().map(|l| c_imp * l).collect();
        let upper = self.upper[..rows - 1].iter().map(|u| c_imp * u).collect();
        let sys = TridiagonalSystem::new(lower, diag, upper, rhs)?;
        sys.check_dominance()?;
        Ok(sys)
    }

    pub fn assemble_periodic(&self, old: &[f64], c_exp: f64, c_imp: f64) -> Result<CyclicSystem> {
        let n = self.rows();
        let rhs = if c_exp == 0.0 {
            old[..n].to_vec()
        } else {
            self.explicit_periodic(old, c_exp)
        };
        let sys = CyclicSystem {
            lower: self.lower.iter().map(|l| c_imp * l).collect(),
            diag: self.diag.iter().map(|d| 1.0 + c_imp * d).collect(),
            upper: self.upper.iter().map(|u| c_imp * u).collect(),
            rhs,
        };
        sys.check_dominance()?;
        Ok(sys)
    }
}

/// Advance a field by one step `(I + c_imp A) U^{n+1} = (I - c_exp A) U^n`.
pub fn theta_step(
    field: &SolutionField,
    op: &ThreePointOperator,
    c_exp: f64,
    c_imp: f64,
    closure: Closure,
) -> Result<SolutionField> {
    let old = field.values();
    let m = field.grid().intervals();
    let mut values = vec![0.0; m + 1];
    match closure {
        Closure::Dirichlet { left, right } => {
            let sys = op.assemble_dirichlet(old, c_exp, c_imp, left, right)?;
            let x = solve_tridiagonal(&sys)?;
            values[0] = left;
            values[1..m].copy_from_slice(&x);
            values[m] = right;
        }
        Closure::Periodic => {
            let sys = op.assemble_periodic(old, c_exp, c_imp)?;
            let x = solve_cyclic(&sys)?;
            values[..m].copy_from_slice(&x);
            values[m] = x[0];
        }
    }
    SolutionField::new(*field.grid(), values, field.level() + 1)
}

/// Operator `(-1/2, 1, -1/2)` of `-1/2 u_xx` scaled by `h^2`, sized for `closure`.
pub fn heat_operator(intervals: usize, closure: Closure) -> ThreePointOperator {
    let rows = match closure {
        Closure::Dirichlet { .. } => intervals - 1,
        Closure::Periodic => intervals,
    };
    ThreePointOperator::constant(rows, -0.5, 1.0, -0.5)
}

/// One step of the time-changed scheme `u_t~ = t~ u_xx` from level `n`:
///
/// ```text
/// (1 + (n+1)l^2) U^{n+1}_j - (n+1)l^2/2 (U^{n+1}_{j+1} + U^{n+1}_{j-1})
///     = (1 - n l^2) U^n_j + n l^2/2 (U^n_{j+1} + U^n_{j-1})
/// ```
pub fn step_heat_timechanged(
    field: &SolutionField,
    n: usize,
    lambda: f64,
    closure: Closure,
) -> Result<SolutionField> {
    let op = heat_operator(field.grid().intervals(), closure);
    timechanged_step_with(&op, field, n, lambda, closure)
}

pub(crate) fn timechanged_step_with(
    op: &ThreePointOperator,
    field: &SolutionField,
    n: usize,
    lambda: f64,
    closure: Closure,
) -> Result<SolutionField> {
    let l2 = lambda * lambda;
    theta_step(field, op, n as f64 * l2, (n + 1) as f64 * l2, closure)
}

/// One theta-step of `u_t = u_xx / 2` in original time with step `k = lambda h`.
pub fn step_heat_original(
    field: &SolutionField,
    lambda: f64,
    theta: f64,
    closure: Closure,
) -> Result<SolutionField> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(crate::error::invalid(
            "theta",
            format!("must lie in [0, 1], got {theta}"),
        ));
    }
    let op = heat_operator(field.grid().intervals(), closure);
    original_step_with(&op, field, lambda, theta, closure)
}

pub(crate) fn original_step_with(
    op: &ThreePointOperator,
    field: &SolutionField,
    lambda: f64,
    theta: f64,
    closure: Closure,
) -> Result<SolutionField> {
    // k / h^2 = lambda / h
    let ratio = lambda / field.grid().h();
    theta_step(field, op, (1.0 - theta) * ratio, theta * ratio, closure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_space_grid;

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let p = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, p);
            b.swap(col, p);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    fn to_dense(sys: &TridiagonalSystem) -> Vec<Vec<f64>> {
        let n = sys.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = sys.diag[i];
            if i > 0 {
                a[i][i - 1] = sys.lower[i - 1];
            }
            if i + 1 < n {
                a[i][i + 1] = sys.upper[i];
            }
        }
        a
    }

    #[test]
    fn identity_system() {
        let b = vec![3.0, -1.0, 2.5, 7.0];
        let sys =
            TridiagonalSystem::new(vec![0.0; 3], vec![1.0; 4], vec![0.0; 3], b.clone()).unwrap();
        assert_eq!(solve_tridiagonal(&sys).unwrap(), b);
    }

    #[test]
    fn three_by_three() {
        let sys = TridiagonalSystem::new(
            vec![-1.0, -1.0],
            vec![2.0, 2.0, 2.0],
            vec![-1.0, -1.0],
            vec![1.0, 0.0, 1.0],
        )
        .unwrap();
        let x = solve_tridiagonal(&sys).unwrap();
        let oracle = dense_solve(to_dense(&sys), sys.rhs.clone());
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - 1.0).abs() < 1e-15);
            assert!((b - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn random_dominant_matches_dense() {
        // xorshift keeps the fixture deterministic without extra dependencies
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let n = 50;
        let lower: Vec<f64> = (0..n - 1).map(|_| next()).collect();
        let upper: Vec<f64> = (0..n - 1).map(|_| next()).collect();
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let off = if i > 0 { lower[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { upper[i].abs() } else { 0.0 };
                (off + 0.1 + next().abs()) * if next() > 0.0 { 1.0 } else { -1.0 }
            })
            .collect();
        let rhs: Vec<f64> = (0..n).map(|_| next() * 10.0).collect();
        let sys = TridiagonalSystem::new(lower, diag, upper, rhs).unwrap();
        sys.check_dominance().unwrap();
        let x = solve_tridiagonal(&sys).unwrap();
        let oracle = dense_solve(to_dense(&sys), sys.rhs.clone());
        let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
        let r = sys.apply(&x);
        let rn = sys.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let res = r
            .iter()
            .zip(&sys.rhs)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(res <= 1e-12 * (rn + scale));
    }

    #[test]
    fn zero_pivot_is_reported() {
        let sys =
            TridiagonalSystem::new(vec![1.0], vec![0.0, 1.0], vec![1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(solve_tridiagonal(&sys), Err(Error::ZeroPivot { row: 0 }));
        let sys =
            TridiagonalSystem::new(vec![1.0], vec![1.0, 1.0], vec![1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(solve_tridiagonal(&sys), Err(Error::ZeroPivot { row: 1 }));
        assert!(sys.check_dominance().is_err());
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(
            TridiagonalSystem::new(vec![1.0; 2], vec![3.0; 2], vec![1.0], vec![0.0; 2]).is_err()
        );
    }

    #[test]
    fn cyclic_matches_dense() {
        let n = 7;
        let sys = CyclicSystem {
            lower: (0..n).map(|i| -0.3 - 0.01 * i as f64).collect(),
            diag: (0..n).map(|i| 2.0 + 0.1 * i as f64).collect(),
            upper: (0..n).map(|i| -0.4 + 0.02 * i as f64).collect(),
            rhs: (0..n).map(|i| (i as f64).sin()).collect(),
        };
        let x = solve_cyclic(&sys).unwrap();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = sys.diag[i];
            a[i][(i + n - 1) % n] += sys.lower[i];
            a[i][(i + 1) % n] += sys.upper[i];
        }
        let oracle = dense_solve(a, sys.rhs.clone());
        for (p, q) in x.iter().zip(&oracle) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    fn periodic_field(m: usize, f: impl Fn(f64) -> f64) -> SolutionField {
        let g = build_space_grid(-1.0, 1.0, m).unwrap();
        let mut v: Vec<f64> = g.nodes().map(f).collect();
        v[m] = v[0];
        SolutionField::new(g, v, 0).unwrap()
    }

    #[test]
    fn first_time_changed_step_has_identity_rhs() {
        let u = periodic_field(16, |x| (3.0 * x).cos() + 2.0);
        let op = heat_operator(16, Closure::Periodic);
        let sys = op.assemble_periodic(u.values(), 0.0, 0.25).unwrap();
        assert_eq!(&sys.rhs[..], &u.values()[..16]);
    }

    #[test]
    fn constant_field_is_preserved() {
        let u = periodic_field(20, |_| 3.5);
        let tc = step_heat_timechanged(&u, 4, 0.7, Closure::Periodic).unwrap();
        let cn = step_heat_original(&u, 1.0, 0.5, Closure::Periodic).unwrap();
        for v in tc.values().iter().chain(cn.values()) {
            assert!((v - 3.5).abs() < 1e-14);
        }
        assert_eq!(tc.level(), 1);
    }

    #[test]
    fn backward_euler_from_dirac_is_positive() {
        let g = build_space_grid(-1.0, 1.0, 40).unwrap();
        let u = crate::heat::dirac_initial(&g).unwrap();
        let next = step_heat_original(&u, 1.0, 1.0, Closure::ZERO).unwrap();
        assert!(next.values()[1..40].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn time_changed_system_is_dominant_for_all_levels() {
        let op = heat_operator(10, Closure::ZERO);
        let old = vec![0.0; 11];
        for n in [0usize, 1, 10, 1000, 100_000] {
            let lambda: f64 = 3.0;
            let c = (n + 1) as f64 * lambda * lambda;
            assert!(op.assemble_dirichlet(&old, 0.0, c, 0.0, 0.0).is_ok());
        }
    }

    #[test]
    fn theta_out_of_range() {
        let u = periodic_field(8, |_| 1.0);
        assert!(step_heat_original(&u, 1.0, 1.5, Closure::Periodic).is_err());
    }
}
