//! Dense bounded-variable revised simplex.
//!
//! Solves
//!
//! ```text
//! maximize    c . z
//! subject to  a_r . z <= b_r        for every row r
//!             lower <= z <= upper
//! ```
//!
//! Box bounds are handled implicitly: a nonbasic variable sits at one of its
//! bounds and may "flip" to the other without a basis change, so the basis
//! size equals the number of rows. Every row gets a slack in `[0, inf)`;
//! rows that are violated at the starting point also get an artificial
//! variable, and a phase-one pass drives those to zero.
//!
//! Pricing and the ratio test both use Bland's smallest-index rule, which
//! rules out cycling and makes the returned vertex a deterministic function
//! of the input (including which of several optimal vertices is returned).
//!
//! Infinite bounds are allowed (`-inf` lower, `+inf` upper); in JSON they are
//! written as `null`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum magnitude of a pivot element.
pub const PIVOT_TOL: f64 = 1e-10;
/// Primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Reduced-cost tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-9;

const RATIO_TIE_TOL: f64 = 1e-12;
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn activity(&self, z: &[f64]) -> f64 {
        self.coeffs.iter().zip(z).map(|(a, x)| a * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    /// Maximized.
    pub objective: Vec<f64>,
    #[serde(with = "lower_bounds")]
    pub var_lower: Vec<f64>,
    #[serde(with = "upper_bounds")]
    pub var_upper: Vec<f64>,
    #[serde(default)]
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: Status,
    /// Empty unless optimal.
    pub values: Vec<f64>,
    /// NaN (`null` in JSON) unless optimal.
    pub objective_value: f64,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.var_lower.len() != n || self.var_upper.len() != n {
            return Err(Error::InvalidProgram(format!(
                "{n} objective coefficients but {} lower / {} upper bounds",
                self.var_lower.len(),
                self.var_upper.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidProgram("non-finite objective coefficient".into()));
        }
        for (i, (&l, &u)) in self.var_lower.iter().zip(&self.var_upper).enumerate() {
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(Error::InvalidProgram(format!("bad bounds [{l}, {u}] on variable {i}")));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(Error::InvalidProgram(format!(
                    "row {r} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidProgram(format!("row {r} has a non-finite entry")));
            }
        }
        Ok(())
    }

    /// Largest bound or row violation of `z` (0 when feasible).
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let bounds = z
            .iter()
            .zip(self.var_lower.iter().zip(&self.var_upper))
            .map(|(&x, (&l, &u))| (l - x).max(x - u).max(0.0));
        let rows = self.rows.iter().map(|row| (row.activity(z) - row.rhs).max(0.0));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    pub fn objective_at(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, x)| c * x).sum()
    }
}

/// Solves `lp`. Errors only on malformed input or a numerical breakdown;
/// infeasible and unbounded programs are reported through [`Status`].
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let mut simplex = Simplex::new(lp);

    if simplex.num_artificial > 0 {
        let cost: Vec<f64> = (0..simplex.num_vars())
            .map(|j| if simplex.is_artificial(j) { -1.0 } else { 0.0 })
            .collect();
        simplex.run(&cost)?;
        let residual: f64 = (simplex.first_artificial..simplex.num_vars())
            .map(|j| simplex.x[j])
            .sum();
        let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        if residual > FEASIBILITY_TOL * scale {
            return Ok(LpSolution {
                status: Status::Infeasible,
                values: Vec::new(),
                objective_value: f64::NAN,
            });
        }
        simplex.retire_artificials();
    }

    let mut cost = vec![0.0; simplex.num_vars()];
    cost[..lp.num_vars()].copy_from_slice(&lp.objective);
    if simplex.run(&cost)? == Outcome::Unbounded {
        return Ok(LpSolution {
            status: Status::Unbounded,
            values: Vec::new(),
            objective_value: f64::NAN,
        });
    }

    let values: Vec<f64> = simplex.x[..lp.num_vars()]
        .iter()
        .zip(lp.var_lower.iter().zip(&lp.var_upper))
        .map(|(&x, (&l, &u))| x.clamp(l, u))
        .collect();
    let objective_value = lp.objective_at(&values);
    Ok(LpSolution {
        status: Status::Optimal,
        values,
        objective_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarStatus {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at 0.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

/// Working state. Variables are ordered: structural, slacks, artificials.
/// That order is the Bland index order.
struct Simplex {
    m: usize,
    first_artificial: usize,
    num_artificial: usize,
    /// Dense columns, each of length `m`.
    cols: Vec<Vec<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<f64>,
    pivots_since_refactor: usize,
    iterations: usize,
    max_iterations: usize,
}

impl Simplex {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.rows.len();

        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|j| lp.rows.iter().map(|row| row.coeffs[j]).collect())
            .collect();
        let mut lower = lp.var_lower.clone();
        let mut upper = lp.var_upper.clone();
        let mut x = Vec::with_capacity(n + 2 * m);
        let mut status = Vec::with_capacity(n + 2 * m);
        for (&l, &u) in lower.iter().zip(&upper) {
            let (value, st) = if l.is_finite() {
                (l, VarStatus::AtLower)
            } else if u.is_finite() {
                (u, VarStatus::AtUpper)
            } else {
                (0.0, VarStatus::Free)
            };
            x.push(value);
            status.push(st);
        }

        let residual: Vec<f64> = lp.rows.iter().map(|row| row.rhs - row.activity(&x)).collect();

        let mut basis = vec![0; m];
        let mut binv = vec![0.0; m * m];
        for (r, &res) in residual.iter().enumerate() {
            let mut col = vec![0.0; m];
            col[r] = 1.0;
            cols.push(col);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            if res >= 0.0 {
                basis[r] = n + r;
                binv[r * m + r] = 1.0;
                x.push(res);
                status.push(VarStatus::Basic(r));
            } else {
                x.push(0.0);
                status.push(VarStatus::AtLower);
            }
        }

        let first_artificial = n + m;
        for (r, &res) in residual.iter().enumerate() {
            if res < 0.0 {
                let mut col = vec![0.0; m];
                col[r] = -1.0;
                cols.push(col);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                basis[r] = x.len();
                binv[r * m + r] = -1.0;
                x.push(-res);
                status.push(VarStatus::Basic(r));
            }
        }
        let num_artificial = x.len() - first_artificial;
        let total = x.len();

        Self {
            m,
            first_artificial,
            num_artificial,
            cols,
            lower,
            upper,
            rhs: lp.rows.iter().map(|r| r.rhs).collect(),
            x,
            status,
            basis,
            binv,
            pivots_since_refactor: 0,
            iterations: 0,
            max_iterations: 50_000 + 100 * (total + m),
        }
    }

    #[inline]
    fn num_vars(&self) -> usize {
        self.x.len()
    }

    #[inline]
    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial
    }

    /// Pins every artificial to zero so phase two can never use one.
    fn retire_artificials(&mut self) {
        for j in self.first_artificial..self.num_vars() {
            self.upper[j] = 0.0;
            if !matches!(self.status[j], VarStatus::Basic(_)) {
                self.x[j] = 0.0;
                self.status[j] = VarStatus::AtLower;
            }
        }
    }

    fn run(&mut self, cost: &[f64]) -> Result<Outcome> {
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(Error::IterationLimit(self.max_iterations));
            }

            let Some((q, dir)) = self.price(cost) else {
                return Ok(Outcome::Optimal);
            };
            let alpha = self.ftran(&self.cols[q]);

            let flip = self.upper[q] - self.lower[q];
            let leaving = self.ratio_test(&alpha, dir);

            match leaving {
                Some((r, ratio, to_upper)) if ratio < flip => self.pivot(q, dir, &alpha, r, ratio, to_upper)?,
                _ if flip.is_finite() => self.bound_flip(q, dir, &alpha, flip),
                Some((r, ratio, to_upper)) => self.pivot(q, dir, &alpha, r, ratio, to_upper)?,
                None => return Ok(Outcome::Unbounded),
            }
        }
    }

    /// First improving nonbasic variable in index order, with its direction.
    fn price(&self, cost: &[f64]) -> Option<(usize, f64)> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (yk, &v) in y.iter_mut().zip(&self.binv[i * m..(i + 1) * m]) {
                    *yk += cb * v;
                }
            }
        }
        for (j, &cj) in cost.iter().enumerate() {
            let st = self.status[j];
            if matches!(st, VarStatus::Basic(_)) || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = cj - dot(&y, &self.cols[j]);
            let dir = match st {
                VarStatus::AtLower if d > OPTIMALITY_TOL => 1.0,
                VarStatus::AtUpper if d < -OPTIMALITY_TOL => -1.0,
                VarStatus::Free if d > OPTIMALITY_TOL => 1.0,
                VarStatus::Free if d < -OPTIMALITY_TOL => -1.0,
                _ => continue,
            };
            return Some((j, dir));
        }
        None
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        self.binv.chunks_exact(self.m.max(1)).take(self.m).map(|row| dot(row, col)).collect()
    }

    /// Bland ratio test: smallest step, ties broken by smallest variable index.
    /// Returns `(row, step, leaves_at_upper)`.
    fn ratio_test(&self, alpha: &[f64], dir: f64) -> Option<(usize, f64, bool)> {
        let candidate = |i: usize| -> Option<(f64, bool)> {
            let b = self.basis[i];
            // x_b moves by -t * a as the entering variable moves by t.
            let a = dir * alpha[i];
            if a > PIVOT_TOL && self.lower[b].is_finite() {
                Some(((self.x[b] - self.lower[b]).max(0.0) / a, false))
            } else if a < -PIVOT_TOL && self.upper[b].is_finite() {
                Some(((self.upper[b] - self.x[b]).max(0.0) / -a, true))
            } else {
                None
            }
        };
        let min_ratio = (0..self.m)
            .filter_map(|i| candidate(i).map(|(t, _)| t))
            .fold(f64::INFINITY, f64::min);
        if !min_ratio.is_finite() {
            return None;
        }
        (0..self.m)
            .filter_map(|i| candidate(i).map(|(t, up)| (i, t, up)))
            .filter(|&(_, t, _)| t <= min_ratio + RATIO_TIE_TOL)
            .min_by_key(|&(i, _, _)| self.basis[i])
    }

    fn bound_flip(&mut self, q: usize, dir: f64, alpha: &[f64], step: f64) {
        for (i, &a) in alpha.iter().enumerate() {
            self.x[self.basis[i]] -= dir * step * a;
        }
        if dir > 0.0 {
            self.x[q] = self.upper[q];
            self.status[q] = VarStatus::AtUpper;
        } else {
            self.x[q] = self.lower[q];
            self.status[q] = VarStatus::AtLower;
        }
    }

    fn pivot(&mut self, q: usize, dir: f64, alpha: &[f64], r: usize, step: f64, to_upper: bool) -> Result<()> {
        let m = self.m;
        self.x[q] += dir * step;
        for (i, &a) in alpha.iter().enumerate() {
            self.x[self.basis[i]] -= dir * step * a;
        }
        let leaving = self.basis[r];
        if to_upper {
            self.x[leaving] = self.upper[leaving];
            self.status[leaving] = VarStatus::AtUpper;
        } else {
            self.x[leaving] = self.lower[leaving];
            self.status[leaving] = VarStatus::AtLower;
        }
        self.basis[r] = q;
        self.status[q] = VarStatus::Basic(r);

        // Eta update of the explicit inverse.
        let pivot = alpha[r];
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].iter().map(|v| v / pivot).collect();
        for (i, &a) in alpha.iter().enumerate() {
            let row = &mut self.binv[i * m..(i + 1) * m];
            if i == r {
                row.copy_from_slice(&pivot_row);
            } else if a != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= a * p;
                }
            }
        }

        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recomputes the basis inverse from scratch and re-derives basic values.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (c, &b) in self.basis.iter().enumerate() {
            for (r, &v) in self.cols[b].iter().enumerate() {
                a[r * m + c] = v;
            }
        }
        self.binv = invert(a, m).ok_or_else(|| Error::InvalidProgram("singular basis".into()))?;
        self.pivots_since_refactor = 0;

        let mut residual = self.rhs.clone();
        for j in 0..self.num_vars() {
            if matches!(self.status[j], VarStatus::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            for (res, &c) in residual.iter_mut().zip(&self.cols[j]) {
                *res -= c * self.x[j];
            }
        }
        let xb = self.ftran(&residual);
        for (i, v) in xb.into_iter().enumerate() {
            self.x[self.basis[i]] = v;
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gauss-Jordan with partial pivoting on a row-major `m x m` matrix.
fn invert(mut a: Vec<f64>, m: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for col in 0..m {
        let p = (col..m).max_by(|&i, &j| a[i * m + col].abs().total_cmp(&a[j * m + col].abs()))?;
        if a[p * m + col].abs() < 1e-14 {
            return None;
        }
        if p != col {
            for k in 0..m {
                a.swap(p * m + k, col * m + k);
                inv.swap(p * m + k, col * m + k);
            }
        }
        let piv = a[col * m + col];
        for k in 0..m {
            a[col * m + k] /= piv;
            inv[col * m + k] /= piv;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = a[r * m + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..m {
                a[r * m + k] -= f * a[col * m + k];
                inv[r * m + k] -= f * inv[col * m + k];
            }
        }
    }
    Some(inv)
}

mod lower_bounds {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| x.is_finite().then_some(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Option<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)).collect())
    }
}

mod upper_bounds {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| x.is_finite().then_some(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Option<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}
