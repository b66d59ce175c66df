//! Operator-splitting solver for convex quadratic programs
//!
//! ```text
//! minimize   ½ xᵀ P x + qᵀ x + c
//! subject to l ≤ A x ≤ u
//! ```
//!
//! Equality rows have `l = u`; variable boxes are identity rows. The
//! iteration alternates an equality-constrained quadratic step (one cached
//! Cholesky factorization) with a projection onto `[l, u]` and a scaled dual
//! update. After convergence an active-set polish solves the KKT system of
//! the guessed active constraints directly.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

/// Sparse-ish affine expression `Σ coef·v[idx] + constant` used to assemble
/// objectives and constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(idx: usize) -> Self {
        Self {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn add_term(&mut self, idx: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((idx, coef));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * v[i]).sum::<f64>() + self.constant
    }

    fn dense(&self, n: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for &(i, c) in &self.terms {
            out[i] += c;
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("iteration limit reached after {} iterations", .0.iterations)]
    MaxIterations(Box<SolveReport>),
    #[error("problem is primal infeasible (certificate after {} iterations)", .0.iterations)]
    Infeasible(Box<SolveReport>),
}

impl QpError {
    pub fn report(&self) -> Option<&SolveReport> {
        match self {
            QpError::Invalid(_) => None,
            QpError::MaxIterations(r) | QpError::Infeasible(r) => Some(r),
        }
    }
}

/// Convex QP in normal form.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSpec {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
    pub constraints: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QpSpec {
    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.lower.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        0.5 * xv.dot(&(&self.hessian * &xv)) + self.linear.dot(&xv) + self.constant
    }

    /// Largest violation of `l ≤ A x ≤ u`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let ax = &self.constraints * DVector::from_column_slice(x);
        (0..ax.len())
            .map(|i| (self.lower[i] - ax[i]).max(ax[i] - self.upper[i]).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.num_vars();
        let k = self.num_constraints();
        if self.hessian.shape() != (n, n) {
            return Err(QpError::Invalid(format!(
                "hessian is {:?}, expected {n}x{n}",
                self.hessian.shape()
            )));
        }
        if self.constraints.shape() != (k, n) || self.upper.len() != k {
            return Err(QpError::Invalid("constraint shapes disagree".into()));
        }
        for i in 0..k {
            if self.lower[i].is_nan() || self.upper[i].is_nan() || self.lower[i] > self.upper[i] {
                return Err(QpError::Invalid(format!("row {i} has lower > upper")));
            }
        }
        let scale = self.hessian.amax().max(1.0);
        let asym = (&self.hessian - self.hessian.transpose()).amax();
        if asym > 1e-9 * scale {
            return Err(QpError::Invalid("hessian is not symmetric".into()));
        }
        if n > 0 {
            let min_eig = self.hessian.clone().symmetric_eigenvalues().min();
            if min_eig < -1e-9 * scale {
                return Err(QpError::Invalid(format!(
                    "hessian is not positive semidefinite (eigenvalue {min_eig:e})"
                )));
            }
        }
        Ok(())
    }
}

/// Incremental builder for [`QpSpec`].
#[derive(Debug, Clone)]
pub struct QpBuilder {
    n: usize,
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
    rows: Vec<(AffineExpr, f64, f64)>,
}

impl QpBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            hessian: DMatrix::zeros(n, n),
            linear: DVector::zeros(n),
            constant: 0.0,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Adds `weight · (a·e² + b·e)` to the objective.
    pub fn add_quadratic_term(&mut self, e: &AffineExpr, a: f64, b: f64, weight: f64) {
        let (a, b) = (a * weight, b * weight);
        let k = e.constant;
        for &(i, ci) in &e.terms {
            for &(j, cj) in &e.terms {
                self.hessian[(i, j)] += 2.0 * a * ci * cj;
            }
            self.linear[i] += (2.0 * a * k + b) * ci;
        }
        self.constant += a * k * k + b * k;
    }

    /// `lo ≤ e ≤ hi`; the expression constant is moved to the bounds.
    pub fn add_constraint(&mut self, e: AffineExpr, lo: f64, hi: f64) {
        let k = e.constant;
        let mut e = e;
        e.constant = 0.0;
        self.rows.push((e, lo - k, hi - k));
    }

    pub fn add_equality(&mut self, e: AffineExpr, rhs: f64) {
        self.add_constraint(e, rhs, rhs);
    }

    pub fn add_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.add_constraint(AffineExpr::var(var), lo, hi);
    }

    pub fn build(self) -> QpSpec {
        let k = self.rows.len();
        let mut a = DMatrix::zeros(k, self.n);
        let mut lower = DVector::zeros(k);
        let mut upper = DVector::zeros(k);
        for (r, (e, lo, hi)) in self.rows.into_iter().enumerate() {
            a.set_row(r, &e.dense(self.n).transpose());
            lower[r] = lo;
            upper[r] = hi;
        }
        // symmetrize against accumulated round-off
        let h = (&self.hessian + self.hessian.transpose()) * 0.5;
        QpSpec {
            hessian: h,
            linear: self.linear,
            constant: self.constant,
            constraints: a,
            lower,
            upper,
        }
    }
}

/// Solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iterations: usize,
    /// Over-relaxation, in `[1, 1.8]`.
    pub alpha: f64,
    pub sigma: f64,
    pub eps_infeasible: f64,
    pub scaling_iterations: usize,
    pub polish: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            eps_abs: 1e-8,
            eps_rel: 1e-6,
            max_iterations: 50_000,
            alpha: 1.6,
            sigma: 1e-6,
            eps_infeasible: 1e-6,
            scaling_iterations: 10,
            polish: true,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), QpError> {
        let positive = [
            self.rho,
            self.eps_abs,
            self.eps_rel,
            self.sigma,
            self.eps_infeasible,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.max_iterations == 0 {
            return Err(QpError::Invalid(
                "solver parameters must be positive".into(),
            ));
        }
        if !(1.0..=1.8).contains(&self.alpha) {
            return Err(QpError::Invalid("alpha must lie in [1, 1.8]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    #[default]
    Optimal,
    MaxIterations,
    Infeasible,
}

/// Per-iteration record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub polished: bool,
}

impl SolveReport {
    /// Trace CSV: `iteration,primal_res,dual_res,objective`.
    pub fn write_trace<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,primal_res,dual_res,objective")?;
        for r in &self.history {
            writeln!(
                w,
                "{},{:e},{:e},{:e}",
                r.iteration, r.primal_residual, r.dual_residual, r.objective
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Constraint multipliers (positive on active upper bounds).
    pub y: Vec<f64>,
    pub report: SolveReport,
}

/// Optional starting point.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn solve_qp(spec: &QpSpec, params: &SolverParams) -> Result<QpSolution, QpError> {
    solve_qp_warm(spec, params, None)
}

struct Scaling {
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

fn ruiz(p: &DMatrix<f64>, q: &DVector<f64>, a: &DMatrix<f64>, iters: usize) -> Scaling {
    let n = q.len();
    let k = a.nrows();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(k, 1.0);
    let mut ps = p.clone();
    let mut as_ = a.clone();
    let clamp = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };
    for _ in 0..iters {
        let mut dd = DVector::zeros(n);
        for j in 0..n {
            let col = ps.column(j).amax().max(as_.column(j).amax());
            dd[j] = 1.0 / clamp(col).sqrt();
        }
        let mut de = DVector::zeros(k);
        for i in 0..k {
            de[i] = 1.0 / clamp(as_.row(i).amax()).sqrt();
        }
        for j in 0..n {
            for i in 0..n {
                ps[(i, j)] *= dd[i] * dd[j];
            }
            for i in 0..k {
                as_[(i, j)] *= de[i] * dd[j];
            }
        }
        d.component_mul_assign(&dd);
        e.component_mul_assign(&de);
    }
    let qs = q.component_mul(&d);
    let mean_col = if n > 0 {
        (0..n).map(|j| ps.column(j).amax()).sum::<f64>() / n as f64
    } else {
        1.0
    };
    // a large linear term does not hurt conditioning; only fall back to it
    // when there is no curvature to normalize
    let c = if mean_col >= 1e-4 {
        1.0 / clamp(mean_col)
    } else {
        1.0 / clamp(qs.amax())
    };
    Scaling { d, e, c }
}

pub fn solve_qp_warm(
    spec: &QpSpec,
    params: &SolverParams,
    warm: Option<&WarmStart>,
) -> Result<QpSolution, QpError> {
    spec.validate()?;
    params.validate()?;
    let n = spec.num_vars();
    let k = spec.num_constraints();

    if n == 0 {
        let viol = (0..k)
            .map(|i| spec.lower[i].max(-spec.upper[i]).max(0.0))
            .fold(0.0, f64::max);
        let report = SolveReport {
            status: if viol <= params.eps_abs {
                SolveStatus::Optimal
            } else {
                SolveStatus::Infeasible
            },
            iterations: 0,
            history: Vec::new(),
            objective: spec.constant,
            primal_residual: viol,
            dual_residual: 0.0,
            polished: false,
        };
        return match report.status {
            SolveStatus::Optimal => Ok(QpSolution {
                x: Vec::new(),
                y: vec![0.0; k],
                report,
            }),
            _ => Err(QpError::Infeasible(Box::new(report))),
        };
    }

    let sc = ruiz(
        &spec.hessian,
        &spec.linear,
        &spec.constraints,
        params.scaling_iterations,
    );
    let dmat = DMatrix::from_diagonal(&sc.d);
    let emat = DMatrix::from_diagonal(&sc.e);
    let p = (&dmat * &spec.hessian * &dmat) * sc.c;
    let q = spec.linear.component_mul(&sc.d) * sc.c;
    let a = &emat * &spec.constraints * &dmat;
    let l = spec.lower.component_mul(&sc.e);
    let u = spec.upper.component_mul(&sc.e);
    let at = a.transpose();

    let rho_vec = DVector::from_fn(k, |i, _| {
        if spec.lower[i] == f64::NEG_INFINITY && spec.upper[i] == f64::INFINITY {
            1e-6
        } else if spec.upper[i] - spec.lower[i] < 1e-12 {
            1e3 * params.rho
        } else {
            params.rho
        }
    });
    let mut kkt = &p + DMatrix::identity(n, n) * params.sigma;
    kkt += &at * DMatrix::from_diagonal(&rho_vec) * &a;
    let chol: Cholesky<f64, Dyn> = Cholesky::new(kkt)
        .ok_or_else(|| QpError::Invalid("KKT matrix is not positive definite".into()))?;

    let mut x = DVector::zeros(n);
    let mut y = DVector::zeros(k);
    if let Some(w) = warm {
        if w.x.len() == n {
            x = DVector::from_column_slice(&w.x).component_div(&sc.d);
        }
        if w.y.len() == k {
            y = DVector::from_column_slice(&w.y).component_div(&sc.e) * sc.c;
        }
    }
    let mut z = clamp_vec(&(&a * &x), &l, &u);

    let alpha = params.alpha;
    let mut history = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = params.max_iterations;
    let mut prim_res = f64::INFINITY;
    let mut dual_res = f64::INFINITY;

    for it in 1..=params.max_iterations {
        let y_prev = y.clone();
        let rhs = &x * params.sigma - &q + &at * (rho_vec.component_mul(&z) - &y);
        let x_tilde = chol.solve(&rhs);
        let z_tilde = &a * &x_tilde;
        x = &x_tilde * alpha + &x * (1.0 - alpha);
        let z_relaxed = &z_tilde * alpha + &z * (1.0 - alpha);
        let z_new = clamp_vec(&(&z_relaxed + y.component_div(&rho_vec)), &l, &u);
        y += rho_vec.component_mul(&(&z_relaxed - &z_new));
        z = z_new;

        // residuals in the original (unscaled) units
        let ax = &a * &x;
        let r_prim = (&ax - &z).component_div(&sc.e);
        prim_res = r_prim.amax();
        let px = &p * &x;
        let aty = &at * &y;
        let r_dual = (&px + &q + &aty).component_div(&sc.d) / sc.c;
        dual_res = r_dual.amax();
        let x_orig = x.component_mul(&sc.d);
        let obj = spec.objective(x_orig.as_slice());
        history.push(IterationRecord {
            iteration: it,
            primal_residual: prim_res,
            dual_residual: dual_res,
            objective: obj,
        });

        let eps_prim = params.eps_abs
            + params.eps_rel
                * ax.component_div(&sc.e)
                    .amax()
                    .max(z.component_div(&sc.e).amax());
        let eps_dual = params.eps_abs
            + params.eps_rel
                * px.component_div(&sc.d)
                    .amax()
                    .max(aty.component_div(&sc.d).amax())
                    .max(q.component_div(&sc.d).amax())
                / sc.c;
        if prim_res <= eps_prim && dual_res <= eps_dual {
            status = SolveStatus::Optimal;
            iterations = it;
            break;
        }
        if primal_infeasible(&(&y - &y_prev), &at, &l, &u, &sc, params.eps_infeasible) {
            status = SolveStatus::Infeasible;
            iterations = it;
            break;
        }
    }

    let mut x_out: Vec<f64> = x.component_mul(&sc.d).iter().copied().collect();
    let mut y_out: Vec<f64> = (y.component_mul(&sc.e) / sc.c).iter().copied().collect();
    let mut polished = false;
    if status == SolveStatus::Optimal && params.polish {
        let z_out = z.component_div(&sc.e);
        if let Some((xp, yp, pr, dr)) = polish(spec, &y_out, z_out.as_slice()) {
            if pr <= prim_res.max(1e-10) && dr <= dual_res.max(1e-10) {
                x_out = xp;
                y_out = yp;
                prim_res = pr;
                dual_res = dr;
                polished = true;
            }
        }
    }

    let report = SolveReport {
        status,
        iterations,
        objective: spec.objective(&x_out),
        history,
        primal_residual: prim_res,
        dual_residual: dual_res,
        polished,
    };
    match status {
        SolveStatus::Optimal => Ok(QpSolution {
            x: x_out,
            y: y_out,
            report,
        }),
        SolveStatus::MaxIterations => Err(QpError::MaxIterations(Box::new(report))),
        SolveStatus::Infeasible => Err(QpError::Infeasible(Box::new(report))),
    }
}

fn clamp_vec(v: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| v[i].max(l[i]).min(u[i]))
}

fn primal_infeasible(
    dy: &DVector<f64>,
    at: &DMatrix<f64>,
    l: &DVector<f64>,
    u: &DVector<f64>,
    sc: &Scaling,
    eps: f64,
) -> bool {
    let norm = dy.component_mul(&sc.e).amax();
    if norm < 1e-12 {
        return false;
    }
    let lhs = (at * dy).component_div(&sc.d).amax();
    if lhs > eps * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        let v = dy[i];
        if v > 0.0 {
            if u[i] == f64::INFINITY {
                return false;
            }
            support += u[i] * v;
        } else if v < 0.0 {
            if l[i] == f64::NEG_INFINITY {
                return false;
            }
            support += l[i] * v;
        }
    }
    support < -eps * norm
}

/// Solves the KKT system of the guessed active set, then repairs the guess:
/// rows whose multiplier has the wrong sign are released and violated rows
/// are added at their bound. Returns the polished point with its primal and
/// dual residuals.
fn polish(spec: &QpSpec, y: &[f64], z: &[f64]) -> Option<(Vec<f64>, Vec<f64>, f64, f64)> {
    let k = spec.num_constraints();
    // None: inactive; Some(true): at lower; Some(false): at upper
    let mut state: Vec<Option<bool>> = (0..k)
        .map(|i| {
            let (lo, hi) = (spec.lower[i], spec.upper[i]);
            if hi - lo < 1e-12 || z[i] - lo < -y[i] {
                Some(true)
            } else if hi - z[i] < y[i] {
                Some(false)
            } else {
                None
            }
        })
        .collect();
    for _ in 0..(2 * k + 2) {
        let active: Vec<(usize, f64)> = state
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|low| (i, if low { spec.lower[i] } else { spec.upper[i] })))
            .collect();
        let (xp, mults) = solve_active_kkt(spec, &active)?;
        let mut yp = vec![0.0; k];
        let mut worst: Option<(usize, f64)> = None;
        for (&(i, _), &mult) in active.iter().zip(&mults) {
            yp[i] = mult;
            if spec.upper[i] - spec.lower[i] < 1e-12 {
                continue;
            }
            // lower-active rows need y ≤ 0, upper-active rows y ≥ 0
            let wrong = if state[i] == Some(true) { mult } else { -mult };
            if wrong > 1e-9 * (1.0 + mult.abs()) && worst.is_none_or(|(_, w)| wrong > w) {
                worst = Some((i, wrong));
            }
        }
        if let Some((i, _)) = worst {
            state[i] = None;
            continue;
        }
        let ax = &spec.constraints * DVector::from_column_slice(&xp);
        let mut violated: Option<(usize, f64, bool)> = None;
        for i in 0..k {
            let v_lo = spec.lower[i] - ax[i];
            let v_hi = ax[i] - spec.upper[i];
            let (v, low) = if v_lo > v_hi {
                (v_lo, true)
            } else {
                (v_hi, false)
            };
            let tol = 1e-12 * (1.0 + spec.lower[i].abs().min(spec.upper[i].abs()));
            if v > tol && violated.is_none_or(|(_, w, _)| v > w) {
                violated = Some((i, v, low));
            }
        }
        if let Some((i, _, low)) = violated {
            if state[i].is_some() {
                return None;
            }
            state[i] = Some(low);
            continue;
        }
        let xv = DVector::from_column_slice(&xp);
        let yv = DVector::from_column_slice(&yp);
        let dual = (&spec.hessian * &xv + &spec.linear + spec.constraints.transpose() * &yv).amax();
        let prim = spec.max_violation(&xp);
        return Some((xp, yp, prim, dual));
    }
    None
}

/// Regularized KKT solve with iterative refinement for the rows in
/// `active`, each held at the given value.
fn solve_active_kkt(spec: &QpSpec, active: &[(usize, f64)]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = spec.num_vars();
    let na = active.len();
    let dim = n + na;
    let delta = 1e-9;
    let mut kk = DMatrix::zeros(dim, dim);
    kk.view_mut((0, 0), (n, n)).copy_from(&spec.hessian);
    for (r, &(i, _)) in active.iter().enumerate() {
        for j in 0..n {
            let v = spec.constraints[(i, j)];
            kk[(n + r, j)] = v;
            kk[(j, n + r)] = v;
        }
    }
    let mut rhs = DVector::zeros(dim);
    for j in 0..n {
        rhs[j] = -spec.linear[j];
    }
    for (r, &(_, b)) in active.iter().enumerate() {
        rhs[n + r] = b;
    }
    let mut reg = kk.clone();
    for j in 0..n {
        reg[(j, j)] += delta;
    }
    for r in 0..na {
        reg[(n + r, n + r)] -= delta;
    }
    let lu = reg.lu();
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..25 {
        let resid = &rhs - &kk * &sol;
        if resid.amax() < 1e-14 * (1.0 + rhs.amax()) {
            break;
        }
        sol += lu.solve(&resid)?;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((
        sol.rows(0, n).iter().copied().collect(),
        sol.rows(n, na).iter().copied().collect(),
    ))
}
