//! Convex relaxations of the `α = 1`, `p = 2` Frank-Wolfe step and their scaling on random
//! labels.
//!
//! The step `max_{‖v‖₂=1} |(1/n) Σ_i y_i (vᵀw_i)₊|` with `w_i = z_i / R` is lifted to matrix
//! variables. Every kind stores one semidefinite matrix
//! `M = [[1, aᵀ, vᵀ], [a, A, J], [v, Jᵀ, V]]` whose auxiliary block `a` is empty for the
//! `d`-dimensional kind, holds `u_i = (vᵀw_i)₊` for the `(n+d)`-dimensional kind and
//! holds the signs `s_i` of `vᵀw_i` for the sign kind. Each rank-one choice built from a
//! unit direction is feasible with objective equal to the step value at that direction,
//! so every relaxation value bounds the exact step from above. The reported value is a
//! dual certificate from [`conic::ConicProgram::dual_bound`], valid even when the solver
//! stops early.

pub mod conic;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::{
    derive_seed, dot, loglog_slope, norm2, rng_from_seed, sample_gaussian, sample_lq_ball,
};
use crate::oracle::{oracle_exact, OracleProblem, DEFAULT_BUDGET};
use conic::{min_eigenvalue, smat, svec, svec_index, AdmmSettings, Cone, ConicProgram, EarlyStop};

/// Largest supported `n + d`.
pub const MAX_SIZE: usize = 40;

/// Which relaxation to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RelaxationKind {
    /// Semidefinite `V` with per-point second-order constraints on `u`.
    DimD,
    /// Adds the quadratic forms `U = uuᵀ` and `J = uvᵀ` to [`RelaxationKind::DimD`].
    DimNd,
    /// Sign vector `s` with `S = ssᵀ`, `J = svᵀ` and unit diagonal.
    Sign,
}

impl fmt::Display for RelaxationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelaxationKind::DimD => "d",
            RelaxationKind::DimNd => "nd",
            RelaxationKind::Sign => "sign",
        })
    }
}

impl FromStr for RelaxationKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" => Ok(RelaxationKind::DimD),
            "nd" => Ok(RelaxationKind::DimNd),
            "sign" => Ok(RelaxationKind::Sign),
            other => Err(invalid(format!(
                "unknown relaxation kind {other:?} (expected d, nd or sign)"
            ))),
        }
    }
}

/// A relaxation instance: scaled points `w_i = z_i / R`, labels and kind.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationProblem {
    ws: Vec<Vec<f64>>,
    y: Vec<f64>,
    kind: RelaxationKind,
}

impl RelaxationProblem {
    /// Validates an instance built from lifted points `z_i` and the radius `R`.
    pub fn new(zs: &[Vec<f64>], y: &[f64], radius: f64, kind: RelaxationKind) -> Result<Self> {
        if zs.is_empty() || zs.len() != y.len() {
            return Err(invalid("need one label per point and at least one point"));
        }
        let dim = zs[0].len();
        if dim < 2 || zs.iter().any(|z| z.len() != dim) {
            return Err(invalid(
                "lifted points must share a dimension of at least 2",
            ));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        if zs.iter().flatten().chain(y).any(|v| !v.is_finite()) {
            return Err(invalid("relaxation inputs must be finite"));
        }
        if zs.len() + dim - 1 > MAX_SIZE {
            return Err(invalid(format!(
                "n + d = {} exceeds the supported size {MAX_SIZE}",
                zs.len() + dim - 1
            )));
        }
        let ws = zs
            .iter()
            .map(|z| z.iter().map(|v| v / radius).collect())
            .collect();
        Ok(Self {
            ws,
            y: y.to_vec(),
            kind,
        })
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.ws.len()
    }

    /// Lifted dimension `d + 1`.
    pub fn dim(&self) -> usize {
        self.ws[0].len()
    }

    /// Relaxation kind.
    pub fn kind(&self) -> RelaxationKind {
        self.kind
    }

    /// Scaled points `w_i`.
    pub fn points(&self) -> &[Vec<f64>] {
        &self.ws
    }

    /// Labels.
    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    fn layout(&self) -> Layout {
        let aux = if self.kind == RelaxationKind::DimD {
            0
        } else {
            self.n()
        };
        let order = 1 + aux + self.dim();
        let extra = if self.kind == RelaxationKind::DimD {
            self.n()
        } else {
            0
        };
        Layout {
            kind: self.kind,
            n: self.n(),
            dim: self.dim(),
            aux,
            order,
            extra,
        }
    }

    /// Bounds on `|x_j|` over the feasible set, where `x` stacks the stored matrix and `u`.
    ///
    /// Entries of a semidefinite matrix obey `|M_ab| ≤ (M_aa M_bb)^{1/2}`. The diagonal of
    /// `V` is at most `tr V = 1`, the sign block has unit diagonal, and for the `(n+d)` kind
    /// `U_ii = (J w_i)_i ≤ (U_ii wᵢᵀVwᵢ)^{1/2}` gives `U_ii ≤ ‖w_i‖²`. The second-order
    /// constraints give `|u_i| ≤ ‖w_i‖`.
    fn variable_bounds(&self) -> Vec<f64> {
        let lay = self.layout();
        let mut diag = vec![1.0; lay.order];
        if lay.kind == RelaxationKind::DimNd {
            for (i, w) in self.ws.iter().enumerate() {
                diag[lay.aux_index(i)] = dot(w, w);
            }
        }
        let mut out = vec![0.0; lay.columns()];
        for a in 0..lay.order {
            for b in 0..=a {
                let scale = if a == b {
                    1.0
                } else {
                    std::f64::consts::SQRT_2
                };
                out[svec_index(lay.order, a, b)] = scale * (diag[a] * diag[b]).sqrt();
            }
        }
        if lay.kind == RelaxationKind::DimD {
            for (i, w) in self.ws.iter().enumerate() {
                out[lay.stored() + i] = norm2(w);
            }
        }
        out
    }
}

/// Primal variables of a relaxation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationVariables {
    /// The stored semidefinite matrix `M`, row by row.
    pub matrix: Vec<Vec<f64>>,
    /// Values `u_i` (taken from the first row of `M` for the `(n+d)` kind, empty for the sign kind).
    pub u: Vec<f64>,
    /// Lifted dimension, the order of the trailing block `V`.
    pub dim: usize,
}

impl RelaxationVariables {
    /// The vector `v` (first row of `M`, trailing block).
    pub fn v(&self) -> Vec<f64> {
        let m = self.matrix.len();
        self.matrix[0][m - self.dim..].to_vec()
    }

    /// The block `V`.
    pub fn big_v(&self) -> Vec<Vec<f64>> {
        let m = self.matrix.len();
        self.matrix[m - self.dim..]
            .iter()
            .map(|r| r[m - self.dim..].to_vec())
            .collect()
    }
}

/// Solver diagnostics aggregated over both label signs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationDiagnostics {
    /// Total ADMM iterations.
    pub iterations: usize,
    /// Largest primal residual `‖Ax + s − b‖∞`.
    pub primal_residual: f64,
    /// Largest dual residual `‖c + Aᵀλ‖∞`.
    pub dual_residual: f64,
    /// Largest duality gap.
    pub gap: f64,
    /// Whether each solve met the tolerance or was certified not to attain the maximum.
    pub converged: bool,
    /// Largest violation of the relaxation constraints by the returned variables.
    pub constraint_violation: f64,
}

/// Result of [`solve_relaxation`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationSolution {
    /// Certified upper bound on the exact step value (maximum over both label signs).
    pub value: f64,
    /// Relaxation objective at the returned variables.
    pub primal_value: f64,
    /// Label sign (`+1` or `−1`) of the side attaining `value`.
    pub sign: f64,
    /// Primal variables of that side.
    pub variables: RelaxationVariables,
    /// Solver diagnostics.
    pub diagnostics: RelaxationDiagnostics,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    kind: RelaxationKind,
    n: usize,
    dim: usize,
    aux: usize,
    order: usize,
    extra: usize,
}

type Lin = Vec<(usize, f64)>;

impl Layout {
    fn stored(&self) -> usize {
        self.order * (self.order + 1) / 2
    }

    fn columns(&self) -> usize {
        self.stored() + self.extra
    }

    fn entry(&self, a: usize, b: usize) -> Lin {
        let scale = if a == b {
            1.0
        } else {
            std::f64::consts::FRAC_1_SQRT_2
        };
        vec![(svec_index(self.order, a, b), scale)]
    }

    fn aux_index(&self, i: usize) -> usize {
        1 + i
    }

    fn v_index(&self, a: usize) -> usize {
        1 + self.aux + a
    }

    fn u(&self, i: usize) -> Lin {
        match self.kind {
            RelaxationKind::DimD => vec![(self.stored() + i, 1.0)],
            _ => self.entry(0, self.aux_index(i)),
        }
    }

    fn v_dot(&self, w: &[f64]) -> Lin {
        w.iter()
            .enumerate()
            .flat_map(|(a, wa)| scaled(self.entry(0, self.v_index(a)), *wa))
            .collect()
    }

    fn quad_v(&self, w: &[f64], wp: &[f64]) -> Lin {
        let mut out = Lin::new();
        for (a, wa) in w.iter().enumerate() {
            for (b, wb) in wp.iter().enumerate() {
                out.extend(scaled(
                    self.entry(self.v_index(a), self.v_index(b)),
                    wa * wb,
                ));
            }
        }
        out
    }

    fn v_times(&self, w: &[f64], row: usize) -> Lin {
        w.iter()
            .enumerate()
            .flat_map(|(b, wb)| scaled(self.entry(self.v_index(row), self.v_index(b)), *wb))
            .collect()
    }

    fn j_times(&self, i: usize, w: &[f64]) -> Lin {
        w.iter()
            .enumerate()
            .flat_map(|(a, wa)| scaled(self.entry(self.aux_index(i), self.v_index(a)), *wa))
            .collect()
    }

    fn trace_v(&self) -> Lin {
        (0..self.dim)
            .flat_map(|a| self.entry(self.v_index(a), self.v_index(a)))
            .collect()
    }
}

fn scaled(l: Lin, s: f64) -> Lin {
    l.into_iter().map(|(i, c)| (i, c * s)).collect()
}

fn combine(parts: &[(f64, &Lin)]) -> Lin {
    parts
        .iter()
        .flat_map(|(s, l)| scaled((*l).clone(), *s))
        .collect()
}

/// Affine expression `aᵀx + a₀`.
type Affine = (Lin, f64);

struct Builder {
    cols: usize,
    rows: Vec<Affine>,
    cones: Vec<Cone>,
}

impl Builder {
    fn push(&mut self, cone: Cone, exprs: Vec<Affine>) {
        debug_assert_eq!(cone.rows(), exprs.len());
        self.rows.extend(exprs);
        self.cones.push(cone);
    }

    fn finish(self, objective: &Lin) -> ConicProgram {
        let m = self.rows.len();
        let mut a = DMatrix::zeros(m, self.cols);
        let mut b = vec![0.0; m];
        for (r, (lin, c0)) in self.rows.iter().enumerate() {
            for (j, coef) in lin {
                a[(r, *j)] -= coef;
            }
            b[r] = *c0;
        }
        let mut c = vec![0.0; self.cols];
        for (j, coef) in objective {
            c[*j] -= coef;
        }
        ConicProgram {
            c,
            a,
            b,
            cones: self.cones,
        }
    }
}

/// Builds the conic program maximizing the relaxed objective for labels `sign · y`.
fn build(problem: &RelaxationProblem, sign: f64) -> (ConicProgram, Layout) {
    let lay = problem.layout();
    let (n, dim) = (lay.n, lay.dim);
    let ws = &problem.ws;
    let mut bld = Builder {
        cols: lay.columns(),
        rows: Vec::new(),
        cones: Vec::new(),
    };

    let mut zero: Vec<Affine> = vec![(lay.entry(0, 0), -1.0), (lay.trace_v(), -1.0)];
    let mut nonneg: Vec<Affine> = Vec::new();
    let mut socs: Vec<Vec<Affine>> = Vec::new();

    if lay.kind != RelaxationKind::Sign {
        for (i, w) in ws.iter().enumerate() {
            let t = combine(&[(2.0, &lay.u(i)), (-1.0, &lay.v_dot(w))]);
            let mut block = vec![(t.clone(), 0.0)];
            block.extend((0..dim).map(|a| (lay.v_times(w, a), 0.0)));
            socs.push(block);
            let q = lay.quad_v(w, w);
            socs.push(vec![(q.clone(), 1.0), (scaled(t, 2.0), 0.0), (q, -1.0)]);
        }
    }
    if lay.kind == RelaxationKind::DimNd {
        for (i, wi) in ws.iter().enumerate() {
            let uii = lay.entry(lay.aux_index(i), lay.aux_index(i));
            zero.push((combine(&[(1.0, &uii), (-1.0, &lay.j_times(i, wi))]), 0.0));
            for (j, wj) in ws.iter().enumerate().skip(i + 1) {
                let uij = lay.entry(lay.aux_index(i), lay.aux_index(j));
                let cross = combine(&[(-2.0, &lay.j_times(i, wj)), (-2.0, &lay.j_times(j, wi))]);
                let q = lay.quad_v(wi, wj);
                let base = combine(&[(4.0, &uij), (1.0, &q), (1.0, &cross)]);
                nonneg.push((combine(&[(1.0, &base), (-1.0, &q)]), 0.0));
                nonneg.push((combine(&[(1.0, &base), (1.0, &q)]), 0.0));
            }
        }
    }
    if lay.kind == RelaxationKind::Sign {
        for i in 0..n {
            zero.push((lay.entry(lay.aux_index(i), lay.aux_index(i)), -1.0));
        }
        for (i, wi) in ws.iter().enumerate() {
            let own = lay.j_times(i, wi);
            for j in (0..n).filter(|&j| j != i) {
                let other = lay.j_times(j, wi);
                nonneg.push((combine(&[(1.0, &own), (-1.0, &other)]), 0.0));
                nonneg.push((combine(&[(1.0, &own), (1.0, &other)]), 0.0));
            }
            let mut block = vec![(own, 0.0)];
            block.extend((0..dim).map(|a| (lay.v_times(wi, a), 0.0)));
            socs.push(block);
        }
    }

    bld.push(Cone::Zero(zero.len()), zero);
    if !nonneg.is_empty() {
        bld.push(Cone::NonNeg(nonneg.len()), nonneg);
    }
    for block in socs {
        bld.push(Cone::Soc(block.len()), block);
    }
    let psd: Vec<Affine> = (0..lay.stored()).map(|j| (vec![(j, 1.0)], 0.0)).collect();
    bld.push(Cone::Psd(lay.order), psd);

    let scale = sign / n as f64;
    let objective: Lin = match lay.kind {
        RelaxationKind::Sign => ws
            .iter()
            .enumerate()
            .flat_map(|(i, w)| {
                let part = combine(&[(1.0, &lay.j_times(i, w)), (1.0, &lay.v_dot(w))]);
                scaled(part, 0.5 * scale * problem.y[i])
            })
            .collect(),
        _ => (0..n)
            .flat_map(|i| scaled(lay.u(i), scale * problem.y[i]))
            .collect(),
    };
    (bld.finish(&objective), lay)
}

fn variables_from(x: &[f64], lay: &Layout) -> RelaxationVariables {
    let m = smat(&x[..lay.stored()], lay.order);
    let matrix = (0..lay.order)
        .map(|i| m.row(i).iter().copied().collect())
        .collect();
    let u = match lay.kind {
        RelaxationKind::DimD => x[lay.stored()..].to_vec(),
        RelaxationKind::DimNd => (0..lay.n).map(|i| m[(0, lay.aux_index(i))]).collect(),
        RelaxationKind::Sign => Vec::new(),
    };
    RelaxationVariables {
        matrix,
        u,
        dim: lay.dim,
    }
}

fn stack(vars: &RelaxationVariables, lay: &Layout) -> Result<Vec<f64>> {
    if vars.matrix.len() != lay.order || vars.matrix.iter().any(|r| r.len() != lay.order) {
        return Err(invalid(format!("expected a {0}x{0} matrix", lay.order)));
    }
    let m = DMatrix::from_fn(lay.order, lay.order, |i, j| vars.matrix[i][j]);
    let mut x = svec(&m);
    if lay.kind == RelaxationKind::DimD {
        if vars.u.len() != lay.n {
            return Err(invalid(format!("expected {} values of u", lay.n)));
        }
        x.extend_from_slice(&vars.u);
    }
    Ok(x)
}

/// Largest violation of the relaxation constraints by `vars`, including the negated
/// smallest eigenvalue of the stored matrix.
pub fn constraint_violation(
    problem: &RelaxationProblem,
    vars: &RelaxationVariables,
) -> Result<f64> {
    let (prog, lay) = build(problem, 1.0);
    let x = stack(vars, &lay)?;
    let ax = &prog.a * nalgebra::DVector::from_column_slice(&x);
    let s: Vec<f64> = prog.b.iter().zip(ax.iter()).map(|(b, v)| b - v).collect();
    let mut worst: f64 = 0.0;
    let mut at = 0;
    for cone in &prog.cones {
        let block = &s[at..at + cone.rows()];
        let v = match *cone {
            Cone::Zero(_) => block.iter().map(|x| x.abs()).fold(0.0, f64::max),
            Cone::NonNeg(_) => block.iter().map(|x| -x).fold(0.0, f64::max),
            Cone::Soc(_) => (norm2(&block[1..]) - block[0]).max(0.0),
            Cone::Psd(k) => (-min_eigenvalue(block, k)).max(0.0),
        };
        worst = worst.max(v);
        at += cone.rows();
    }
    Ok(worst)
}

/// Relaxation objective at `vars` for labels `sign · y`.
pub fn objective(
    problem: &RelaxationProblem,
    vars: &RelaxationVariables,
    sign: f64,
) -> Result<f64> {
    let (prog, lay) = build(problem, sign);
    let x = stack(vars, &lay)?;
    Ok(-dot(&prog.c, &x))
}

/// The rank-one variables generated by a unit direction `v` (`‖v‖₂ = 1`).
pub fn rank_one_point(problem: &RelaxationProblem, v: &[f64]) -> Result<RelaxationVariables> {
    if v.len() != problem.dim() || (norm2(v) - 1.0).abs() > 1e-12 {
        return Err(invalid(
            "rank-one point needs a unit direction of the lifted dimension",
        ));
    }
    let lay = problem.layout();
    let proj: Vec<f64> = problem.ws.iter().map(|w| dot(v, w)).collect();
    let aux: Vec<f64> = match lay.kind {
        RelaxationKind::DimD => Vec::new(),
        RelaxationKind::DimNd => proj.iter().map(|p| p.max(0.0)).collect(),
        RelaxationKind::Sign => proj
            .iter()
            .map(|p| if *p >= 0.0 { 1.0 } else { -1.0 })
            .collect(),
    };
    let mut zeta = vec![1.0];
    zeta.extend(&aux);
    zeta.extend_from_slice(v);
    let matrix = zeta
        .iter()
        .map(|a| zeta.iter().map(|b| a * b).collect())
        .collect();
    let u = match lay.kind {
        RelaxationKind::DimD | RelaxationKind::DimNd => proj.iter().map(|p| p.max(0.0)).collect(),
        RelaxationKind::Sign => Vec::new(),
    };
    Ok(RelaxationVariables {
        matrix,
        u,
        dim: lay.dim,
    })
}

/// Label signs ordered by the better rank-one objective over the normalized points, so
/// the likely winner is solved first and bounds the other side.
fn side_order(problem: &RelaxationProblem) -> [f64; 2] {
    let best = |sign: f64| {
        problem
            .ws
            .iter()
            .filter_map(|w| {
                let nw = norm2(w);
                let v: Vec<f64> = w.iter().map(|x| x / nw).collect();
                let s: f64 = problem
                    .ws
                    .iter()
                    .zip(&problem.y)
                    .map(|(z, y)| y * dot(&v, z).max(0.0))
                    .sum();
                (nw > 0.0).then_some(sign * s)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    if best(1.0) >= best(-1.0) {
        [1.0, -1.0]
    } else {
        [-1.0, 1.0]
    }
}

/// Solves the relaxation for both label signs and returns the larger certified bound.
///
/// Returns a flagged solution rather than an error when the iteration limit is reached.
pub fn solve_relaxation(
    problem: &RelaxationProblem,
    max_iter: usize,
    tol: f64,
) -> Result<RelaxationSolution> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(invalid("tolerance and iteration limit must be positive"));
    }
    if problem.y.iter().all(|v| *v == 0.0) {
        let mut e = vec![0.0; problem.dim()];
        e[problem.dim() - 1] = 1.0;
        let variables = rank_one_point(problem, &e)?;
        let violation = constraint_violation(problem, &variables)?;
        return Ok(RelaxationSolution {
            value: 0.0,
            primal_value: 0.0,
            sign: 1.0,
            variables,
            diagnostics: RelaxationDiagnostics {
                iterations: 0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                gap: 0.0,
                converged: true,
                constraint_violation: violation,
            },
        });
    }
    let settings = AdmmSettings { max_iter, tol };
    let bounds = problem.variable_bounds();
    let mut best: Option<RelaxationSolution> = None;
    let mut diag = RelaxationDiagnostics {
        iterations: 0,
        primal_residual: 0.0,
        dual_residual: 0.0,
        gap: 0.0,
        converged: true,
        constraint_violation: 0.0,
    };
    let mut threshold = f64::NEG_INFINITY;
    for sign in side_order(problem) {
        let (prog, lay) = build(problem, sign);
        let early = best.is_some().then_some(EarlyStop {
            x_bounds: &bounds,
            threshold,
        });
        let sol = prog.solve_until(settings, early)?;
        diag.iterations += sol.iterations;
        diag.primal_residual = diag.primal_residual.max(sol.primal_residual);
        diag.dual_residual = diag.dual_residual.max(sol.dual_residual);
        diag.gap = diag.gap.max(sol.gap);
        diag.converged &= sol.converged || sol.dominated;
        let value = prog.dual_bound(&sol.lambda, &bounds);
        if best.as_ref().is_none_or(|b| value > b.value) {
            threshold = value;
            best = Some(RelaxationSolution {
                value,
                primal_value: -dot(&prog.c, &sol.x),
                sign,
                variables: variables_from(&sol.x, &lay),
                diagnostics: diag.clone(),
            });
        }
    }
    let mut best = best.expect("two sides solved");
    diag.constraint_violation = constraint_violation(problem, &best.variables)?;
    best.diagnostics = diag;
    Ok(best)
}

/// What [`random_direction_scaling`] evaluates on each random instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ScalingSolver {
    /// The exact step value from hyperplane-arrangement enumeration.
    Exact,
    /// The certified value of a relaxation.
    Relaxation(RelaxationKind),
}

impl FromStr for ScalingSolver {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ScalingSolver::Exact),
            other => other.parse().map(ScalingSolver::Relaxation),
        }
    }
}

impl fmt::Display for ScalingSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalingSolver::Exact => f.write_str("exact"),
            ScalingSolver::Relaxation(k) => write!(f, "{k}"),
        }
    }
}

/// One row of the scaling table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    /// Number of points.
    pub n: usize,
    /// Mean value over trials.
    pub mean: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    /// Trials whose solver did not meet its tolerance.
    pub non_converged: usize,
}

/// Mean step value against `n` with the fitted log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingTable {
    /// Solver used.
    pub solver: ScalingSolver,
    /// Input dimension `d`.
    pub d: usize,
    /// One row per grid point.
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `log mean` against `log n`.
    pub slope: f64,
}

impl ScalingTable {
    /// CSV rendering with header `n,mean,std_error,non_converged` and a trailing slope comment.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,mean,std_error,non_converged\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.n, r.mean, r.std_error, r.non_converged
            ));
        }
        out.push_str(&format!(
            "# solver={} d={} slope={}\n",
            self.solver, self.d, self.slope
        ));
        out
    }
}

/// A random instance: `x_i` uniform in the unit ball of `R^d`, lifted with `R = 1`, and
/// standard Gaussian labels.
pub fn random_instance(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let zs = (0..n)
        .map(|_| {
            let mut z = sample_lq_ball(&mut rng, d, 2.0, 1.0);
            z.push(1.0);
            z
        })
        .collect();
    let y = sample_gaussian(&mut rng, n);
    (zs, y)
}

/// Estimates the mean step value (exact or relaxed) on random Gaussian labels for each `n`
/// in `n_grid` and fits its decay rate in `n`.
pub fn random_direction_scaling(
    solver: ScalingSolver,
    n_grid: &[usize],
    d: usize,
    trials: usize,
    seed: u64,
    settings: AdmmSettings,
) -> Result<ScalingTable> {
    if n_grid.len() < 2 || trials < 2 || d == 0 {
        return Err(invalid(
            "need at least two grid points, two trials and d ≥ 1",
        ));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let vals: Vec<(f64, bool)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let (zs, y) =
                    random_instance(n, d, derive_seed(derive_seed(seed, n as u64), t as u64));
                match solver {
                    ScalingSolver::Exact => {
                        let p = OracleProblem::new(&zs, &y, 1, 2.0, 1.0)?;
                        Ok((oracle_exact(&p, DEFAULT_BUDGET)?.value, true))
                    }
                    ScalingSolver::Relaxation(kind) => {
                        let p = RelaxationProblem::new(&zs, &y, 1.0, kind)?;
                        let s = solve_relaxation(&p, settings.max_iter, settings.tol)?;
                        Ok((s.value, s.diagnostics.converged))
                    }
                }
            })
            .collect::<Result<_>>()?;
        let k = vals.len() as f64;
        let mean = vals.iter().map(|v| v.0).sum::<f64>() / k;
        let var = vals.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (k - 1.0);
        rows.push(ScalingRow {
            n,
            mean,
            std_error: (var / k).sqrt(),
            non_converged: vals.iter().filter(|v| !v.1).count(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    Ok(ScalingTable {
        solver,
        d,
        slope: loglog_slope(&xs, &ys),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> (usize, f64) {
        (200_000, 1e-7)
    }

    fn exact(zs: &[Vec<f64>], y: &[f64]) -> f64 {
        let p = OracleProblem::new(zs, y, 1, 2.0, 1.0).unwrap();
        oracle_exact(&p, DEFAULT_BUDGET).unwrap().value
    }

    #[test]
    fn single_point_bounds_exact_value() {
        let zs = vec![vec![1.0, 0.0]];
        for kind in [
            RelaxationKind::DimD,
            RelaxationKind::DimNd,
            RelaxationKind::Sign,
        ] {
            let p = RelaxationProblem::new(&zs, &[1.0], 1.0, kind).unwrap();
            let (it, tol) = settings();
            let s = solve_relaxation(&p, it, tol).unwrap();
            assert!(s.value >= 1.0 - 1e-9, "{kind}: {}", s.value);
        }
    }

    #[test]
    fn zero_labels_give_zero() {
        let zs = vec![vec![0.5, 1.0], vec![-0.3, 1.0]];
        let p = RelaxationProblem::new(&zs, &[0.0, 0.0], 1.0, RelaxationKind::DimD).unwrap();
        let s = solve_relaxation(&p, 1000, 1e-6).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.diagnostics.constraint_violation < 1e-12);
    }

    #[test]
    fn rank_one_points_are_feasible_with_step_objective() {
        let (zs, y) = random_instance(5, 2, 3);
        let v = [0.6, -0.48, 0.64];
        let step: f64 = zs
            .iter()
            .zip(&y)
            .map(|(z, yi)| yi * dot(&v, z).max(0.0))
            .sum::<f64>()
            / 5.0;
        for kind in [
            RelaxationKind::DimD,
            RelaxationKind::DimNd,
            RelaxationKind::Sign,
        ] {
            let p = RelaxationProblem::new(&zs, &y, 1.0, kind).unwrap();
            let pt = rank_one_point(&p, &v).unwrap();
            assert!(constraint_violation(&p, &pt).unwrap() < 1e-12, "{kind}");
            assert!(
                (objective(&p, &pt, 1.0).unwrap() - step).abs() < 1e-12,
                "{kind}"
            );
        }
    }

    #[test]
    fn random_instance_bounds_exact_and_nests() {
        let (zs, y) = random_instance(5, 2, 17);
        let e = exact(&zs, &y);
        let (it, tol) = settings();
        let mut vals = Vec::new();
        for kind in [
            RelaxationKind::DimD,
            RelaxationKind::DimNd,
            RelaxationKind::Sign,
        ] {
            let p = RelaxationProblem::new(&zs, &y, 1.0, kind).unwrap();
            let s = solve_relaxation(&p, it, tol).unwrap();
            assert!(s.value >= e - 1e-9, "{kind}: {} < {e}", s.value);
            assert!(
                s.diagnostics.constraint_violation < 1e-6,
                "{kind}: {:?}",
                s.diagnostics
            );
            vals.push(s.value);
        }
        assert!(vals[1] <= vals[0] + 1e-6, "{vals:?}");
    }

    #[test]
    fn rejects_oversized_instances() {
        let (zs, y) = random_instance(40, 2, 0);
        assert!(RelaxationProblem::new(&zs, &y, 1.0, RelaxationKind::DimD).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in [
            RelaxationKind::DimD,
            RelaxationKind::DimNd,
            RelaxationKind::Sign,
        ] {
            assert_eq!(kind.to_string().parse::<RelaxationKind>().unwrap(), kind);
        }
        assert_eq!(
            "exact".parse::<ScalingSolver>().unwrap(),
            ScalingSolver::Exact
        );
        assert!("sdp".parse::<RelaxationKind>().is_err());
    }

    #[test]
    fn exact_step_decays_like_inverse_root_n() {
        let t = random_direction_scaling(
            ScalingSolver::Exact,
            &[8, 16, 32, 64],
            2,
            200,
            5,
            AdmmSettings::default(),
        )
        .unwrap();
        assert!((t.slope + 0.5).abs() < 0.1, "{t:?}");
        assert!(t.rows.iter().all(|r| r.mean > 0.0));
        assert!(t.to_csv().starts_with("n,mean,std_error,non_converged\n8,"));
    }

    #[test]
    fn relaxation_scaling_table_is_reported() {
        let s = AdmmSettings {
            max_iter: 20_000,
            tol: 1e-6,
        };
        let t = random_direction_scaling(
            ScalingSolver::Relaxation(RelaxationKind::DimD),
            &[4, 8, 16],
            1,
            4,
            2,
            s,
        )
        .unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.slope.is_finite());
        assert!(t.rows.iter().all(|r| r.mean > 0.0));
    }
}
