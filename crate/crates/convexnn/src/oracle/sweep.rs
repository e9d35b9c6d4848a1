//! Exact oracle in lifted dimension 2 or 3 by walking the great circles of the arrangement.
//!
//! In dimension 3 each hyperplane `z_iᵀv = 0` cuts the sphere along a great circle. Walking
//! one circle through its sorted crossings with the others visits every edge on it, and the
//! positive sets of the edge and of the two cells beside it change by one index per
//! crossing. Every visited vertex, edge and cell proposes directions together with a key
//! that equals the objective whenever the direction lies in its face. Proposals are
//! evaluated in decreasing key order until the key drops below the best evaluated value,
//! which returns the maximum over all faces. Dimension 2 is the walk along the single
//! circle of the plane.
//!
//! The walk assumes general position: no two points parallel and no three circles through
//! a common point. [`sweep_maximizer`] returns `None` otherwise, and callers fall back to
//! the general enumeration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::OracleProblem;
use crate::model::activation;

const PARALLEL_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-10;
const KEY_SLACK: f64 = 1e-10;

type V3 = [f64; 3];

fn dot3(a: &V3, b: &V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &V3) -> f64 {
    dot3(a, a).sqrt()
}

fn cross(a: &V3, b: &V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale(a: &V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn axpy3(s: f64, x: &V3, y: &mut V3) {
    for k in 0..3 {
        y[k] += s * x[k];
    }
}

/// How the objective is measured on a candidate direction.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    /// `α = 0`: constant on cells.
    Step,
    /// `α = 1` on the Euclidean sphere: linear on cells.
    Euclidean,
    /// `α = 1` on the ℓ1 sphere.
    Manhattan,
}

#[derive(Debug, Clone, Copy)]
enum Proposal {
    Point(V3),
    Cell { circle: usize, mid: V3, side: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Keyed {
    key: f64,
    proposal: Proposal,
}

impl PartialEq for Keyed {
    fn eq(&self, other: &Self) -> bool {
        self.key.total_cmp(&other.key) == Ordering::Equal
    }
}

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

struct Sweep<'a> {
    zs: Vec<V3>,
    g: &'a [f64],
    alpha: u32,
    mode: Mode,
    planar: bool,
    heap: Vec<Keyed>,
}

/// Rough number of proposals the walk creates, comparable with the enumeration budget.
pub(crate) fn sweep_work(n: usize, dim: usize) -> f64 {
    let n = n as f64;
    if dim == 2 {
        6.0 * n
    } else {
        14.0 * n * n
    }
}

/// A maximizer of `|Σ g_i (vᵀz_i)₊^α|` over the unit sphere of `problem.p`, or `None`
/// when the instance is outside the supported settings or not in general position.
pub(crate) fn sweep_maximizer(problem: &OracleProblem<'_>) -> Option<Vec<f64>> {
    let dim = problem.dim();
    let mode = match (problem.alpha, problem.p) {
        (0, _) => Mode::Step,
        (1, 2.0) => Mode::Euclidean,
        (1, 1.0) => Mode::Manhattan,
        _ => return None,
    };
    if !(dim == 2 || dim == 3) {
        return None;
    }
    let zs: Vec<V3> = problem
        .zs
        .iter()
        .map(|z| {
            if dim == 2 {
                [z[0], z[1], 0.0]
            } else {
                [z[0], z[1], z[2]]
            }
        })
        .collect();
    if zs.iter().any(|z| norm3(z) == 0.0) {
        return None;
    }
    for i in 0..zs.len() {
        for j in 0..i {
            let c = norm3(&cross(&zs[i], &zs[j]));
            if c <= PARALLEL_TOL * norm3(&zs[i]) * norm3(&zs[j]) {
                return None;
            }
        }
    }
    let mut sweep = Sweep {
        zs,
        g: problem.g,
        alpha: problem.alpha,
        mode,
        planar: dim == 2,
        heap: Vec::new(),
    };
    if mode == Mode::Manhattan {
        return sweep.manhattan(dim);
    }
    if sweep.planar {
        sweep.walk(None, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])?;
    } else {
        for i in 0..sweep.zs.len() {
            let zh = scale(&sweep.zs[i], 1.0 / norm3(&sweep.zs[i]));
            let (e1, e2) = plane_basis(&zh);
            sweep.walk(Some(i), zh, e1, e2)?;
        }
    }
    let v = sweep.select()?;
    Some(if dim == 2 {
        v[..2].to_vec()
    } else {
        v.to_vec()
    })
}

fn plane_basis(zh: &V3) -> (V3, V3) {
    let k = (0..3)
        .min_by(|&a, &b| zh[a].abs().total_cmp(&zh[b].abs()))
        .unwrap_or(0);
    let mut e = [0.0; 3];
    e[k] = 1.0;
    let mut e1 = e;
    axpy3(-dot3(&e, zh), zh, &mut e1);
    let e1 = scale(&e1, 1.0 / norm3(&e1));
    (e1, cross(zh, &e1))
}

impl Sweep<'_> {
    fn value(&self, v: &V3) -> f64 {
        self.zs
            .iter()
            .zip(self.g)
            .map(|(z, g)| g * activation(dot3(v, z), self.alpha))
            .sum()
    }

    fn push(&mut self, key: f64, proposal: Proposal) {
        self.heap.push(Keyed { key, proposal });
    }

    fn push_linear(&mut self, c: &V3) {
        let nc = norm3(c);
        if nc > 0.0 {
            let u = scale(c, 1.0 / nc);
            self.push(nc, Proposal::Point(u));
            self.push(nc, Proposal::Point(scale(&u, -1.0)));
        }
    }

    /// Walks the circle orthogonal to `zh` (spanned by `e1`, `e2`). In the plane case the
    /// circle is the whole unit circle and its arcs are the cells.
    fn walk(&mut self, circle: Option<usize>, zh: V3, e1: V3, e2: V3) -> Option<()> {
        let n = self.zs.len();
        let mut events: Vec<(f64, usize)> = Vec::with_capacity(2 * n);
        for (j, z) in self.zs.iter().enumerate() {
            if Some(j) == circle {
                continue;
            }
            let (a, b) = (dot3(z, &e1), dot3(z, &e2));
            let phi = b.atan2(a);
            for t in [
                phi + std::f64::consts::FRAC_PI_2,
                phi - std::f64::consts::FRAC_PI_2,
            ] {
                events.push((t.rem_euclid(std::f64::consts::TAU), j));
            }
        }
        let two_pi = std::f64::consts::TAU;
        let point = |t: f64| -> V3 {
            let (s, c) = t.sin_cos();
            [
                c * e1[0] + s * e2[0],
                c * e1[1] + s * e2[1],
                c * e1[2] + s * e2[2],
            ]
        };
        if events.is_empty() {
            let mid = point(0.0);
            self.visit_arc(circle, &zh, None, mid, &[0.0; 3], 0.0);
            return Some(());
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let k = events.len();
        let gap = |i: usize| {
            let next = if i + 1 == k {
                events[0].0 + two_pi
            } else {
                events[i + 1].0
            };
            next - events[i].0
        };
        if (0..k).any(|i| gap(i) <= TIE_TOL) {
            return None;
        }
        let start = (0..k)
            .max_by(|&a, &b| gap(a).total_cmp(&gap(b)))
            .unwrap_or(0);
        let mid0 = point(events[start].0 + 0.5 * gap(start));
        let mut inside = vec![false; n];
        let mut c = [0.0; 3];
        let mut mass = 0.0;
        for (j, z) in self.zs.iter().enumerate() {
            if Some(j) != circle && dot3(&mid0, z) > 0.0 {
                inside[j] = true;
                axpy3(self.g[j], z, &mut c);
                mass += self.g[j];
            }
        }
        for step in 0..k {
            let idx = (start + step) % k;
            if step > 0 {
                let j = events[idx].1;
                let s = if inside[j] { -1.0 } else { 1.0 };
                inside[j] = !inside[j];
                axpy3(s * self.g[j], &self.zs[j], &mut c);
                mass += s * self.g[j];
            }
            let t0 = events[idx].0;
            let mid = point(t0 + 0.5 * gap(idx));
            self.visit_arc(circle, &zh, Some(point(t0)), mid, &c, mass);
        }
        Some(())
    }

    /// Records the proposals of one arc, given the positive set of the arc through its
    /// weighted sum `c` and its label mass.
    fn visit_arc(
        &mut self,
        circle: Option<usize>,
        zh: &V3,
        vertex: Option<V3>,
        mid: V3,
        c: &V3,
        mass: f64,
    ) {
        if self.mode == Mode::Euclidean {
            if let Some(u) = vertex {
                self.push(dot3(&u, c).abs(), Proposal::Point(u));
            }
        }
        match circle {
            None => match self.mode {
                Mode::Step => self.push(mass.abs(), Proposal::Point(mid)),
                _ => self.push_linear(c),
            },
            Some(i) => {
                if self.mode == Mode::Euclidean {
                    let mut pc = *c;
                    axpy3(-dot3(c, zh), zh, &mut pc);
                    self.push_linear(&pc);
                }
                for side in [1.0, -1.0] {
                    let (mut cc, mut mm) = (*c, mass);
                    if side > 0.0 {
                        axpy3(self.g[i], &self.zs[i], &mut cc);
                        mm += self.g[i];
                    }
                    match self.mode {
                        Mode::Step => self.push(
                            mm.abs(),
                            Proposal::Cell {
                                circle: i,
                                mid,
                                side,
                            },
                        ),
                        _ => self.push_linear(&cc),
                    }
                }
            }
        }
    }

    /// A point strictly inside the cell beside `mid` on the given side of circle `i`.
    fn cell_point(&self, i: usize, mid: &V3, side: f64) -> V3 {
        let zh = scale(&self.zs[i], 1.0 / norm3(&self.zs[i]));
        let mut eps: f64 = 0.5;
        for (j, z) in self.zs.iter().enumerate() {
            let along = dot3(&zh, z).abs();
            if j != i && along > 0.0 {
                eps = eps.min(0.5 * dot3(mid, z).abs() / along);
            }
        }
        let mut p = *mid;
        axpy3(side * eps, &zh, &mut p);
        scale(&p, 1.0 / norm3(&p))
    }

    fn select(&mut self) -> Option<V3> {
        let mut heap = BinaryHeap::from(std::mem::take(&mut self.heap));
        let mut best: Option<(f64, V3)> = None;
        while let Some(Keyed { key, proposal }) = heap.pop() {
            if let Some((b, _)) = best {
                if key < b - KEY_SLACK * (1.0 + b) {
                    break;
                }
            }
            let v = match proposal {
                Proposal::Point(v) => v,
                Proposal::Cell { circle, mid, side } => self.cell_point(circle, &mid, side),
            };
            let val = self.value(&v).abs();
            if best.is_none_or(|(b, _)| val > b) {
                best = Some((val, v));
            }
        }
        best.map(|(_, v)| v)
    }

    /// `α = 1` on the ℓ1 sphere: the maximum over each closed cell is attained at a vertex
    /// of the cell cut by the ℓ1 ball, which is a coordinate axis, the intersection of one
    /// circle with a coordinate plane, or a vertex of the arrangement.
    fn manhattan(&self, dim: usize) -> Option<Vec<f64>> {
        let axes: Vec<V3> = (0..dim)
            .map(|k| {
                let mut e = [0.0; 3];
                e[k] = 1.0;
                e
            })
            .collect();
        let mut cands: Vec<V3> = axes.clone();
        if dim == 2 {
            cands.extend(self.zs.iter().map(|z| [-z[1], z[0], 0.0]));
        } else {
            for (i, zi) in self.zs.iter().enumerate() {
                cands.extend(axes.iter().map(|e| cross(zi, e)));
                cands.extend(self.zs[..i].iter().map(|zj| cross(zi, zj)));
            }
        }
        let mut best: Option<(f64, V3)> = None;
        for c in cands {
            let l1 = c.iter().map(|x| x.abs()).sum::<f64>();
            if l1 == 0.0 {
                continue;
            }
            let v = scale(&c, 1.0 / l1);
            for w in [v, scale(&v, -1.0)] {
                let val = self.value(&w).abs();
                if best.is_none_or(|(b, _)| val > b) {
                    best = Some((val, w));
                }
            }
        }
        best.map(|(_, v)| v[..dim].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{normalize_p, rng_from_seed, sample_gaussian};
    use crate::oracle::{oracle_exact_candidates, DEFAULT_BUDGET};

    fn enumerated(problem: &OracleProblem<'_>) -> f64 {
        oracle_exact_candidates(problem, DEFAULT_BUDGET)
            .unwrap()
            .iter()
            .map(|c| c.signed_value.abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn matches_enumeration_on_random_instances() {
        let mut rng = rng_from_seed(4);
        for trial in 0..60 {
            let dim = 2 + trial % 2;
            let n = 1 + trial % 9;
            let zs: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let mut z = sample_gaussian(&mut rng, dim - 1);
                    z.push(1.0);
                    z
                })
                .collect();
            let g = sample_gaussian(&mut rng, n);
            for (alpha, p) in [(0, 2.0), (0, 1.0), (1, 2.0), (1, 1.0)] {
                let prob = OracleProblem::new(&zs, &g, alpha, p, 1.0).unwrap();
                let v = sweep_maximizer(&prob).expect("general position");
                let v = normalize_p(&v, p).unwrap();
                let fast = prob.signed_value(&v).abs();
                let slow = enumerated(&prob);
                assert!(
                    (fast - slow).abs() <= 1e-12 * (1.0 + slow),
                    "trial {trial} α={alpha} p={p}: {fast} vs {slow}"
                );
            }
        }
    }

    #[test]
    fn declines_degenerate_instances() {
        let zs = vec![
            vec![1.0, 0.0, 1.0],
            vec![2.0, 0.0, 2.0],
            vec![0.0, 1.0, 1.0],
        ];
        let prob = OracleProblem::new(&zs, &[1.0, -1.0, 0.5], 1, 2.0, 1.0).unwrap();
        assert!(sweep_maximizer(&prob).is_none());
        let prob = OracleProblem::new(&zs, &[1.0, -1.0, 0.5], 2, 2.0, 1.0).unwrap();
        assert!(sweep_maximizer(&prob).is_none());
    }
}
