//! Dynamic-programming search over piecewise-linear warps with vertices on a
//! uniform lattice.
//!
//! The parameter interval is cut into `M` cells. A warp is a lattice path from
//! `(0, 0)` to `(M, M)` whose steps `(Δk, Δl)` are taken from a mask; on each
//! step the warp is linear. The matching energy is additive over steps, so
//! the optimum follows from the recursion `H(i,j) = min E(k,l;i,j) + H(k,l)`.
//!
//! Segment integrals use a quadrature grid that refines each lattice cell into
//! `r` sub-cells, with both SRV functions interpolated by cubic splines.

use crate::curve::{srvt, DiscreteCurve, PARAM_LENGTH};
use crate::error::{Error, Result};
use crate::features::{FeaturePair, FeatureSpec};
use crate::interp::{Interpolant, Interpolation};
use crate::warp::Warp;

pub const DEFAULT_M: usize = 128;
pub const DEFAULT_WINDOW: usize = 6;

/// Lattice resolution and admissible step offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct DpGrid {
    m: usize,
    /// Sorted by `Δk + Δl`, then `Δk`; the first minimizer wins ties.
    offsets: Vec<(usize, usize)>,
}

impl Default for DpGrid {
    fn default() -> Self {
        Self::new(DEFAULT_M, DEFAULT_WINDOW).expect("default grid is valid")
    }
}

impl DpGrid {
    /// All steps with `1 ≤ Δk, Δl ≤ window` (window clipped to `m`).
    pub fn new(m: usize, window: usize) -> Result<Self> {
        let w = window.min(m);
        let offsets = (1..=w)
            .flat_map(|dk| (1..=w).map(move |dl| (dk, dl)))
            .collect();
        Self::with_mask(m, offsets)
    }

    pub fn with_mask(m: usize, mut offsets: Vec<(usize, usize)>) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput("DP grid needs M ≥ 2".into()));
        }
        if offsets.is_empty() || offsets.iter().any(|&(a, b)| a == 0 || b == 0) {
            return Err(Error::InvalidInput(
                "mask must be non-empty with positive offsets".into(),
            ));
        }
        offsets.sort_by_key(|&(a, b)| (a + b, a, b));
        offsets.dedup();
        Ok(Self { m, offsets })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn window(&self) -> usize {
        self.offsets
            .iter()
            .map(|&(a, b)| a.max(b))
            .max()
            .unwrap_or(0)
    }

    pub fn offsets(&self) -> &[(usize, usize)] {
        &self.offsets
    }

    pub fn step(&self) -> f64 {
        PARAM_LENGTH / self.m as f64
    }

    pub fn node(&self, r: usize) -> f64 {
        if r == self.m {
            PARAM_LENGTH
        } else {
            r as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.m).map(|r| self.node(r)).collect()
    }

    /// Admissible predecessors of lattice node `(i, j)`, in tie-break order.
    pub fn masked_predecessors(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        self.offsets
            .iter()
            .filter(|&&(dk, dl)| dk <= i && dl <= j)
            .map(|&(dk, dl)| (i - dk, j - dl))
            .collect()
    }
}

/// Outcome of [`dp_match`].
#[derive(Debug, Clone)]
pub struct DpResult {
    pub warp: Warp,
    /// `H(M, M)`: elastic plus weighted feature energy of the optimal path.
    pub energy: f64,
    /// Lattice vertices of the optimal path.
    pub path: Vec<(usize, usize)>,
}

/// One side of the matching problem, sampled for segment integrals.
struct Side {
    /// SRV values on the refined quadrature grid (`M r + 1` nodes).
    q_nodes: Vec<f64>,
    q: Interpolant,
    c: Interpolant,
}

/// Precomputed data for segment energies between two curves.
pub struct DpProblem<'a> {
    grid: &'a DpGrid,
    features: &'a FeatureSpec,
    dim: usize,
    refine: usize,
    h: f64,
    src: Side,
    dst: Side,
    /// `(lattice cell, pair)` for every pair, binned by `θ0`, in pair order.
    fwd: Vec<(usize, &'a FeaturePair)>,
    /// The same, binned by `θ1`.
    bwd: Vec<(usize, &'a FeaturePair)>,
}

fn cell_of(theta: f64, grid: &DpGrid) -> usize {
    // θ ∈ (τ_c, τ_{c+1}] lies in cell c; θ = 0 joins the first cell
    let u = theta / grid.step();
    (u.ceil() as usize).clamp(1, grid.m) - 1
}

impl<'a> DpProblem<'a> {
    pub fn new(
        c0: &DiscreteCurve,
        c1: &DiscreteCurve,
        grid: &'a DpGrid,
        features: &'a FeatureSpec,
    ) -> Result<Self> {
        if c0.dim() != c1.dim() || c0.len() != c1.len() || c0.topology() != c1.topology() {
            return Err(Error::InvalidInput(
                "curves must share dimension, grid and topology".into(),
            ));
        }
        features.validate()?;
        let n = c0.len();
        let refine = n.div_ceil(grid.m).max(1);
        let fine = grid.m * refine;
        let h = PARAM_LENGTH / fine as f64;
        let side = |c: &DiscreteCurve| -> Result<Side> {
            let q = srvt(c)?.interpolant(Interpolation::Cubic);
            let mut q_nodes = vec![0.0; (fine + 1) * c.dim()];
            for u in 0..=fine {
                let t = if u == fine { PARAM_LENGTH } else { u as f64 * h };
                q.eval_into(t, &mut q_nodes[u * c.dim()..(u + 1) * c.dim()]);
            }
            Ok(Side {
                q_nodes,
                q,
                c: c.interpolant(Interpolation::Cubic),
            })
        };
        let mut fwd: Vec<_> = features
            .pairs
            .iter()
            .map(|p| (cell_of(p.theta0, grid), p))
            .collect();
        fwd.sort_by_key(|e| e.0);
        let mut bwd: Vec<_> = features
            .pairs
            .iter()
            .map(|p| (cell_of(p.theta1, grid), p))
            .collect();
        bwd.sort_by_key(|e| e.0);
        Ok(Self {
            grid,
            features,
            dim: c0.dim(),
            refine,
            h,
            src: side(c0)?,
            dst: side(c1)?,
            fwd,
            bwd,
        })
    }

    /// `E(k,l;i,j)` for lattice indices `k < i`, `l < j`.
    pub fn segment_energy(&self, k: usize, l: usize, i: usize, j: usize) -> f64 {
        let lambda = self.features.lambda;
        if self.features.symmetric {
            let elastic = 0.5
                * (self.elastic(&self.src, &self.dst, k, i, l, j)
                    + self.elastic(&self.dst, &self.src, l, j, k, i));
            let feat = self.feature_sum(&self.fwd, &self.dst, k, i, l, j, true)
                + self.feature_sum(&self.bwd, &self.src, l, j, k, i, false);
            if lambda == 0.0 {
                return elastic;
            }
            elastic + lambda * feat
        } else {
            let elastic = self.elastic(&self.src, &self.dst, k, i, l, j);
            if lambda == 0.0 || self.fwd.is_empty() {
                return elastic;
            }
            elastic + lambda * self.feature_sum(&self.fwd, &self.dst, k, i, l, j, true)
        }
    }

    /// Linear map of `[τ_a0, τ_a1]` onto `[τ_b0, τ_b1]`.
    fn lin(&self, a0: usize, a1: usize, b0: usize, b1: usize, x: f64) -> f64 {
        let slope = (b1 - b0) as f64 / (a1 - a0) as f64;
        self.grid.node(b0) + (x - self.grid.node(a0)) * slope
    }

    /// `∫_{τ_a0}^{τ_a1} |q_a - sqrt(s) q_b ∘ φ_lin|²` on the refined grid.
    fn elastic(&self, a: &Side, b: &Side, a0: usize, a1: usize, b0: usize, b1: usize) -> f64 {
        let dim = self.dim;
        let root = ((b1 - b0) as f64 / (a1 - a0) as f64).sqrt();
        let (u0, u1) = (a0 * self.refine, a1 * self.refine);
        let mut buf = [0.0; 8];
        let mut heap;
        let qb: &mut [f64] = if dim <= buf.len() {
            &mut buf[..dim]
        } else {
            heap = vec![0.0; dim];
            &mut heap
        };
        let mut sum = 0.0;
        for u in u0..=u1 {
            let t = if u == self.grid.m * self.refine {
                PARAM_LENGTH
            } else {
                u as f64 * self.h
            };
            b.q.eval_into(self.lin(a0, a1, b0, b1, t), qb);
            let qa = &a.q_nodes[u * dim..(u + 1) * dim];
            let mut d2 = 0.0;
            for (x, y) in qa.iter().zip(qb.iter()) {
                let d = x - root * y;
                d2 += d * d;
            }
            let w = if u == u0 || u == u1 { 0.5 } else { 1.0 };
            sum += w * d2;
        }
        sum * self.h
    }

    /// Feature terms binned to `(τ_a0, τ_a1]` on the source side of `bins`.
    #[allow(clippy::too_many_arguments)]
    fn feature_sum(
        &self,
        bins: &[(usize, &FeaturePair)],
        target: &Side,
        a0: usize,
        a1: usize,
        b0: usize,
        b1: usize,
        forward: bool,
    ) -> f64 {
        let start = bins.partition_point(|e| e.0 < a0);
        let mut sum = 0.0;
        for (cell, pair) in &bins[start..] {
            if *cell >= a1 {
                break;
            }
            let p = if forward { (*pair).clone() } else { pair.mirrored() };
            let matched = self.lin(a0, a1, b0, b1, p.theta0);
            sum += p.term(matched, |t| target.c.eval(t));
        }
        sum
    }
}

/// Optimal lattice warp and its energy.
pub fn dp_match(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    grid: &DpGrid,
    features: &FeatureSpec,
) -> Result<DpResult> {
    let problem = DpProblem::new(c0, c1, grid, features)?;
    solve(&problem)
}

/// `(energy, predecessor)` table fill and backtracking.
pub fn solve(problem: &DpProblem<'_>) -> Result<DpResult> {
    let grid = problem.grid;
    let m = grid.m;
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    let mut energy = vec![f64::INFINITY; (m + 1) * (m + 1)];
    let mut reachable = vec![false; (m + 1) * (m + 1)];
    let mut pred = vec![usize::MAX; (m + 1) * (m + 1)];
    energy[0] = 0.0;
    reachable[0] = true;
    for i in 1..=m {
        for j in 1..=m {
            let mut best = f64::INFINITY;
            let mut arg = usize::MAX;
            for &(dk, dl) in &grid.offsets {
                if dk > i || dl > j {
                    continue;
                }
                let (k, l) = (i - dk, j - dl);
                let from = idx(k, l);
                if !reachable[from] {
                    continue;
                }
                if arg == usize::MAX {
                    arg = from;
                }
                if energy[from] == f64::INFINITY {
                    continue;
                }
                let e = problem.segment_energy(k, l, i, j) + energy[from];
                if e < best {
                    best = e;
                    arg = from;
                }
            }
            if arg != usize::MAX {
                reachable[idx(i, j)] = true;
                energy[idx(i, j)] = best;
                pred[idx(i, j)] = arg;
            }
        }
    }
    let end = idx(m, m);
    if !reachable[end] {
        return Err(Error::InfeasibleMask);
    }
    if energy[end] == f64::INFINITY {
        return Err(Error::InfeasibleHardBounds);
    }
    let mut path = vec![(m, m)];
    let mut cur = end;
    while cur != 0 {
        cur = pred[cur];
        path.push((cur / (m + 1), cur % (m + 1)));
    }
    path.reverse();
    let xs = path.iter().map(|&(i, _)| grid.node(i)).collect();
    let ys = path.iter().map(|&(_, j)| grid.node(j)).collect();
    Ok(DpResult {
        warp: Warp::from_vertices(xs, ys)?,
        energy: energy[end],
        path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Topology;
    use std::f64::consts::TAU;

    /// Minimum over every masked lattice path, accumulated like the table.
    fn brute_force(p: &DpProblem<'_>, grid: &DpGrid) -> f64 {
        fn walk(p: &DpProblem<'_>, grid: &DpGrid, k: usize, l: usize, acc: f64, best: &mut f64) {
            let m = grid.m();
            if (k, l) == (m, m) {
                *best = best.min(acc);
                return;
            }
            for &(dk, dl) in grid.offsets() {
                if k + dk <= m && l + dl <= m {
                    let e = p.segment_energy(k, l, k + dk, l + dl) + acc;
                    walk(p, grid, k + dk, l + dl, e, best);
                }
            }
        }
        let mut best = f64::INFINITY;
        walk(p, grid, 0, 0, 0.0, &mut best);
        best
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        let c0 = wave(60, 0.6, 1.3);
        let c1 = wave(60, 0.9, 2.1);
        for m in 2..=6 {
            let grid = DpGrid::new(m, m).unwrap();
            let f = FeatureSpec::quadratic(&[(1.1, 2.3), (4.0, 3.5)], 0.7);
            let p = DpProblem::new(&c0, &c1, &grid, &f).unwrap();
            assert_eq!(solve(&p).unwrap().energy, brute_force(&p, &grid));
        }
    }

    fn wave(n: usize, a: f64, f: f64) -> DiscreteCurve {
        DiscreteCurve::from_fn(n, Topology::Open, |t| vec![t, a * (f * t).sin()]).unwrap()
    }

    #[test]
    fn predecessor_counts() {
        let full = DpGrid::new(8, 8).unwrap();
        assert_eq!(full.masked_predecessors(1, 1), vec![(0, 0)]);
        let g = DpGrid::new(16, 3).unwrap();
        assert_eq!(g.masked_predecessors(8, 8).len(), 9);
        assert_eq!(g.masked_predecessors(2, 1).len(), 2);
        assert_eq!(g.window(), 3);
    }

    #[test]
    fn tie_break_order() {
        let g = DpGrid::new(10, 3).unwrap();
        assert_eq!(&g.offsets()[..3], &[(1, 1), (1, 2), (2, 1)]);
    }

    #[test]
    fn identical_curves_give_identity() {
        let c = wave(129, 0.8, 2.0);
        let grid = DpGrid::new(32, 4).unwrap();
        let r = dp_match(&c, &c, &grid, &FeatureSpec::none().with_lambda(0.0)).unwrap();
        assert!(r.warp.is_identity(1e-12));
        assert!(r.energy < 1e-12);
    }

    #[test]
    fn identical_segment_has_zero_energy() {
        let c = wave(65, 0.5, 1.0);
        let grid = DpGrid::new(16, 4).unwrap();
        let f = FeatureSpec::none().with_lambda(0.0);
        let p = DpProblem::new(&c, &c, &grid, &f).unwrap();
        assert!(p.segment_energy(3, 3, 4, 4) < 1e-20);
    }

    #[test]
    fn feature_at_its_target_costs_nothing() {
        let c = wave(65, 0.5, 1.0);
        let grid = DpGrid::new(16, 4).unwrap();
        let f = FeatureSpec::quadratic(&[(2.0, 2.0)], 5.0);
        let p = DpProblem::new(&c, &c, &grid, &f).unwrap();
        let (k, i) = (4, 6);
        assert!(grid.node(k) < 2.0 && 2.0 <= grid.node(i));
        assert!(p.segment_energy(k, k, i, i) < 1e-20);
    }

    #[test]
    fn hard_bound_violation_is_infinite() {
        let c = wave(65, 0.5, 1.0);
        let grid = DpGrid::new(16, 4).unwrap();
        let mut f = FeatureSpec::none();
        f.pairs.push(FeaturePair::hard(2.0, 4.0, 0.1));
        let p = DpProblem::new(&c, &c, &grid, &f).unwrap();
        assert_eq!(p.segment_energy(4, 4, 6, 6), f64::INFINITY);
        // identity is now forbidden, yet a feasible warp exists
        let r = solve(&p).unwrap();
        assert!((r.warp.eval(2.0) - 4.0).abs() < grid.step() + 0.2);
    }

    #[test]
    fn exact_hard_bounds_can_be_infeasible() {
        let c = wave(65, 0.5, 1.0);
        let grid = DpGrid::new(8, 3).unwrap();
        let mut f = FeatureSpec::none();
        // target not reachable by any lattice warp
        f.pairs.push(FeaturePair::hard(1.0, 1.234, 0.0));
        assert!(matches!(
            dp_match(&c, &c, &grid, &f),
            Err(Error::InfeasibleHardBounds)
        ));
    }

    #[test]
    fn unreachable_corner_is_infeasible_mask() {
        let c = wave(65, 0.5, 1.0);
        let grid = DpGrid::with_mask(4, vec![(2, 1)]).unwrap();
        assert!(matches!(
            dp_match(&c, &c, &grid, &FeatureSpec::none()),
            Err(Error::InfeasibleMask)
        ));
    }

    #[test]
    fn recovers_lattice_warp() {
        let m = 16;
        let grid = DpGrid::new(m, 6).unwrap();
        let truth = Warp::from_vertices(
            grid.nodes().iter().step_by(4).copied().collect(),
            vec![0.0, 2.0 * grid.step(), 5.0 * grid.step(), 10.0 * grid.step(), TAU],
        )
        .unwrap();
        let c0 = wave(513, 0.7, 1.5);
        let inv = truth.inverse().unwrap();
        // c1 = c0 ∘ φ⁻¹, so c1 ∘ φ = c0
        let c1 = crate::curve::apply_warp(&c0, &inv).unwrap();
        let r = dp_match(&c0, &c1, &grid, &FeatureSpec::none().with_lambda(0.0)).unwrap();
        // kinks of c1 limit the quadrature to first order
        assert!(r.energy < 1e-3, "energy {}", r.energy);
        assert!(r.warp.max_diff(&truth, 257) < 1e-12);
    }
}
