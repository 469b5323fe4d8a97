//! Levenberg-Marquardt solver over the pose graph.
//!
//! With nodes ordered by `(tick, agent)` the normal equations of this graph
//! family are banded: odometry couples adjacent ticks and the range/LiDAR
//! edges couple the two agents at one tick. The solver factors the damped
//! system with a banded Cholesky, so a full 500-tick, two-agent solve stays
//! cheap enough to re-run every tick.

use std::collections::{BTreeMap, BTreeSet};

use super::{GraphError, NodeId, NormalSink, PoseGraph};
use crate::geometry::Pose2;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Converged when the relative objective decrease of an accepted step
    /// falls below this.
    pub rel_obj_tol: f64,
    /// Converged when the gradient max-norm falls below this.
    pub grad_tol: f64,
    pub init_lambda: f64,
    /// Optional Huber kernel width applied to every edge (ablation hook;
    /// the pipeline default is hard gating instead).
    pub huber_delta: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 50,
            rel_obj_tol: 1e-9,
            grad_tol: 1e-10,
            init_lambda: 1e-4,
            huber_delta: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizeReport {
    pub iterations: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub converged: bool,
}

/// Symmetric banded matrix storing the lower band row-major:
/// `data[i * (bw + 1) + (i - j)]` holds entry `(i, j)` for `i - bw <= j <= i`.
struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    /// Marquardt damping: `H + lambda * diag(H)`, with a unit floor on the
    /// diagonal scale so zero rows still get regularized.
    fn add_marquardt_damping(&mut self, lambda: f64) {
        for i in 0..self.n {
            let d = &mut self.data[i * (self.bw + 1)];
            *d += lambda * d.abs().max(1.0);
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i >= j && i - j <= self.bw);
        self.data[i * (self.bw + 1) + (i - j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert!(i >= j && i - j <= self.bw);
        &mut self.data[i * (self.bw + 1) + (i - j)]
    }

    fn max_diagonal(&self) -> f64 {
        (0..self.n)
            .map(|i| self.data[i * (self.bw + 1)])
            .fold(0.0, f64::max)
    }

    /// In-place banded LL^T factorization. Fails on a non-positive pivot.
    fn cholesky(mut self) -> Option<BandedChol> {
        let tol = 1e-12 * self.max_diagonal().max(1e-300);
        for j in 0..self.n {
            let kmin = j.saturating_sub(self.bw);
            let mut d = self.at(j, j);
            for k in kmin..j {
                let l = self.at(j, k);
                d -= l * l;
            }
            if d <= tol {
                return None;
            }
            let d = d.sqrt();
            *self.at_mut(j, j) = d;
            let imax = (j + self.bw).min(self.n - 1);
            for i in j + 1..=imax {
                let kmin = i.saturating_sub(self.bw);
                let mut s = self.at(i, j);
                for k in kmin..j {
                    s -= self.at(i, k) * self.at(j, k);
                }
                *self.at_mut(i, j) = s / d;
            }
        }
        Some(BandedChol(self))
    }
}

struct BandedChol(BandedSym);

impl BandedChol {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.0;
        let n = m.n;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            let kmin = i.saturating_sub(m.bw);
            let mut s = x[i];
            for k in kmin..i {
                s -= m.at(i, k) * x[k];
            }
            x[i] = s / m.at(i, i);
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let imax = (i + m.bw).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=imax {
                s -= m.at(k, i) * x[k];
            }
            x[i] = s / m.at(i, i);
        }
        x
    }
}

struct BandedSink {
    h: BandedSym,
    g: Vec<f64>,
}

impl NormalSink for BandedSink {
    #[inline]
    fn add_h(&mut self, i: usize, j: usize, v: f64) {
        // Assembly emits both triangles; keep the lower one.
        if i >= j {
            *self.h.at_mut(i, j) += v;
        }
    }
    #[inline]
    fn add_g(&mut self, i: usize, v: f64) {
        self.g[i] += v;
    }
}

impl PoseGraph {
    /// Half-bandwidth of the normal equations under `offsets`.
    fn bandwidth(&self, offsets: &BTreeMap<NodeId, usize>) -> usize {
        let mut bw = 2usize;
        for edge in self.edges() {
            let (a, b) = edge.endpoints();
            let (Some(&oa), Some(&ob)) = (
                offsets.get(&a),
                b.as_ref().map_or(offsets.get(&a), |b| offsets.get(b)),
            ) else {
                continue;
            };
            bw = bw.max(oa.abs_diff(ob) + 2);
        }
        bw
    }

    fn assemble_banded(
        &self,
        offsets: &BTreeMap<NodeId, usize>,
        n: usize,
        huber_delta: Option<f64>,
    ) -> (BandedSym, Vec<f64>) {
        let bw = self.bandwidth(offsets).min(n.saturating_sub(1));
        let mut sink = BandedSink {
            h: BandedSym::zeros(n, bw),
            g: vec![0.0; n],
        };
        self.assemble(offsets, huber_delta, &mut sink);
        (sink.h, sink.g)
    }

    /// Levenberg-Marquardt over all non-fixed nodes.
    pub fn optimize(&mut self, opts: &SolverOptions) -> Result<OptimizeReport, GraphError> {
        self.optimize_subset(None, opts)
    }

    /// Levenberg-Marquardt over the trailing window of ticks; nodes at
    /// `t <= max_tick - window` are held at their current estimates. `None`
    /// optimizes everything (up to the permanent anchors).
    pub fn optimize_window(
        &mut self,
        window: Option<usize>,
        opts: &SolverOptions,
    ) -> Result<OptimizeReport, GraphError> {
        let extra = match (window, self.max_tick()) {
            (Some(w), Some(t_max)) => {
                let cutoff = t_max.saturating_sub(w);
                let frozen: BTreeSet<NodeId> = self
                    .nodes()
                    .map(|(id, _)| id)
                    .filter(|id| id.t < cutoff)
                    .collect();
                Some(frozen)
            }
            _ => None,
        };
        self.optimize_subset(extra.as_ref(), opts)
    }

    /// Appends nodes and edges, then re-optimizes over the window.
    pub fn incremental_update(
        &mut self,
        new_nodes: &[(NodeId, Pose2)],
        new_edges: Vec<super::Edge>,
        window: Option<usize>,
        opts: &SolverOptions,
    ) -> Result<OptimizeReport, GraphError> {
        for (id, pose) in new_nodes {
            self.add_node(*id, *pose)?;
        }
        for edge in new_edges {
            self.add_edge(edge)?;
        }
        self.optimize_window(window, opts)
    }

    fn optimize_subset(
        &mut self,
        extra_fixed: Option<&BTreeSet<NodeId>>,
        opts: &SolverOptions,
    ) -> Result<OptimizeReport, GraphError> {
        if self.fixed.is_empty() {
            return Err(GraphError::NoFixedNode);
        }
        let free = self.free_index(extra_fixed);
        let offsets: BTreeMap<NodeId, usize> =
            free.iter().enumerate().map(|(i, id)| (*id, 3 * i)).collect();
        let n = 3 * free.len();

        let initial_objective = self.objective_with_kernel(opts.huber_delta);
        let mut report = OptimizeReport {
            iterations: 0,
            initial_objective,
            final_objective: initial_objective,
            converged: false,
        };
        if n == 0 {
            report.converged = true;
            return Ok(report);
        }

        let mut lambda = opts.init_lambda;
        let mut objective = initial_objective;

        for iter in 0..opts.max_iters {
            let (h, g) = self.assemble_banded(&offsets, n, opts.huber_delta);

            if iter == 0 {
                // The undamped system must be positive definite once the
                // gauge is fixed; otherwise the graph is unobservable.
                let probe = BandedSym {
                    n: h.n,
                    bw: h.bw,
                    data: h.data.clone(),
                };
                if probe.cholesky().is_none() {
                    return Err(GraphError::DegenerateGraph);
                }
            }

            let max_grad = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max_grad < opts.grad_tol {
                report.converged = true;
                break;
            }

            // Damping loop: retry with stronger lambda until a step is
            // accepted or damping saturates.
            let mut accepted = false;
            loop {
                let mut damped = BandedSym {
                    n: h.n,
                    bw: h.bw,
                    data: h.data.clone(),
                };
                damped.add_marquardt_damping(lambda);
                let step = match damped.cholesky() {
                    Some(chol) => {
                        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
                        chol.solve(&neg_g)
                    }
                    None => {
                        lambda *= 10.0;
                        if lambda > 1e12 {
                            break;
                        }
                        continue;
                    }
                };

                let snapshot: Vec<Pose2> = free.iter().map(|id| self.nodes[id]).collect();
                for (i, id) in free.iter().enumerate() {
                    let p = self.nodes[id];
                    let q = Pose2::new(p.x + step[3 * i], p.y + step[3 * i + 1], p.theta + step[3 * i + 2]);
                    self.nodes.insert(*id, q);
                }
                let trial = self.objective_with_kernel(opts.huber_delta);

                if trial.is_finite() && trial <= objective {
                    let rel = (objective - trial) / objective.max(f64::MIN_POSITIVE);
                    objective = trial;
                    lambda = (lambda / 10.0).max(1e-9);
                    accepted = true;
                    if rel < opts.rel_obj_tol {
                        report.converged = true;
                    }
                    break;
                }

                // reject: restore and increase damping
                for (id, p) in free.iter().zip(snapshot) {
                    self.nodes.insert(*id, p);
                }
                lambda *= 10.0;
                if lambda > 1e12 {
                    break;
                }
            }

            report.iterations = iter + 1;
            if !accepted {
                // Damping saturated without an acceptable step: stalled.
                break;
            }
            if report.converged {
                break;
            }
        }

        report.final_objective = objective;
        Ok(report)
    }
}
