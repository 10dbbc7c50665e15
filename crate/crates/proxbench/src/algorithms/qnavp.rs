//! Limited-memory quasi-Newton acceleration of averaged projections.
//!
//! Minimizes the averaged squared-distance objective with an L-BFGS
//! model inside a trust region. The quasi-Newton direction is obtained
//! from the standard two-loop recursion; when it exceeds the radius the
//! step is truncated to the boundary rather than solved by a dogleg,
//! which keeps the predicted-decrease algebra exact for the memory-based
//! inverse Hessian. If the region collapses without an acceptable step
//! the iteration falls back to a backtracking gradient step.

use super::{avp_step, Problem};
use crate::error::Result;
use crate::signal::Signal;
use std::collections::VecDeque;

/// Secant pair `(s, y, 1/(sᵀy))` retained in the L-BFGS memory.
#[derive(Debug, Clone)]
struct Pair {
    s: Signal,
    y: Signal,
    rho: f64,
}

/// Limited-memory state of the quasi-Newton averaged-projections
/// iteration.
#[derive(Debug, Clone)]
pub struct QnState {
    pairs: VecDeque<Pair>,
    /// Memory depth: maximum number of secant pairs kept.
    memory: usize,
    /// Curvature guard: pairs with `sᵀy ≤ floor·‖s‖·‖y‖` are discarded.
    curvature_floor: f64,
    /// Acceptance threshold on actual/predicted decrease.
    ratio_threshold: f64,
    radius: f64,
    prev: Option<(Signal, Signal)>,
    /// Count of steps that fell back to the gradient safeguard.
    pub fallback_steps: usize,
}

const MAX_SHRINKS: usize = 40;
const ARMIJO_SLOPE: f64 = 1e-4;
const ARMIJO_FACTOR: f64 = 0.5;

impl QnState {
    pub fn new(memory: usize, curvature_floor: f64, ratio_threshold: f64) -> Self {
        QnState {
            pairs: VecDeque::new(),
            memory,
            curvature_floor,
            ratio_threshold,
            radius: 1.0,
            prev: None,
            fallback_steps: 0,
        }
    }

    /// Number of secant pairs currently stored.
    pub fn stored_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Records a secant pair, enforcing the curvature guard and the
    /// memory bound. Returns whether the pair was kept.
    pub fn push_pair(&mut self, s: Signal, y: Signal) -> bool {
        let sy = s.dot(&y);
        if sy <= self.curvature_floor * s.norm() * y.norm() {
            return false;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back(Pair { s, y, rho: 1.0 / sy });
        true
    }

    /// Two-loop recursion: returns `H g` for the implicit inverse
    /// Hessian `H`, with the usual `γ = sᵀy/yᵀy` initial scaling.
    fn apply_inverse_hessian(&self, g: &Signal) -> Signal {
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for p in self.pairs.iter().rev() {
            let alpha = p.rho * p.s.dot(&q);
            q.axpy(-alpha, &p.y);
            alphas.push(alpha);
        }
        if let Some(last) = self.pairs.back() {
            let gamma = 1.0 / (last.rho * last.y.norm_sq());
            q = q.scale(gamma);
        }
        for (p, alpha) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let beta = p.rho * p.y.dot(&q);
            q.axpy(alpha - beta, &p.s);
        }
        q
    }

    /// One quasi-Newton iteration from `z`. The gradient of the
    /// averaged squared-distance objective is `z − T(z)` where `T` is
    /// the averaged-projections map.
    pub fn step(&mut self, p: &Problem, z: &Signal) -> Result<Signal> {
        let t = avp_step(p, z)?;
        let g = z.sub(&t);
        let f = p.sq_dist_objective(z)?;
        if let Some((z_prev, g_prev)) = self.prev.take() {
            self.push_pair(z.sub(&z_prev), g.sub(&g_prev));
        }
        let z_next = self.trust_region_step(p, z, &g, f)?;
        self.prev = Some((z.clone(), g));
        Ok(z_next)
    }

    fn trust_region_step(&mut self, p: &Problem, z: &Signal, g: &Signal, f: f64) -> Result<Signal> {
        let g_norm = g.norm();
        if g_norm == 0.0 {
            return Ok(z.clone());
        }
        if self.radius < 1e-3 * g_norm.max(1e-12) {
            self.radius = g_norm;
        }
        let p_newton = self.apply_inverse_hessian(g).scale(-1.0);
        let p_norm = p_newton.norm();
        // gᵀ H g > 0 is guaranteed by the curvature guard; it equals the
        // model decrease of the full step up to the quadratic term.
        let ghg = -g.dot(&p_newton);
        if !(ghg > 0.0) || p_norm == 0.0 {
            return self.gradient_fallback(p, z, g, f);
        }
        for _ in 0..MAX_SHRINKS {
            let t = (self.radius / p_norm).min(1.0);
            let step = p_newton.scale(t);
            // For s = t·p_N with B p_N = −g the quadratic model gives a
            // predicted decrease of (t − t²/2)·gᵀHg exactly.
            let predicted = (t - 0.5 * t * t) * ghg;
            let candidate = z.add(&step);
            let f_new = p.sq_dist_objective(&candidate)?;
            let actual = f - f_new;
            let ratio = actual / predicted;
            if ratio >= self.ratio_threshold && f_new.is_finite() {
                if ratio > 0.75 && t >= 1.0 - 1e-12 {
                    self.radius *= 2.0;
                } else if ratio < 0.25 {
                    self.radius *= 0.5;
                }
                return Ok(candidate);
            }
            self.radius *= 0.5;
        }
        self.gradient_fallback(p, z, g, f)
    }

    /// Backtracking gradient descent safeguard with the standard
    /// sufficient-decrease condition.
    fn gradient_fallback(&mut self, p: &Problem, z: &Signal, g: &Signal, f: f64) -> Result<Signal> {
        self.fallback_steps += 1;
        let g_sq = g.norm_sq();
        let mut t = 1.0;
        for _ in 0..60 {
            let mut candidate = z.clone();
            candidate.axpy(-t, g);
            let f_new = p.sq_dist_objective(&candidate)?;
            if f_new <= f - ARMIJO_SLOPE * t * g_sq {
                self.radius = (t * g_sq.sqrt()).max(1e-12);
                return Ok(candidate);
            }
            t *= ARMIJO_FACTOR;
        }
        // gradient step is always the averaged-projections map itself at
        // unit length; fall back to it outright
        self.radius = 1e-12_f64.max(self.radius * 0.5);
        let mut candidate = z.clone();
        candidate.axpy(-1.0, g);
        Ok(candidate)
    }
}
