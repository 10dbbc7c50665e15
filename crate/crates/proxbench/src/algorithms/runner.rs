//! Common fixed-point driver: runs any algorithm until the iterate
//! change drops below tolerance, the iteration budget is exhausted, or
//! the iterates stop being finite.

use super::steps::{
    admm1_step, admm2_step, avp_step, cdr_step, cdrl_step, cp_step, dr_step, drap_step,
    drl_product_step, dyrepr_step, fpg_step, wf_step, wf_warm_start, Admm1State, Admm2State,
    FpgState,
};
use super::{AlgorithmKind, AlgorithmSpec, Problem, QnState};
use crate::error::Result;
use crate::sets::project_component;
use crate::signal::{phase_aligned_distance, Iterate, ProductSignal, Signal};
use serde::{Deserialize, Serialize};

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Iterate change fell below tolerance.
    Converged,
    /// Iteration budget exhausted.
    MaxIterations,
    /// An iterate left the space of finite signals.
    Diverged,
}

/// Driver controls shared by all algorithms.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Stop once the iterate change is at most this.
    pub tol: f64,
    /// Iteration budget.
    pub max_iter: usize,
    /// Record the per-iteration change and feasibility gap.
    pub trace: bool,
    /// Measure base-space change modulo a global phase rotation
    /// (complex signals only).
    pub phase_rotation: bool,
    /// Seed of the spectral warm start of Wirtinger Flow.
    pub warm_start_seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            tol: 5e-5,
            max_iter: 6000,
            trace: false,
            phase_rotation: false,
            warm_start_seed: 0,
        }
    }
}

/// One recorded point of a convergence trace.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub change: f64,
    pub gap: f64,
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub termination: Termination,
    /// Steps actually taken.
    pub iterations: usize,
    /// Best available reconstruction in the base space.
    pub candidate: Signal,
    /// Iterate change at the last step (infinite if no step was taken).
    pub final_change: f64,
    /// Feasibility gap of the candidate.
    pub final_gap: f64,
    pub trace: Option<Vec<TracePoint>>,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

enum State {
    /// Memoryless base-space step maps (CP, CDR, CDRλ, AvP, DyRePr,
    /// two-set DR).
    Plain(Signal),
    Wf { z: Signal, z0_norm_sq: f64 },
    Qn { z: Signal, qn: QnState },
    Admm1(Admm1State),
    Admm2(Admm2State, Vec<f64>),
    /// Product-space step maps (DRλ, DRAP, many-set DR).
    Product(ProductSignal),
    Fpg(FpgState),
}

impl State {
    fn init(p: &Problem, spec: &AlgorithmSpec, z0: &Signal, opts: &RunOptions) -> Result<Self> {
        Ok(match spec.kind {
            AlgorithmKind::CP
            | AlgorithmKind::CDR
            | AlgorithmKind::CDRL
            | AlgorithmKind::AVP
            | AlgorithmKind::DYREPR => State::Plain(z0.clone()),
            AlgorithmKind::DR => {
                if p.sets().len() == 2 {
                    State::Plain(z0.clone())
                } else {
                    State::Product(p.lift(z0))
                }
            }
            AlgorithmKind::WF => {
                let z = if spec.warm_start_iters > 0 {
                    wf_warm_start(p, spec.warm_start_iters, opts.warm_start_seed)?
                } else {
                    z0.clone()
                };
                let z0_norm_sq = z.norm_sq();
                State::Wf { z, z0_norm_sq }
            }
            AlgorithmKind::QNAVP => State::Qn {
                z: z0.clone(),
                qn: QnState::new(spec.memory, spec.curvature_floor, spec.ratio_threshold),
            },
            AlgorithmKind::ADMM1 => State::Admm1(Admm1State::init(p, z0)),
            AlgorithmKind::ADMM2 => {
                let rho = vec![spec.rho; p.data_sets().len()];
                State::Admm2(Admm2State::init(p, z0)?, rho)
            }
            AlgorithmKind::DRL | AlgorithmKind::DRAP => State::Product(p.lift(z0)),
            AlgorithmKind::FPG => State::Fpg(FpgState::init(p, z0)),
        })
    }

    /// Advances the state and returns the change of the driving
    /// iterate.
    fn advance(&mut self, p: &Problem, spec: &AlgorithmSpec, phase_rotation: bool) -> Result<f64> {
        fn base_change(old: &Signal, new: &Signal, phase_rotation: bool) -> Result<f64> {
            if phase_rotation && old.d() == 2 {
                phase_aligned_distance(new, old)
            } else {
                Ok(new.diff_norm(old))
            }
        }
        match self {
            State::Plain(z) => {
                let next = match spec.kind {
                    AlgorithmKind::CP => cp_step(p, z)?,
                    AlgorithmKind::CDR => cdr_step(p, z)?,
                    AlgorithmKind::CDRL => {
                        cdrl_step(p, spec.lambda, spec.cdrl_inner_relax, z)?
                    }
                    AlgorithmKind::AVP => avp_step(p, z)?,
                    AlgorithmKind::DYREPR => dyrepr_step(p, spec.c, z)?,
                    AlgorithmKind::DR => dr_step(&p.sets()[0], &p.sets()[1], z)?,
                    _ => unreachable!("state/kind mismatch"),
                };
                let change = base_change(z, &next, phase_rotation)?;
                *z = next;
                Ok(change)
            }
            State::Wf { z, z0_norm_sq } => {
                let next = wf_step(p, spec.mu, *z0_norm_sq, z)?;
                let change = base_change(z, &next, phase_rotation)?;
                *z = next;
                Ok(change)
            }
            State::Qn { z, qn } => {
                let next = qn.step(p, z)?;
                let change = base_change(z, &next, phase_rotation)?;
                *z = next;
                Ok(change)
            }
            State::Admm1(state) => {
                let prev = state.x.clone();
                admm1_step(p, spec.eta, spec.admm1_scaled_dual, state)?;
                base_change(&prev, &state.x, phase_rotation)
            }
            State::Admm2(state, rho) => {
                let prev = state.z.clone();
                admm2_step(p, rho, state)?;
                base_change(&prev, &state.z, phase_rotation)
            }
            State::Product(z) => {
                let next = match spec.kind {
                    AlgorithmKind::DRL => drl_product_step(p, spec.lambda, z)?,
                    AlgorithmKind::DRAP => drap_step(p, spec.lambda, z)?,
                    AlgorithmKind::DR => drl_product_step(p, 1.0, z)?,
                    _ => unreachable!("state/kind mismatch"),
                };
                let change = next.diff_norm(z);
                *z = next;
                Ok(change)
            }
            State::Fpg(state) => {
                let prev = state.z_prev.clone();
                fpg_step(p, state)?;
                Ok(state.z_prev.diff_norm(&prev))
            }
        }
    }

    fn finite(&self) -> bool {
        match self {
            State::Plain(z) | State::Wf { z, .. } | State::Qn { z, .. } => z.finite(),
            State::Admm1(s) => s.x.finite(),
            State::Admm2(s, _) => s.z.finite(),
            State::Product(z) => z.finite(),
            State::Fpg(s) => s.z_prev.finite(),
        }
    }

    /// Maps the driving iterate to a base-space reconstruction.
    fn candidate(&self, p: &Problem) -> Result<Signal> {
        match self {
            State::Plain(z) | State::Wf { z, .. } | State::Qn { z, .. } => Ok(z.clone()),
            State::Admm1(s) => Ok(s.x.clone()),
            State::Admm2(s, _) => Ok(s.z.clone()),
            State::Product(z) => Ok(project_component(p.sets(), z)?.block_average()),
            State::Fpg(s) => Ok(s.z_prev.block_average()),
        }
    }
}

/// Runs `spec` on `p` from `z0`.
pub fn run(p: &Problem, spec: &AlgorithmSpec, z0: &Signal, opts: &RunOptions) -> Result<RunOutcome> {
    spec.validate()?;
    if z0.d() != p.d() || z0.shape() != p.shape() {
        return Err(crate::error::Error::shape_mismatch(
            format!("d={} shape={}", p.d(), p.shape()),
            format!("d={} shape={}", z0.d(), z0.shape()),
        ));
    }
    let mut state = State::init(p, spec, z0, opts)?;
    let is_shadow_dr = match spec.kind {
        AlgorithmKind::DR => p.sets().len() == 2,
        AlgorithmKind::CDR | AlgorithmKind::CDRL => true,
        _ => false,
    };
    let mut trace = if opts.trace { Some(Vec::new()) } else { None };
    let mut iterations = 0usize;
    let mut final_change = f64::INFINITY;
    let mut termination = Termination::MaxIterations;
    while iterations < opts.max_iter {
        let change = state.advance(p, spec, opts.phase_rotation)?;
        iterations += 1;
        final_change = change;
        if !state.finite() || !change.is_finite() {
            termination = Termination::Diverged;
            break;
        }
        if let Some(tr) = trace.as_mut() {
            let cand = candidate_of(&state, p, is_shadow_dr)?;
            tr.push(TracePoint {
                iteration: iterations,
                change,
                gap: p.feasibility_gap(&cand)?,
            });
        }
        if change <= opts.tol {
            termination = Termination::Converged;
            break;
        }
    }
    let candidate = candidate_of(&state, p, is_shadow_dr)?;
    let final_gap = if candidate.finite() {
        p.feasibility_gap(&candidate)?
    } else {
        f64::INFINITY
    };
    Ok(RunOutcome {
        termination,
        iterations,
        candidate,
        final_change,
        final_gap,
        trace,
    })
}

fn candidate_of(state: &State, p: &Problem, is_shadow_dr: bool) -> Result<Signal> {
    if is_shadow_dr {
        if let State::Plain(z) = state {
            return p.sets()[1].project(z);
        }
    }
    state.candidate(p)
}
