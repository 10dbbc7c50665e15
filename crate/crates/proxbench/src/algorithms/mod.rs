//! The benchmarked fixed-point algorithms.
//!
//! Every algorithm is a pure step map over either the base space or the
//! product space; [`run`] drives any of them with a common termination
//! rule. Averaged projections, alternating minimization, product-space
//! alternating projections and projected gradient are one and the same
//! step map, so only the former is implemented (the equivalences are
//! pinned down by tests).

mod qnavp;
mod runner;
mod steps;

pub use qnavp::QnState;
pub use runner::{run, RunOptions, RunOutcome, Termination, TracePoint};
pub use steps::{
    admm1_step, admm2_step, avp_step, cdr_step, cdrl_step, cp_step, dr_step, drap_step,
    drl_pair_step, drl_product_step, dyrepr_step, fpg_step, wf_step, wf_warm_start, Admm1State,
    Admm2State, FpgState,
};

use crate::error::{Error, Result};
use crate::sets::ConstraintSet;
use crate::signal::{MeasurementMap, ProductSignal, Shape, Signal};
use serde::{Deserialize, Serialize};

/// A feasibility instance: the ordered constraint sets `C₀ … C_m`
/// together with the layout of the unknown signal.
#[derive(Debug, Clone)]
pub struct Problem {
    sets: Vec<ConstraintSet>,
    d: usize,
    shape: Shape,
    /// Whether `sets[0]` is a qualitative constraint (the `C₀` of the
    /// model) as opposed to a data set.
    has_qualitative: bool,
}

impl Problem {
    pub fn new(
        sets: Vec<ConstraintSet>,
        d: usize,
        shape: Shape,
        has_qualitative: bool,
    ) -> Result<Self> {
        if sets.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "sets",
                reason: "a problem needs at least two constraint sets".into(),
            });
        }
        Ok(Problem {
            sets,
            d,
            shape,
            has_qualitative,
        })
    }

    pub fn sets(&self) -> &[ConstraintSet] {
        &self.sets
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn has_qualitative(&self) -> bool {
        self.has_qualitative
    }

    /// The data sets (everything except a leading qualitative set).
    pub fn data_sets(&self) -> &[ConstraintSet] {
        if self.has_qualitative {
            &self.sets[1..]
        } else {
            &self.sets
        }
    }

    /// Sum of set distances, the feasibility gap reported in the traces.
    pub fn feasibility_gap(&self, z: &Signal) -> Result<f64> {
        let mut gap = 0.0;
        for set in &self.sets {
            gap += set.distance(z)?;
        }
        Ok(gap)
    }

    /// `f(z) = 1/(2K) Σ_j dist²(z, C_j)` with `K` the number of sets.
    pub fn sq_dist_objective(&self, z: &Signal) -> Result<f64> {
        let mut total = 0.0;
        for set in &self.sets {
            let d = set.distance(z)?;
            total += d * d;
        }
        Ok(total / (2.0 * self.sets.len() as f64))
    }

    /// `∇f(z) = 1/K Σ_j (Id − P_{C_j}) z = z − avp(z)`.
    pub fn sq_dist_gradient(&self, z: &Signal) -> Result<Signal> {
        Ok(z.sub(&avp_step(self, z)?))
    }

    /// The amplitude data `(map, radii)` of every data set; errors if a
    /// data set is not an amplitude constraint (required by WF).
    pub fn amplitude_data(&self) -> Result<Vec<(&MeasurementMap, &[f64])>> {
        self.data_sets()
            .iter()
            .map(|set| match set {
                ConstraintSet::Amplitude { map, radii } => Ok((map, radii.as_slice())),
                other => Err(Error::IncompatibleSet(format!(
                    "amplitude data required, got {other:?}"
                ))),
            })
            .collect()
    }

    /// Squared-residual objective
    /// `G(z) = ½ Σ_j Σ_i (‖(F·P_j z)_i‖² − b_ij²)²`.
    pub fn sls_objective(&self, z: &Signal) -> Result<f64> {
        let mut total = 0.0;
        for (map, radii) in self.amplitude_data()? {
            let y = map.apply(z)?;
            for i in 0..y.len() {
                let r = y.block_norm(i);
                let e = r * r - radii[i] * radii[i];
                total += e * e;
            }
        }
        Ok(0.5 * total)
    }

    /// Full gradient of [`Self::sls_objective`]:
    /// `∇G(z) = 2 Σ_j (F·P_j)*[(‖ŷ_i‖² − b_ij²) ŷ_i]`.
    pub fn sls_gradient(&self, z: &Signal) -> Result<Signal> {
        let mut grad = Signal::zeros(z.d(), z.shape());
        for (map, radii) in self.amplitude_data()? {
            let mut y = map.apply(z)?;
            for i in 0..y.len() {
                let r2 = y.block_norm(i).powi(2);
                let w = r2 - radii[i] * radii[i];
                for x in y.block_mut(i) {
                    *x *= w;
                }
            }
            grad.axpy(2.0, &map.apply_adjoint(&y)?);
        }
        Ok(grad)
    }

    /// The product-space diagonal set for this problem.
    pub fn diagonal(&self) -> ConstraintSet {
        ConstraintSet::Diagonal {
            count: self.sets.len(),
        }
    }

    /// Lift a base-space point to the diagonal of the product space.
    pub fn lift(&self, z: &Signal) -> ProductSignal {
        ProductSignal::diagonal(z, self.sets.len())
    }
}

/// Identifier of a benchmarked algorithm. `AVP` also realizes AM, the
/// product-space AP and PG, which share its step map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmKind {
    CP,
    DR,
    CDR,
    CDRL,
    ADMM1,
    ADMM2,
    AVP,
    DYREPR,
    QNAVP,
    WF,
    FPG,
    DRL,
    DRAP,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 13] = [
        AlgorithmKind::CP,
        AlgorithmKind::DR,
        AlgorithmKind::CDR,
        AlgorithmKind::CDRL,
        AlgorithmKind::ADMM1,
        AlgorithmKind::ADMM2,
        AlgorithmKind::AVP,
        AlgorithmKind::DYREPR,
        AlgorithmKind::QNAVP,
        AlgorithmKind::WF,
        AlgorithmKind::FPG,
        AlgorithmKind::DRL,
        AlgorithmKind::DRAP,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::CP => "CP",
            AlgorithmKind::DR => "DR",
            AlgorithmKind::CDR => "CDR",
            AlgorithmKind::CDRL => "CDRL",
            AlgorithmKind::ADMM1 => "ADMM1",
            AlgorithmKind::ADMM2 => "ADMM2",
            AlgorithmKind::AVP => "AVP",
            AlgorithmKind::DYREPR => "DYREPR",
            AlgorithmKind::QNAVP => "QNAVP",
            AlgorithmKind::WF => "WF",
            AlgorithmKind::FPG => "FPG",
            AlgorithmKind::DRL => "DRL",
            AlgorithmKind::DRAP => "DRAP",
        }
    }
}

impl std::str::FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase();
        let kind = match up.as_str() {
            "CP" => AlgorithmKind::CP,
            "DR" => AlgorithmKind::DR,
            "CDR" => AlgorithmKind::CDR,
            "CDRL" | "CDRLAMBDA" => AlgorithmKind::CDRL,
            "ADMM1" => AlgorithmKind::ADMM1,
            "ADMM2" => AlgorithmKind::ADMM2,
            // AM, product-space AP and PG share the AvP step map
            "AVP" | "AM" | "AP" | "PG" => AlgorithmKind::AVP,
            "DYREPR" => AlgorithmKind::DYREPR,
            "QNAVP" => AlgorithmKind::QNAVP,
            "WF" | "WIRTINGER" => AlgorithmKind::WF,
            "FPG" => AlgorithmKind::FPG,
            "DRL" | "DRLAMBDA" | "RAAR" => AlgorithmKind::DRL,
            "DRAP" => AlgorithmKind::DRAP,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "algorithm",
                    reason: format!(
                        "unknown algorithm {s:?}; valid names: {}",
                        AlgorithmKind::ALL
                            .iter()
                            .map(|k| k.name())
                            .collect::<Vec<_>>()
                            .join(", ")
                    ),
                })
            }
        };
        Ok(kind)
    }
}

impl std::fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Algorithm identifier plus every tunable parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    /// Relaxation λ ∈ [0, 1] of CDRλ, DRλ and DRAP.
    pub lambda: f64,
    /// Penalty η > 0 of the nonsmooth ADMM.
    pub eta: f64,
    /// Per-set stepsizes ρ_j > 0 of ADMM₂ (a single value is replicated).
    pub rho: f64,
    /// Stepsize μ > 0 of Wirtinger Flow.
    pub mu: f64,
    /// Weighting floor c > 0 of the dynamically reweighted projections.
    pub c: f64,
    /// L-BFGS memory ℓ̄.
    pub memory: usize,
    /// Curvature floor ζ of the quasi-Newton pair update.
    pub curvature_floor: f64,
    /// Trust-region acceptance ratio η̃.
    pub ratio_threshold: f64,
    /// Power iterations of the WF warm start (0 = cold start).
    pub warm_start_iters: usize,
    /// Use the conventional scaled dual (`P_{C_j}(x + v/η)`) in ADMM₁
    /// step 2 instead of the printed `P_{C_j}(x − η v)`.
    pub admm1_scaled_dual: bool,
    /// Relax CDRλ factors toward the first set of each pair instead of
    /// the second (printed) one.
    pub cdrl_inner_relax: bool,
}

impl AlgorithmSpec {
    pub fn new(kind: AlgorithmKind) -> Self {
        AlgorithmSpec {
            kind,
            lambda: 0.5,
            eta: 3.0,
            rho: 2.0,
            mu: 0.2,
            c: 1e-8,
            memory: 8,
            curvature_floor: 1e-10,
            ratio_threshold: 1e-4,
            warm_start_iters: 0,
            admm1_scaled_dual: false,
            cdrl_inner_relax: false,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must lie in [0, 1], got {}", self.lambda),
            });
        }
        for (name, v) in [
            ("eta", self.eta),
            ("rho", self.rho),
            ("mu", self.mu),
            ("c", self.c),
            ("curvature_floor", self.curvature_floor),
            ("ratio_threshold", self.ratio_threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if self.memory == 0 {
            return Err(Error::InvalidParameter {
                name: "memory",
                reason: "L-BFGS memory must be at least 1".into(),
            });
        }
        Ok(())
    }
}
