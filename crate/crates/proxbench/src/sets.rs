//! Constraint sets with projectors, reflectors and distances.
//!
//! The data sets are amplitude constraints: per-block spheres in the image
//! of a measurement map. The qualitative sets are cones: real-nonnegative
//! support, bounded block-sparsity, and their intersection. `Diagonal` is
//! the subspace of product signals with all blocks equal.
//!
//! Projections onto the nonconvex sets are set-valued in theory; the
//! tie-breaks here (unit direction `e₁` at zero amplitude, lowest block
//! index for equal sparsity norms) make every projector a deterministic
//! function so trials are reproducible.

use crate::error::{Error, Result};
use crate::signal::{MeasurementMap, ProductSignal, Signal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConstraintSet {
    /// `{ z : ‖(F·P_j z)_i‖ = b_i ∀i }` — per-block spheres pulled back
    /// through a measurement map.
    Amplitude {
        map: MeasurementMap,
        radii: Vec<f64>,
    },
    /// Blocks zero off `support`; on the support the block is real
    /// (first coordinate only) and, when `nonneg`, clipped at zero.
    RealSupport { support: Vec<bool>, nonneg: bool },
    /// At most `s` nonzero blocks.
    Sparsity { s: usize },
    /// Intersection of nonnegative-real support and sparsity; the
    /// projector composes `P_sparsity ∘ P_support`, which is exact here.
    SparseNonnegCone { s: usize, support: Vec<bool> },
    /// Product-space diagonal: all blocks equal.
    Diagonal { count: usize },
}

impl ConstraintSet {
    pub fn amplitude(map: MeasurementMap, radii: Vec<f64>) -> Result<Self> {
        if !radii.iter().all(|r| r.is_finite() && *r >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "radii",
                reason: "amplitude radii must be finite and nonnegative".into(),
            });
        }
        Ok(ConstraintSet::Amplitude { map, radii })
    }

    pub fn nonneg_real_support(support: Vec<bool>) -> Self {
        ConstraintSet::RealSupport {
            support,
            nonneg: true,
        }
    }

    /// Support restriction to the whole real axis (no sign constraint);
    /// used by the planar toy instances.
    pub fn real_line_support(support: Vec<bool>) -> Self {
        ConstraintSet::RealSupport {
            support,
            nonneg: false,
        }
    }

    pub fn sparsity(s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidParameter {
                name: "s",
                reason: "sparsity bound must be at least 1".into(),
            });
        }
        Ok(ConstraintSet::Sparsity { s })
    }

    pub fn sparse_nonneg_cone(s: usize, support: Vec<bool>) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidParameter {
                name: "s",
                reason: "sparsity bound must be at least 1".into(),
            });
        }
        Ok(ConstraintSet::SparseNonnegCone { s, support })
    }

    /// Projection onto the set. Errors if the variant does not apply to a
    /// plain signal (`Diagonal`) or the shapes are incompatible.
    pub fn project(&self, z: &Signal) -> Result<Signal> {
        match self {
            ConstraintSet::Amplitude { map, radii } => {
                if radii.len() != z.len() {
                    return Err(Error::shape_mismatch(
                        format!("{} radii", z.len()),
                        radii.len(),
                    ));
                }
                let mut y = map.apply(z)?;
                for i in 0..y.len() {
                    let r = y.block_norm(i);
                    let b = radii[i];
                    let blk = y.block_mut(i);
                    if r > 0.0 {
                        let t = b / r;
                        for x in blk.iter_mut() {
                            *x *= t;
                        }
                    } else {
                        blk[0] = b;
                        for x in blk.iter_mut().skip(1) {
                            *x = 0.0;
                        }
                    }
                }
                map.apply_pinv(&y)
            }
            ConstraintSet::RealSupport { support, nonneg } => {
                if support.len() != z.len() {
                    return Err(Error::shape_mismatch(
                        format!("support of length {}", z.len()),
                        support.len(),
                    ));
                }
                let mut out = z.clone();
                for i in 0..z.len() {
                    let blk = out.block_mut(i);
                    if support[i] {
                        if *nonneg {
                            blk[0] = blk[0].max(0.0);
                        }
                        for x in blk.iter_mut().skip(1) {
                            *x = 0.0;
                        }
                    } else {
                        for x in blk.iter_mut() {
                            *x = 0.0;
                        }
                    }
                }
                Ok(out)
            }
            ConstraintSet::Sparsity { s } => {
                if *s > z.len() {
                    return Err(Error::InvalidParameter {
                        name: "s",
                        reason: format!("sparsity {s} exceeds block count {}", z.len()),
                    });
                }
                Ok(project_sparsity(z, *s))
            }
            ConstraintSet::SparseNonnegCone { s, support } => {
                let inner = ConstraintSet::nonneg_real_support(support.clone());
                let clipped = inner.project(z)?;
                if *s > z.len() {
                    return Err(Error::InvalidParameter {
                        name: "s",
                        reason: format!("sparsity {s} exceeds block count {}", z.len()),
                    });
                }
                Ok(project_sparsity(&clipped, *s))
            }
            ConstraintSet::Diagonal { .. } => Err(Error::IncompatibleSet(
                "Diagonal applies to product signals only".into(),
            )),
        }
    }

    /// `R_C = 2 P_C − Id`.
    pub fn reflect(&self, z: &Signal) -> Result<Signal> {
        Ok(self.project(z)?.scale(2.0).sub(z))
    }

    /// `‖z − P_C z‖`. For amplitude sets under the (isometric) measurement
    /// maps this is the closed form `√Σᵢ (‖(F·P_j z)ᵢ‖ − bᵢ)²`, which
    /// halves the transform count.
    pub fn distance(&self, z: &Signal) -> Result<f64> {
        match self {
            ConstraintSet::Amplitude { map, radii } => {
                if radii.len() != z.len() {
                    return Err(Error::shape_mismatch(
                        format!("{} radii", z.len()),
                        radii.len(),
                    ));
                }
                let y = map.apply(z)?;
                let d2: f64 = (0..y.len())
                    .map(|i| {
                        let r = y.block_norm(i) - radii[i];
                        r * r
                    })
                    .sum();
                Ok(d2.sqrt())
            }
            _ => Ok(z.sub(&self.project(z)?).norm()),
        }
    }

    /// Projection of a product signal. `Diagonal` averages the blocks;
    /// every other variant errors.
    pub fn project_product(&self, z: &ProductSignal) -> Result<ProductSignal> {
        match self {
            ConstraintSet::Diagonal { count } => {
                if *count != z.count() {
                    return Err(Error::shape_mismatch(
                        format!("{count} product blocks"),
                        z.count(),
                    ));
                }
                Ok(ProductSignal::diagonal(&z.block_average(), *count))
            }
            _ => Err(Error::IncompatibleSet(
                "only Diagonal applies to product signals".into(),
            )),
        }
    }

    pub fn reflect_product(&self, z: &ProductSignal) -> Result<ProductSignal> {
        let p = self.project_product(z)?;
        let blocks = p
            .blocks()
            .iter()
            .zip(z.blocks())
            .map(|(pb, zb)| pb.scale(2.0).sub(zb))
            .collect();
        ProductSignal::new(blocks)
    }
}

/// Keep the `s` blocks of largest Euclidean norm, zero the rest. Ties
/// resolve to the lowest block index.
fn project_sparsity(z: &Signal, s: usize) -> Signal {
    let mut order: Vec<usize> = (0..z.len()).collect();
    // stable sort by descending norm keeps the lowest-index tie winner
    order.sort_by(|&a, &b| {
        z.block_norm(b)
            .partial_cmp(&z.block_norm(a))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut keep = vec![false; z.len()];
    for &i in order.iter().take(s) {
        keep[i] = true;
    }
    let mut out = z.clone();
    for i in 0..z.len() {
        if !keep[i] {
            for x in out.block_mut(i).iter_mut() {
                *x = 0.0;
            }
        }
    }
    out
}

/// Componentwise projection onto `C = C₀ × C₁ × … × C_m`.
pub fn project_component(sets: &[ConstraintSet], z: &ProductSignal) -> Result<ProductSignal> {
    if sets.len() != z.count() {
        return Err(Error::shape_mismatch(
            format!("{} product blocks", sets.len()),
            z.count(),
        ));
    }
    let blocks: Result<Vec<Signal>> = sets
        .iter()
        .zip(z.blocks())
        .map(|(set, blk)| set.project(blk))
        .collect();
    ProductSignal::new(blocks?)
}

/// Componentwise reflector `2 P_C − Id`.
pub fn reflect_component(sets: &[ConstraintSet], z: &ProductSignal) -> Result<ProductSignal> {
    let p = project_component(sets, z)?;
    let blocks = p
        .blocks()
        .iter()
        .zip(z.blocks())
        .map(|(pb, zb)| pb.scale(2.0).sub(zb))
        .collect();
    ProductSignal::new(blocks)
}
