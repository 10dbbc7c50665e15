//! Composed measurement maps `F · P_j`.
//!
//! `F` is the transform (identity or a unitary DFT) and `P_j` is a
//! per-observation modifier: a pointwise invertible mask, a cyclic
//! shift, or the translation `z ↦ z − a_j` used in source localization.
//! The translation is affine; its "adjoint" is the inverse shift, which is
//! all the projector formulas need.
//!
//! Two pullbacks are provided: `apply_adjoint` (the true adjoint, used by
//! gradient formulas) and `apply_pinv` (the inverse, used by amplitude
//! projectors). They coincide exactly when the map is an isometry, e.g.
//! unit-modulus masks; for modulated masks only the inverse pullback keeps
//! the projector idempotent.

use super::{fft, Shape, Signal};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    Identity,
    Dft1D,
    Dft2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Modifier {
    None,
    /// Pointwise complex multiplication by an invertible mask (d = 2).
    PointwiseMask(Signal),
    /// Cyclic shift of the block grid, one offset per grid dimension.
    CyclicShift(Vec<i64>),
    /// `z ↦ z − a` applied to every block.
    Translate(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMap {
    pub transform: Transform,
    pub modifier: Modifier,
}

impl MeasurementMap {
    pub fn new(transform: Transform, modifier: Modifier) -> Result<Self> {
        if let Modifier::PointwiseMask(mask) = &modifier {
            if mask.d() != 2 {
                return Err(Error::NotComplex(mask.d()));
            }
            for i in 0..mask.len() {
                if mask.block_norm(i) < 1e-12 {
                    return Err(Error::InvalidParameter {
                        name: "mask",
                        reason: format!("entry {i} has modulus {} ~ 0", mask.block_norm(i)),
                    });
                }
            }
        }
        Ok(MeasurementMap {
            transform,
            modifier,
        })
    }

    pub fn identity() -> Self {
        MeasurementMap {
            transform: Transform::Identity,
            modifier: Modifier::None,
        }
    }

    fn check_compat(&self, z: &Signal) -> Result<()> {
        match self.transform {
            Transform::Identity => {}
            Transform::Dft1D | Transform::Dft2D => {
                if z.d() != 2 {
                    return Err(Error::NotComplex(z.d()));
                }
                if self.transform == Transform::Dft2D && !matches!(z.shape(), Shape::TwoD(_, _)) {
                    return Err(Error::shape_mismatch("2-D grid", z.shape()));
                }
            }
        }
        match &self.modifier {
            Modifier::PointwiseMask(mask) => {
                mask.check_layout(z)?;
            }
            Modifier::CyclicShift(offsets) => {
                let ndims = match z.shape() {
                    Shape::Scalar => 0,
                    Shape::OneD(_) => 1,
                    Shape::TwoD(_, _) => 2,
                };
                if offsets.len() != ndims {
                    return Err(Error::shape_mismatch(
                        format!("{ndims} shift offsets"),
                        offsets.len(),
                    ));
                }
            }
            Modifier::Translate(a) => {
                if a.len() != z.d() {
                    return Err(Error::shape_mismatch(
                        format!("translation of length d={}", z.d()),
                        a.len(),
                    ));
                }
            }
            Modifier::None => {}
        }
        Ok(())
    }

    fn apply_modifier(&self, z: &Signal, mode: ModifierMode) -> Signal {
        match &self.modifier {
            Modifier::None => z.clone(),
            Modifier::PointwiseMask(mask) => {
                let mut out = z.clone();
                for i in 0..z.len() {
                    let m = mask.block(i);
                    let b = z.block(i);
                    let o = out.block_mut(i);
                    match mode {
                        ModifierMode::Forward => {
                            o[0] = m[0] * b[0] - m[1] * b[1];
                            o[1] = m[0] * b[1] + m[1] * b[0];
                        }
                        ModifierMode::Adjoint => {
                            // conj(m) * b
                            o[0] = m[0] * b[0] + m[1] * b[1];
                            o[1] = m[0] * b[1] - m[1] * b[0];
                        }
                        ModifierMode::Inverse => {
                            // b / m = conj(m) * b / |m|^2
                            let s = m[0] * m[0] + m[1] * m[1];
                            o[0] = (m[0] * b[0] + m[1] * b[1]) / s;
                            o[1] = (m[0] * b[1] - m[1] * b[0]) / s;
                        }
                    }
                }
                out
            }
            Modifier::CyclicShift(offsets) => {
                cyclic_shift(z, offsets, mode != ModifierMode::Forward)
            }
            Modifier::Translate(a) => {
                let mut out = z.clone();
                let sign = if mode == ModifierMode::Forward { -1.0 } else { 1.0 };
                for i in 0..z.len() {
                    let o = out.block_mut(i);
                    for (k, ak) in a.iter().enumerate() {
                        o[k] += sign * ak;
                    }
                }
                out
            }
        }
    }

    fn apply_transform(&self, z: &Signal, inverse: bool) -> Signal {
        match self.transform {
            Transform::Identity => z.clone(),
            Transform::Dft1D => fft::dft1d(z, inverse),
            Transform::Dft2D => fft::dft2d(z, inverse),
        }
    }

    /// `F · P_j(z)`.
    pub fn apply(&self, z: &Signal) -> Result<Signal> {
        self.check_compat(z)?;
        Ok(self.apply_transform(&self.apply_modifier(z, ModifierMode::Forward), false))
    }

    /// `P*_j · F*(y)`; the adjoint of the translation is the inverse shift.
    pub fn apply_adjoint(&self, y: &Signal) -> Result<Signal> {
        self.check_compat(y)?;
        Ok(self.apply_modifier(&self.apply_transform(y, true), ModifierMode::Adjoint))
    }

    /// `P⁻¹_j · F⁻¹(y)`. Equals `apply_adjoint` for isometric maps; for
    /// modulated masks this divides by the mask, giving an idempotent
    /// pullback of transform-domain projections.
    pub fn apply_pinv(&self, y: &Signal) -> Result<Signal> {
        self.check_compat(y)?;
        Ok(self.apply_modifier(&self.apply_transform(y, true), ModifierMode::Inverse))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ModifierMode {
    Forward,
    Adjoint,
    Inverse,
}

fn cyclic_shift(z: &Signal, offsets: &[i64], adjoint: bool) -> Signal {
    let mut out = z.clone();
    let d = z.d();
    let index_of = |i: usize| -> usize {
        match z.shape() {
            Shape::Scalar => i,
            Shape::OneD(n) => {
                let off = if adjoint { -offsets[0] } else { offsets[0] };
                (i as i64 - off).rem_euclid(n as i64) as usize
            }
            Shape::TwoD(h, w) => {
                let (r, c) = ((i / w) as i64, (i % w) as i64);
                let (oh, ow) = if adjoint {
                    (-offsets[0], -offsets[1])
                } else {
                    (offsets[0], offsets[1])
                };
                let sr = (r - oh).rem_euclid(h as i64) as usize;
                let sc = (c - ow).rem_euclid(w as i64) as usize;
                sr * w + sc
            }
        }
    };
    for i in 0..z.len() {
        let src = index_of(i);
        let o = &mut out.data[i * d..(i + 1) * d];
        o.copy_from_slice(&z.data[src * d..(src + 1) * d]);
    }
    out
}
