//! Signal storage and linear measurement maps.
//!
//! A [`Signal`] is a point of `(ℝᵈ)ⁿ`: `n` blocks of `d` reals laid out
//! contiguously. Complex-valued signals are stored as `d = 2` blocks, so a
//! complex `n`-vector and its real reformulation are the same object. A
//! [`ProductSignal`] stacks `m + 1` signals of identical shape for the
//! product-space formulations.

mod fft;
mod map;

pub use map::{MeasurementMap, Modifier, Transform};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Logical grid layout of the `n` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    /// A single block (`n = 1`), e.g. a source location in the plane.
    Scalar,
    /// A 1-D signal of `n` blocks.
    OneD(usize),
    /// An `h × w` grid stored row-major (`n = h·w`).
    TwoD(usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Scalar => 1,
            Shape::OneD(n) => n,
            Shape::TwoD(h, w) => h * w,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Shape::Scalar => write!(f, "scalar"),
            Shape::OneD(n) => write!(f, "{n}"),
            Shape::TwoD(h, w) => write!(f, "{h}x{w}"),
        }
    }
}

/// A point `z ∈ (ℝᵈ)ⁿ`: `n` blocks of `d` reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    d: usize,
    shape: Shape,
    data: Vec<f64>,
}

impl Signal {
    pub fn new(d: usize, shape: Shape, data: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: format!("must be 1, 2 or 3, got {d}"),
            });
        }
        if data.len() != shape.len() * d {
            return Err(Error::shape_mismatch(
                format!("{} blocks x {d} reals", shape.len()),
                format!("{} reals", data.len()),
            ));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("Signal::new"));
        }
        Ok(Signal { d, shape, data })
    }

    pub fn zeros(d: usize, shape: Shape) -> Self {
        Signal {
            d,
            shape,
            data: vec![0.0; shape.len() * d],
        }
    }

    /// Standard Gaussian entries in every coordinate.
    pub fn random_gaussian(d: usize, shape: Shape, rng: &mut impl rand::Rng) -> Self {
        let data = (0..shape.len() * d)
            .map(|_| rng.sample(rand_distr::StandardNormal))
            .collect();
        Signal { d, shape, data }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Number of blocks.
    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    /// Euclidean norm of block `i`.
    pub fn block_norm(&self, i: usize) -> f64 {
        self.block(i).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &Signal) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn same_layout(&self, other: &Signal) -> bool {
        self.d == other.d && self.shape == other.shape
    }

    pub(crate) fn check_layout(&self, other: &Signal) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::shape_mismatch(
                format!("d={} shape={}", self.d, self.shape),
                format!("d={} shape={}", other.d, other.shape),
            ))
        }
    }

    pub fn scale(&self, t: f64) -> Signal {
        Signal {
            d: self.d,
            shape: self.shape,
            data: self.data.iter().map(|x| t * x).collect(),
        }
    }

    pub fn add(&self, other: &Signal) -> Signal {
        debug_assert!(self.same_layout(other));
        Signal {
            d: self.d,
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Signal) -> Signal {
        debug_assert!(self.same_layout(other));
        Signal {
            d: self.d,
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self + t * other`, in place.
    pub fn axpy(&mut self, t: f64, other: &Signal) {
        debug_assert!(self.same_layout(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += t * b;
        }
    }
}

/// `m + 1` signals of identical layout, the lifted variable of the
/// product-space formulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSignal {
    blocks: Vec<Signal>,
}

impl ProductSignal {
    pub fn new(blocks: Vec<Signal>) -> Result<Self> {
        let first = blocks.first().ok_or(Error::InvalidParameter {
            name: "blocks",
            reason: "product signal needs at least one block".into(),
        })?;
        for b in &blocks[1..] {
            first.check_layout(b)?;
        }
        Ok(ProductSignal { blocks })
    }

    /// Lift `z` to the diagonal: `(z, z, …, z)` with `count` copies.
    pub fn diagonal(z: &Signal, count: usize) -> Self {
        ProductSignal {
            blocks: vec![z.clone(); count],
        }
    }

    pub fn blocks(&self) -> &[Signal] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Signal] {
        &mut self.blocks
    }

    pub fn count(&self) -> usize {
        self.blocks.len()
    }

    /// Blockwise average, the projection onto the diagonal set.
    pub fn block_average(&self) -> Signal {
        let mut avg = Signal::zeros(self.blocks[0].d(), self.blocks[0].shape());
        for b in &self.blocks {
            avg.axpy(1.0, b);
        }
        avg.scale(1.0 / self.blocks.len() as f64)
    }

    pub fn norm_sq(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_sq()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.all_finite())
    }
}

/// Common surface for the run loop over plain and product-space iterates.
pub trait Iterate: Clone {
    fn diff_norm(&self, other: &Self) -> f64;
    fn finite(&self) -> bool;
}

impl Iterate for Signal {
    fn diff_norm(&self, other: &Self) -> f64 {
        self.sub(other).norm()
    }

    fn finite(&self) -> bool {
        self.all_finite()
    }
}

impl Iterate for ProductSignal {
    fn diff_norm(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.sub(b).norm_sq())
            .sum::<f64>()
            .sqrt()
    }

    fn finite(&self) -> bool {
        self.all_finite()
    }
}

/// Euclidean norm of the difference between successive iterates.
pub fn iterate_change<T: Iterate>(prev: &T, next: &T) -> f64 {
    prev.diff_norm(next)
}

/// Distance between `z` and `zref` minimized over a global phase rotation
/// of every 2-block. The optimal angle has the closed form
/// `θ* = arg Σᵢ conj(zᵢ)·zrefᵢ`, giving
/// `dist² = ‖z‖² + ‖zref‖² − 2·|Σᵢ conj(zᵢ)·zrefᵢ|`.
pub fn phase_aligned_distance(z: &Signal, zref: &Signal) -> Result<f64> {
    if z.d() != 2 {
        return Err(Error::NotComplex(z.d()));
    }
    z.check_layout(zref)?;
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..z.len() {
        let a = z.block(i);
        let b = zref.block(i);
        // conj(a) * b
        re += a[0] * b[0] + a[1] * b[1];
        im += a[0] * b[1] - a[1] * b[0];
    }
    // evaluate at the optimal angle by explicit rotation: the closed
    // form √(‖z‖²+‖zref‖²−2|corr|) cancels catastrophically near zero
    if re == 0.0 && im == 0.0 {
        return Ok((z.norm_sq() + zref.norm_sq()).sqrt());
    }
    let theta = im.atan2(re);
    Ok(rotate_phase(z, theta)?.sub(zref).norm())
}

/// Rotate every 2-block of `z` by the angle `theta`.
pub fn rotate_phase(z: &Signal, theta: f64) -> Result<Signal> {
    if z.d() != 2 {
        return Err(Error::NotComplex(z.d()));
    }
    let (c, s) = (theta.cos(), theta.sin());
    let mut out = z.clone();
    for i in 0..z.len() {
        let b = z.block(i);
        let o = out.block_mut(i);
        o[0] = c * b[0] - s * b[1];
        o[1] = s * b[0] + c * b[1];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_signal(d: usize, shape: Shape, seed: u64) -> Signal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Signal::random_gaussian(d, shape, &mut rng)
    }

    #[test]
    fn new_rejects_bad_length() {
        assert!(Signal::new(2, Shape::OneD(3), vec![0.0; 5]).is_err());
        assert!(Signal::new(2, Shape::OneD(3), vec![0.0; 6]).is_ok());
    }

    #[test]
    fn new_rejects_nonfinite() {
        assert!(Signal::new(1, Shape::OneD(2), vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn iterate_change_identical_is_zero() {
        let z = random_signal(2, Shape::OneD(5), 1);
        assert_eq!(iterate_change(&z, &z), 0.0);
    }

    #[test]
    fn iterate_change_unit_step() {
        let z = random_signal(2, Shape::OneD(5), 2);
        let mut z2 = z.clone();
        z2.data_mut()[0] += 1.0;
        assert!((iterate_change(&z, &z2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn iterate_change_matches_naive_sum() {
        let a = random_signal(2, Shape::OneD(5), 3);
        let b = random_signal(2, Shape::OneD(5), 4);
        let naive: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!((iterate_change(&a, &b) - naive).abs() < 1e-14);
    }

    #[test]
    fn phase_distance_invariant_under_rotation() {
        let z = random_signal(2, Shape::OneD(8), 5);
        let zrot = rotate_phase(&z, std::f64::consts::PI / 3.0).unwrap();
        assert!(phase_aligned_distance(&zrot, &z).unwrap() < 1e-12);
    }

    #[test]
    fn phase_distance_does_not_remove_scaling() {
        let z = random_signal(2, Shape::OneD(8), 6);
        let z2 = z.scale(2.0);
        let d = phase_aligned_distance(&z2, &z).unwrap();
        assert!((d - z.norm()).abs() < 1e-12);
    }

    #[test]
    fn phase_distance_matches_grid_search() {
        let z = random_signal(2, Shape::OneD(8), 7);
        let zref = random_signal(2, Shape::OneD(8), 8);
        let closed = phase_aligned_distance(&z, &zref).unwrap();
        let mut best = f64::INFINITY;
        let grid = 1_000_000;
        for k in 0..grid {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / grid as f64;
            let d = rotate_phase(&z, theta).unwrap().sub(&zref).norm();
            best = best.min(d);
        }
        assert!(
            (closed - best).abs() < 1e-8,
            "closed {closed} vs grid {best}"
        );
        assert!(closed <= best + 1e-12);
    }

    #[test]
    fn phase_distance_is_pseudometric_on_samples() {
        for seed in 0..100 {
            let a = random_signal(2, Shape::OneD(4), 900 + seed);
            let b = random_signal(2, Shape::OneD(4), 1800 + seed);
            let c = random_signal(2, Shape::OneD(4), 2700 + seed);
            let dab = phase_aligned_distance(&a, &b).unwrap();
            let dba = phase_aligned_distance(&b, &a).unwrap();
            assert!((dab - dba).abs() < 1e-10);
            let dac = phase_aligned_distance(&a, &c).unwrap();
            let dcb = phase_aligned_distance(&c, &b).unwrap();
            assert!(dab <= dac + dcb + 1e-10);
        }
    }

    #[test]
    fn phase_distance_rejects_real_signals() {
        let z = random_signal(1, Shape::OneD(4), 9);
        assert!(matches!(
            phase_aligned_distance(&z, &z),
            Err(Error::NotComplex(1))
        ));
    }

    #[test]
    fn product_signal_requires_matching_layout() {
        let a = random_signal(2, Shape::OneD(4), 10);
        let b = random_signal(2, Shape::OneD(5), 11);
        assert!(ProductSignal::new(vec![a.clone(), b]).is_err());
        assert!(ProductSignal::new(vec![a.clone(), a]).is_ok());
    }

    #[test]
    fn block_average_of_diagonal_is_identity() {
        let z = random_signal(2, Shape::OneD(4), 12);
        let p = ProductSignal::diagonal(&z, 3);
        assert!(p.block_average().sub(&z).norm() < 1e-15);
    }
}
