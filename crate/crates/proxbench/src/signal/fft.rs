//! Unitary discrete Fourier transforms on `d = 2` signals.
//!
//! Both directions carry the `1/√n` factor so the transform is an isometry
//! and the amplitude spheres are preserved under conjugation by it.

use super::{Shape, Signal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry((len, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    plan(n, inverse).process(buf);
    let scale = 1.0 / (n as f64).sqrt();
    for c in buf.iter_mut() {
        *c *= scale;
    }
}

fn to_complex(z: &Signal) -> Vec<Complex64> {
    (0..z.len())
        .map(|i| {
            let b = z.block(i);
            Complex64::new(b[0], b[1])
        })
        .collect()
}

fn from_complex(buf: &[Complex64], shape: Shape) -> Signal {
    let mut data = Vec::with_capacity(buf.len() * 2);
    for c in buf {
        data.push(c.re);
        data.push(c.im);
    }
    Signal {
        d: 2,
        shape,
        data,
    }
}

/// Unitary 1-D DFT over the flattened block sequence.
pub fn dft1d(z: &Signal, inverse: bool) -> Signal {
    let mut buf = to_complex(z);
    fft_in_place(&mut buf, inverse);
    from_complex(&buf, z.shape())
}

/// Unitary 2-D DFT: rows then columns of the `h × w` grid.
pub fn dft2d(z: &Signal, inverse: bool) -> Signal {
    let (h, w) = match z.shape() {
        Shape::TwoD(h, w) => (h, w),
        other => panic!("dft2d requires a 2-D shape, got {other}"),
    };
    let mut buf = to_complex(z);
    for row in buf.chunks_mut(w) {
        fft_in_place(row, inverse);
    }
    let mut col = vec![Complex64::default(); h];
    for j in 0..w {
        for i in 0..h {
            col[i] = buf[i * w + j];
        }
        fft_in_place(&mut col, inverse);
        for i in 0..h {
            buf[i * w + j] = col[i];
        }
    }
    from_complex(&buf, z.shape())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dft_of_constant_concentrates_in_bin_zero() {
        let n = 8;
        let c = 3.5;
        let mut data = vec![0.0; 2 * n];
        for i in 0..n {
            data[2 * i] = c;
        }
        let z = Signal::new(2, Shape::OneD(n), data).unwrap();
        let out = dft1d(&z, false);
        assert!((out.block(0)[0] - c * (n as f64).sqrt()).abs() < 1e-12);
        assert!(out.block(0)[1].abs() < 1e-12);
        for i in 1..n {
            assert!(out.block_norm(i) < 1e-12);
        }
    }

    #[test]
    fn dft1d_round_trip_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let z = Signal::random_gaussian(2, Shape::OneD(12), &mut rng);
            let fz = dft1d(&z, false);
            assert!((fz.norm() / z.norm() - 1.0).abs() < 1e-12);
            assert!(dft1d(&fz, true).sub(&z).norm() < 1e-12 * z.norm());
        }
    }

    #[test]
    fn dft2d_round_trip_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let z = Signal::random_gaussian(2, Shape::TwoD(6, 4), &mut rng);
            let fz = dft2d(&z, false);
            assert!((fz.norm() / z.norm() - 1.0).abs() < 1e-12);
            assert!(dft2d(&fz, true).sub(&z).norm() < 1e-12 * z.norm());
        }
    }
}
