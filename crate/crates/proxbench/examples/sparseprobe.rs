use proxbench::algorithms::{run, AlgorithmKind, AlgorithmSpec, Problem, RunOptions};
use proxbench::sets::ConstraintSet;
use proxbench::signal::{MeasurementMap, Modifier, Shape, Signal, Transform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn build(h: usize, w: usize, k: usize, seed: u64, dot_cut: f64) -> (Problem, Signal) {
    let shape = Shape::TwoD(h, w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = 6.0;
    let mut centers: Vec<(f64, f64)> = Vec::new();
    while centers.len() < k {
        let cy = rng.gen_range(margin..h as f64 - margin);
        let cx = rng.gen_range(margin..w as f64 - margin);
        if centers.iter().all(|&(py, px)| (py - cy).hypot(px - cx) > 4.0) {
            centers.push((cy, cx));
        }
    }
    let mut field = vec![0.0f64; h * w];
    for &(cy, cx) in &centers {
        let height = rng.gen_range(0.5..1.5);
        let sigma = rng.gen_range(1.0..3.0);
        for r in 0..h {
            for c in 0..w {
                let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
                let v = (-d2 / (2.0 * sigma * sigma)).exp();
                if v >= dot_cut { field[r * w + c] += height * v; }
            }
        }
    }
    let nnz = field.iter().filter(|v| **v > 0.0).count();
    let s = ((1.2 * nnz as f64).ceil() as usize).max(1);
    let truth = Signal::new(2, shape, field.iter().flat_map(|&v| [v, 0.0]).collect()).unwrap();
    let map = MeasurementMap::new(Transform::Dft2D, Modifier::None).unwrap();
    let image = map.apply(&truth).unwrap();
    let radii: Vec<f64> = (0..h * w).map(|i| image.block_norm(i)).collect();
    let sets = vec![
        ConstraintSet::sparse_nonneg_cone(s, vec![true; h * w]).unwrap(),
        ConstraintSet::amplitude(map, radii).unwrap(),
    ];
    (Problem::new(sets, 2, shape, true).unwrap(), truth)
}

fn best_err(cand: &Signal, truth: &Signal, h: usize, w: usize) -> f64 {
    let amp: Vec<f64> = (0..h * w).map(|i| cand.block_norm(i)).collect();
    let t: Vec<f64> = (0..h * w).map(|i| truth.block_norm(i)).collect();
    let mut best = f64::INFINITY;
    for refl in [false, true] {
        let a: Vec<f64> = if refl {
            (0..h * w).map(|i| { let (r, c) = (i / w, i % w); amp[((h - r) % h) * w + (w - c) % w] }).collect()
        } else { amp.clone() };
        for sy in 0..h { for sx in 0..w {
            let mut err = 0.0f64;
            'o: for r in 0..h { for c in 0..w {
                let src = ((r + sy) % h) * w + (c + sx) % w;
                err = err.max((a[src] - t[r * w + c]).abs());
                if err > best { break 'o; }
            } }
            if err < best { best = err; }
        } }
    }
    best
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let cut: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.3);
    let trials: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(15);
    let (h, w) = (64, 64);
    let mut succ = std::collections::HashMap::new();
    let mut iters_sum = std::collections::HashMap::new();
    for seed in 0..trials {
        let (p, truth) = build(h, w, 3, seed, cut);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let z0 = Signal::random_gaussian(2, Shape::TwoD(h, w), &mut rng);
        for kind in [AlgorithmKind::CP, AlgorithmKind::DRAP, AlgorithmKind::CDRL] {
            let mut spec = AlgorithmSpec::new(kind);
            if kind == AlgorithmKind::CDRL { spec.lambda = 0.33; }
            let out = run(&p, &spec, &z0, &RunOptions { tol: 1e-8, max_iter: 6000, ..RunOptions::default() }).unwrap();
            let e = best_err(&out.candidate, &truth, h, w);
            *succ.entry(format!("{kind:?}")).or_insert(0usize) += (e <= 5e-4) as usize;
            *iters_sum.entry(format!("{kind:?}")).or_insert(0usize) += out.iterations;
        }
    }
    for (k, v) in &succ {
        println!("cut {cut}: {k} success {v}/{trials} avg_iters {}", iters_sum[k] / trials as usize);
    }
}
