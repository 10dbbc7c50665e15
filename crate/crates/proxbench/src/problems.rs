//! Synthetic problem instances, dataset file I/O, and per-family
//! success criteria.

use crate::algorithms::Problem;
use crate::error::{Error, Result};
use crate::sets::ConstraintSet;
use crate::signal::{
    phase_aligned_distance, MeasurementMap, Modifier, Shape, Signal, Transform,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Relative amplitude cutoff below which a pixel does not count toward
/// the support of a sparse reconstruction.
pub const SUPPORT_CUTOFF: f64 = 1e-6;

/// Fraction of a dot's peak height below which the bump is truncated to
/// zero when synthesizing sparse-dots truths, giving each dot a compact
/// support of a few pixels.
pub const DOT_CUTOFF: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemFamily {
    Cdp1D,
    Cdp2D,
    SparseDots,
    SrcLoc,
    File,
    /// Two real lines through the origin; a convex sanity toy.
    Toy,
}

impl ProblemFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemFamily::Cdp1D => "CDP1D",
            ProblemFamily::Cdp2D => "CDP2D",
            ProblemFamily::SparseDots => "SPARSE_DOTS",
            ProblemFamily::SrcLoc => "SRCLOC",
            ProblemFamily::File => "FILE",
            ProblemFamily::Toy => "TOY",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub family: ProblemFamily,
    /// Blocks per signal.
    pub n: usize,
    /// Data constraint sets.
    pub m: usize,
    pub d: usize,
    pub noise: bool,
    pub seed: u64,
}

/// A generated or loaded problem together with its optional ground
/// truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: Problem,
    pub truth: Option<Signal>,
    pub meta: InstanceMeta,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.problem.sets() == other.problem.sets()
            && self.problem.d() == other.problem.d()
            && self.problem.shape() == other.problem.shape()
            && self.problem.has_qualitative() == other.problem.has_qualitative()
            && self.truth == other.truth
            && self.meta == other.meta
    }
}

/// Mask entry distribution of the coded diffraction generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskAlphabet {
    /// Unit-modulus entries with phases uniform on the circle.
    Uniform,
    /// The modulated octanary alphabet of coded diffraction imaging:
    /// a uniform fourth root of unity times an amplitude that is √2/2
    /// with probability 4/5 and √3 with probability 1/5.
    Octanary,
}

impl Instance {
    /// A standard Gaussian starting point of the right layout.
    pub fn random_start(&self, rng: &mut impl Rng) -> Signal {
        Signal::random_gaussian(self.problem.d(), self.problem.shape(), rng)
    }
}

/// Coded diffraction patterns: a random complex Gaussian truth observed
/// through `m` masked unitary DFTs, keeping only pointwise magnitudes.
pub fn gen_cdp(shape: Shape, m: usize, seed: u64) -> Result<Instance> {
    gen_cdp_with(shape, m, seed, MaskAlphabet::Uniform)
}

pub fn gen_cdp_with(
    shape: Shape,
    m: usize,
    seed: u64,
    alphabet: MaskAlphabet,
) -> Result<Instance> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "need at least one observation".into(),
        });
    }
    let (transform, family) = match shape {
        Shape::OneD(_) | Shape::Scalar => (Transform::Dft1D, ProblemFamily::Cdp1D),
        Shape::TwoD(..) => (Transform::Dft2D, ProblemFamily::Cdp2D),
    };
    let n = shape.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = Signal::random_gaussian(2, shape, &mut rng);
    let mut sets = Vec::with_capacity(m);
    for _ in 0..m {
        let mut mask_data: Vec<f64> = Vec::with_capacity(2 * n);
        for _ in 0..n {
            match alphabet {
                MaskAlphabet::Uniform => {
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    mask_data.extend([theta.cos(), theta.sin()]);
                }
                MaskAlphabet::Octanary => {
                    let theta = rng.gen_range(0u8..4) as f64 * std::f64::consts::FRAC_PI_2;
                    let amp = if rng.gen_range(0.0..1.0) < 0.8 {
                        std::f64::consts::SQRT_2 / 2.0
                    } else {
                        3.0_f64.sqrt()
                    };
                    mask_data.extend([amp * theta.cos(), amp * theta.sin()]);
                }
            }
        }
        let mask = Signal::new(2, shape, mask_data)?;
        let map = MeasurementMap::new(transform, Modifier::PointwiseMask(mask))?;
        let image = map.apply(&truth)?;
        let radii: Vec<f64> = (0..n).map(|i| image.block_norm(i)).collect();
        sets.push(ConstraintSet::amplitude(map, radii)?);
    }
    let problem = Problem::new(sets, 2, shape, false)?;
    Ok(Instance {
        problem,
        truth: Some(truth),
        meta: InstanceMeta {
            family,
            n,
            m,
            d: 2,
            noise: false,
            seed,
        },
    })
}

/// Sparse dots: a nonnegative real image of `k_dots` Gaussian bumps,
/// observed through the magnitudes of a single unitary 2-D DFT, with
/// the qualitative set enforcing nonnegativity and an overestimated
/// sparsity bound.
pub fn gen_sparse_dots(h: usize, w: usize, k_dots: usize, seed: u64) -> Result<Instance> {
    gen_sparse_dots_with(h, w, k_dots, seed, 1.2)
}

pub fn gen_sparse_dots_with(
    h: usize,
    w: usize,
    k_dots: usize,
    seed: u64,
    s_factor: f64,
) -> Result<Instance> {
    if k_dots == 0 {
        return Err(Error::InvalidParameter {
            name: "k_dots",
            reason: "need at least one dot".into(),
        });
    }
    let shape = Shape::TwoD(h, w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // place centers with a margin so bumps do not wrap, and a minimum
    // separation so dots stay distinguishable
    let side = h.min(w) as f64;
    let margin = 6.0_f64.min(side / 4.0);
    let separation = 4.0_f64.min(side / 4.0);
    if h as f64 <= 2.0 * margin || w as f64 <= 2.0 * margin {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!("{h}x{w} too small for dot placement margin"),
        });
    }
    let mut centers: Vec<(f64, f64)> = Vec::new();
    for _ in 0..k_dots {
        let mut placed = false;
        for _ in 0..100 {
            let cy = rng.gen_range(margin..h as f64 - margin);
            let cx = rng.gen_range(margin..w as f64 - margin);
            if centers
                .iter()
                .all(|&(py, px)| (py - cy).hypot(px - cx) > separation)
            {
                centers.push((cy, cx));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::AlgorithmFailure(format!(
                "could not place {k_dots} dots on a {h}x{w} grid"
            )));
        }
    }
    let mut field = vec![0.0f64; h * w];
    for &(cy, cx) in &centers {
        let height = rng.gen_range(0.5..1.5);
        // Each dot is a Gaussian bump truncated at DOT_CUTOFF of its own
        // height, so it has compact support; `width` is the diameter of the
        // truncation circle in pixels, and sigma is derived from it. Without
        // truncation the Gaussian tails make the truth dense and
        // sparsity-constrained recovery hopeless.
        let width = rng.gen_range(1.0..3.0);
        let sigma = width / (2.0 * (2.0 * (1.0 / DOT_CUTOFF).ln()).sqrt());
        // never let truncation erase a dot entirely: the pixel nearest the
        // center always survives
        let r0 = (cy.round() as usize).min(h - 1);
        let c0 = (cx.round() as usize).min(w - 1);
        let d2_near = (r0 as f64 - cy).powi(2) + (c0 as f64 - cx).powi(2);
        let cut = DOT_CUTOFF.min((-d2_near / (2.0 * sigma * sigma)).exp());
        for r in 0..h {
            for c in 0..w {
                let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
                let profile = (-d2 / (2.0 * sigma * sigma)).exp();
                if profile >= cut {
                    field[r * w + c] += height * profile;
                }
            }
        }
    }
    let nnz = field.iter().filter(|v| **v > 0.0).count();
    let s = ((s_factor * nnz as f64).ceil() as usize).min(h * w).max(1);
    let truth_data: Vec<f64> = field.iter().flat_map(|&v| [v, 0.0]).collect();
    let truth = Signal::new(2, shape, truth_data)?;
    let map = MeasurementMap::new(Transform::Dft2D, Modifier::None)?;
    let image = map.apply(&truth)?;
    let radii: Vec<f64> = (0..h * w).map(|i| image.block_norm(i)).collect();
    let sets = vec![
        ConstraintSet::sparse_nonneg_cone(s, vec![true; h * w])?,
        ConstraintSet::amplitude(map, radii)?,
    ];
    let problem = Problem::new(sets, 2, shape, true)?;
    Ok(Instance {
        problem,
        truth: Some(truth),
        meta: InstanceMeta {
            family: ProblemFamily::SparseDots,
            n: h * w,
            m: 1,
            d: 2,
            noise: false,
            seed,
        },
    })
}

/// The consistent convex toy: the two coordinate axes of `(ℝ¹)²`,
/// intersecting only at the origin.
pub fn gen_toy_two_lines(seed: u64) -> Result<Instance> {
    let sets = vec![
        ConstraintSet::real_line_support(vec![true, false]),
        ConstraintSet::real_line_support(vec![false, true]),
    ];
    let shape = Shape::OneD(2);
    let problem = Problem::new(sets, 1, shape, false)?;
    Ok(Instance {
        problem,
        truth: Some(Signal::zeros(1, shape)),
        meta: InstanceMeta {
            family: ProblemFamily::Toy,
            n: 2,
            m: 2,
            d: 1,
            noise: false,
            seed,
        },
    })
}

/// Source localization: one unknown point in the plane and `m` range
/// measurements to known sensors, each a sphere constraint centered at
/// the sensor. With `noise` the sensor positions handed to the solver
/// carry a Gaussian placement error of about 3 units RMS while the
/// ranges stay exact.
pub fn gen_srcloc(m: usize, noise: bool, seed: u64) -> Result<Instance> {
    if m < 3 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: format!("need at least 3 sensors, got {m}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (truth, sensors) = loop {
        let truth = [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)];
        let sensors: Vec<[f64; 2]> = (0..m)
            .map(|_| [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)])
            .collect();
        let degenerate = sensors.iter().enumerate().any(|(j, a)| {
            let at_truth = (a[0] - truth[0]).hypot(a[1] - truth[1]) < 1e-6;
            let coincident = sensors[..j]
                .iter()
                .any(|b| (a[0] - b[0]).hypot(a[1] - b[1]) < 1e-6);
            at_truth || coincident
        });
        if !degenerate {
            break (truth, sensors);
        }
    };
    let radii: Vec<f64> = sensors
        .iter()
        .map(|a| (truth[0] - a[0]).hypot(truth[1] - a[1]))
        .collect();
    // placement error: per-coordinate sigma of 3/sqrt(2) gives an RMS
    // displacement of 3 units
    let sigma = 3.0 / std::f64::consts::SQRT_2;
    let solver_sensors: Vec<[f64; 2]> = sensors
        .iter()
        .map(|a| {
            if noise {
                let dx: f64 = rng.sample(rand_distr::StandardNormal);
                let dy: f64 = rng.sample(rand_distr::StandardNormal);
                [a[0] + sigma * dx, a[1] + sigma * dy]
            } else {
                *a
            }
        })
        .collect();
    let sets: Result<Vec<ConstraintSet>> = solver_sensors
        .iter()
        .zip(&radii)
        .map(|(a, &b)| {
            let map = MeasurementMap::new(Transform::Identity, Modifier::Translate(a.to_vec()))?;
            ConstraintSet::amplitude(map, vec![b])
        })
        .collect();
    let problem = Problem::new(sets?, 2, Shape::Scalar, false)?;
    Ok(Instance {
        problem,
        truth: Some(Signal::new(2, Shape::Scalar, truth.to_vec())?),
        meta: InstanceMeta {
            family: ProblemFamily::SrcLoc,
            n: 1,
            m,
            d: 2,
            noise,
            seed,
        },
    })
}

// ---------------------------------------------------------------------
// PRB1 dataset files
// ---------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"PRB1";
const EXT_MARKER: &[u8; 4] = b"XMAP";

/// Extension payload appended after the mandatory sections so generated
/// instances round-trip exactly (constraint sets, layout, provenance).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetExtra {
    meta: InstanceMeta,
    shape: Shape,
    has_qualitative: bool,
    sets: Vec<ConstraintSet>,
}

pub fn to_prb1_bytes(inst: &Instance) -> Result<Vec<u8>> {
    let d = inst.problem.d();
    let shape = inst.problem.shape();
    let n = shape.len();
    let dims: Vec<u32> = match shape {
        Shape::Scalar => vec![1],
        Shape::OneD(n) => vec![n as u32],
        Shape::TwoD(h, w) => vec![h as u32, w as u32],
    };
    let data_sets = inst.problem.data_sets();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    for v in [1u32, d as u32, dims.len() as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for dim in &dims {
        buf.extend_from_slice(&dim.to_le_bytes());
    }
    buf.extend_from_slice(&(data_sets.len() as u32).to_le_bytes());
    buf.push(inst.truth.is_some() as u8);
    if let Some(truth) = &inst.truth {
        for x in truth.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    for set in data_sets {
        let radii = match set {
            ConstraintSet::Amplitude { radii, .. } => radii.as_slice(),
            _ => {
                return Err(Error::IncompatibleSet(
                    "PRB1 data sets must be amplitude constraints".into(),
                ))
            }
        };
        if radii.len() != n {
            return Err(Error::shape_mismatch(n, radii.len()));
        }
        for b in radii {
            buf.extend_from_slice(&b.to_le_bytes());
        }
    }
    let extra = DatasetExtra {
        meta: inst.meta,
        shape,
        has_qualitative: inst.problem.has_qualitative(),
        sets: inst.problem.sets().to_vec(),
    };
    let json = serde_json::to_vec(&extra)
        .map_err(|e| Error::DatasetFormat(format!("extension encoding failed: {e}")))?;
    buf.extend_from_slice(EXT_MARKER);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    Ok(buf)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, section: &str) -> Result<&'a [u8]> {
        if self.pos + len > self.buf.len() {
            return Err(Error::DatasetFormat(format!(
                "truncated file: missing {section}"
            )));
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u32(&mut self, section: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize, section: &str) -> Result<Vec<f64>> {
        let bytes = self.take(count * 8, section)?;
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(Error::DatasetFormat(format!(
                "non-finite entries in {section}"
            )));
        }
        Ok(vals)
    }
}

pub fn from_prb1_bytes(bytes: &[u8]) -> Result<Instance> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::DatasetFormat("bad magic, expected PRB1".into()));
    }
    let version = r.u32("version")?;
    if version != 1 {
        return Err(Error::DatasetFormat(format!(
            "unsupported version {version}"
        )));
    }
    let d = r.u32("d")? as usize;
    let ndims = r.u32("ndims")? as usize;
    if !(1..=2).contains(&ndims) {
        return Err(Error::DatasetFormat(format!("unsupported ndims {ndims}")));
    }
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        dims.push(r.u32("dims")? as usize);
    }
    let m = r.u32("m")? as usize;
    let shape = if ndims == 1 {
        Shape::OneD(dims[0])
    } else {
        Shape::TwoD(dims[0], dims[1])
    };
    let n = shape.len();
    if n == 0 || m == 0 {
        return Err(Error::DatasetFormat("empty dims or m".into()));
    }
    let flag = r.take(1, "truth flag")?[0];
    if flag > 1 {
        return Err(Error::DatasetFormat(format!("bad truth flag {flag}")));
    }
    let truth_data = if flag == 1 {
        Some(r.f64s(n * d, "truth signal")?)
    } else {
        None
    };
    let b: Vec<Vec<f64>> = (0..m)
        .map(|j| r.f64s(n, &format!("measurement column {j}")))
        .collect::<Result<_>>()?;

    // optional extension with the full constraint-set description
    let extra: Option<DatasetExtra> = if r.pos < bytes.len() {
        if r.take(4, "extension marker")? != EXT_MARKER {
            return Err(Error::DatasetFormat("unknown trailing section".into()));
        }
        let len = u64::from_le_bytes(r.take(8, "extension length")?.try_into().unwrap());
        let json = r.take(len as usize, "extension payload")?;
        Some(
            serde_json::from_slice(json)
                .map_err(|e| Error::DatasetFormat(format!("extension decode failed: {e}")))?,
        )
    } else {
        None
    };

    let (sets, shape, has_qualitative, meta) = match extra {
        Some(extra) => {
            let expected = m + extra.has_qualitative as usize;
            if extra.sets.len() != expected {
                return Err(Error::DatasetFormat(format!(
                    "extension lists {} sets, header implies {expected}",
                    extra.sets.len()
                )));
            }
            (extra.sets, extra.shape, extra.has_qualitative, extra.meta)
        }
        None => {
            let transform = if ndims == 1 {
                Transform::Dft1D
            } else {
                Transform::Dft2D
            };
            let sets: Result<Vec<ConstraintSet>> = b
                .iter()
                .map(|radii| {
                    let map = MeasurementMap::new(transform, Modifier::None)?;
                    ConstraintSet::amplitude(map, radii.clone())
                })
                .collect();
            let meta = InstanceMeta {
                family: ProblemFamily::File,
                n,
                m,
                d,
                noise: false,
                seed: 0,
            };
            (sets?, shape, false, meta)
        }
    };
    let truth = truth_data.map(|data| Signal::new(d, shape, data)).transpose()?;
    let problem = Problem::new(sets, d, shape, has_qualitative)?;
    Ok(Instance {
        problem,
        truth,
        meta,
    })
}

pub fn save_dataset(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let bytes = to_prb1_bytes(inst)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Instance> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_prb1_bytes(&bytes)
}

// ---------------------------------------------------------------------
// Success criteria
// ---------------------------------------------------------------------

/// Family-dispatched success thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessCriteria {
    pub threshold: f64,
    /// Sparse dots: accept on support match alone, without the
    /// amplitude-accuracy requirement.
    pub support_only: bool,
}

impl SuccessCriteria {
    /// The per-family defaults of the benchmark protocol.
    pub fn default_for(inst: &Instance) -> Self {
        let threshold = match inst.meta.family {
            ProblemFamily::Cdp1D => 1e-9,
            ProblemFamily::Cdp2D => 1e-7,
            ProblemFamily::SparseDots => 5e-4,
            ProblemFamily::SrcLoc => {
                if inst.meta.noise {
                    3.0
                } else {
                    1e-1
                }
            }
            ProblemFamily::File => 1e-2,
            ProblemFamily::Toy => 1e-6,
        };
        SuccessCriteria {
            threshold,
            support_only: false,
        }
    }
}

/// Judges a final iterate against the instance truth.
pub fn success(inst: &Instance, z: &Signal, criteria: &SuccessCriteria) -> Result<bool> {
    Ok(truth_distance(inst, z, criteria)? <= criteria.threshold)
}

/// The family-appropriate distance between a reconstruction and the
/// truth: phase-aligned for phase retrieval, best-aligned amplitude
/// error over shifts and reflections for sparse dots, Euclidean for
/// source localization. Infinite for sparse dots when no alignment
/// matches the support.
pub fn truth_distance(inst: &Instance, z: &Signal, criteria: &SuccessCriteria) -> Result<f64> {
    let truth = inst.truth.as_ref().ok_or(Error::MissingTruth)?;
    match inst.meta.family {
        ProblemFamily::Cdp1D | ProblemFamily::Cdp2D | ProblemFamily::File => {
            phase_aligned_distance(z, truth)
        }
        ProblemFamily::SrcLoc | ProblemFamily::Toy => Ok(z.sub(truth).norm()),
        ProblemFamily::SparseDots => sparse_alignment_error(inst, z, criteria.support_only),
    }
}

fn amplitudes(z: &Signal) -> Vec<f64> {
    (0..z.len()).map(|i| z.block_norm(i)).collect()
}

fn support_of(amp: &[f64]) -> Vec<bool> {
    let max = amp.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = SUPPORT_CUTOFF * max;
    amp.iter().map(|&a| a > cutoff).collect()
}

fn reflect_grid(amp: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            out[((h - r) % h) * w + (w - c) % w] = amp[r * w + c];
        }
    }
    out
}

/// L∞ amplitude error of the candidate against the truth, minimized
/// over cyclic shifts and the point reflection, restricted to shifts at
/// which the thresholded supports coincide. Candidate shifts come from
/// the peaks of the FFT cross-correlation of the amplitude fields.
fn sparse_alignment_error(inst: &Instance, z: &Signal, support_only: bool) -> Result<f64> {
    let truth = inst.truth.as_ref().ok_or(Error::MissingTruth)?;
    let (h, w) = match inst.problem.shape() {
        Shape::TwoD(h, w) => (h, w),
        other => {
            return Err(Error::IncompatibleSet(format!(
                "sparse dots expects a 2-D grid, got {other}"
            )))
        }
    };
    let t_amp = amplitudes(truth);
    let t_supp = support_of(&t_amp);
    let z_amp = amplitudes(z);
    let mut best = f64::INFINITY;
    for reflected in [false, true] {
        let a = if reflected {
            reflect_grid(&z_amp, h, w)
        } else {
            z_amp.clone()
        };
        let a_supp = support_of(&a);
        let mut shifts = correlation_peaks(&a, &t_amp, h, w, 8)?;
        shifts.push((0, 0));
        for (sy, sx) in shifts {
            let mut err = 0.0f64;
            let mut supp_ok = true;
            'rows: for r in 0..h {
                for c in 0..w {
                    let src = ((r + sy) % h) * w + (c + sx) % w;
                    let i = r * w + c;
                    if a_supp[src] != t_supp[i] {
                        supp_ok = false;
                        break 'rows;
                    }
                    err = err.max((a[src] - t_amp[i]).abs());
                }
            }
            if supp_ok {
                best = best.min(if support_only { 0.0 } else { err });
            }
        }
    }
    Ok(best)
}

/// Top-`k` cyclic-shift candidates from the cross-correlation
/// `c(s) = Σ_i a(i ⊕ s) t(i)`, computed with 2-D FFTs.
fn correlation_peaks(
    a: &[f64],
    t: &[f64],
    h: usize,
    w: usize,
    k: usize,
) -> Result<Vec<(usize, usize)>> {
    let shape = Shape::TwoD(h, w);
    let map = MeasurementMap::new(Transform::Dft2D, Modifier::None)?;
    let to_sig = |v: &[f64]| {
        Signal::new(2, shape, v.iter().flat_map(|&x| [x, 0.0]).collect::<Vec<_>>())
    };
    let fa = map.apply(&to_sig(a)?)?;
    let ft = map.apply(&to_sig(t)?)?;
    // c = F⁻¹( F(a) ⊙ conj(F(t)) ), real for real inputs
    let mut prod = Signal::zeros(2, shape);
    for i in 0..h * w {
        let x = fa.block(i);
        let y = ft.block(i);
        let b = prod.block_mut(i);
        b[0] = x[0] * y[0] + x[1] * y[1];
        b[1] = x[1] * y[0] - x[0] * y[1];
    }
    let corr = map.apply_adjoint(&prod)?;
    let mut scored: Vec<(f64, usize)> = (0..h * w).map(|i| (corr.block(i)[0], i)).collect();
    scored.sort_by(|x, y| y.0.total_cmp(&x.0));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(_, i)| (i / w, i % w))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::rotate_phase;

    #[test]
    fn cdp_truth_satisfies_all_constraints() {
        for shape in [Shape::OneD(16), Shape::TwoD(8, 8)] {
            let inst = gen_cdp(shape, 3, 5).unwrap();
            let truth = inst.truth.as_ref().unwrap();
            let total: f64 = inst
                .problem
                .sets()
                .iter()
                .map(|s| s.distance(truth).unwrap())
                .sum();
            assert!(total < 1e-10, "residual {total}");
        }
    }

    #[test]
    fn cdp_constant_truth_unit_mask_single_bin() {
        // with mask ≡ 1 and a constant signal, the unitary DFT puts all
        // energy in bin 0; build the measurement by hand
        let n = 8;
        let shape = Shape::OneD(n);
        let c = [1.3, -0.4];
        let truth = Signal::new(2, shape, (0..n).flat_map(|_| c).collect()).unwrap();
        let map = MeasurementMap::new(Transform::Dft1D, Modifier::None).unwrap();
        let image = map.apply(&truth).unwrap();
        let b: Vec<f64> = (0..n).map(|i| image.block_norm(i)).collect();
        let expect0 = (n as f64).sqrt() * (c[0] * c[0] + c[1] * c[1]).sqrt();
        assert!((b[0] - expect0).abs() < 1e-12);
        for v in &b[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn cdp_b_matches_dense_matrix_oracle() {
        use nalgebra::{Complex, DMatrix, DVector};
        let n = 4;
        let inst = gen_cdp(Shape::OneD(n), 2, 9).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        let zt: DVector<Complex<f64>> = DVector::from_iterator(
            n,
            (0..n).map(|i| Complex::new(truth.block(i)[0], truth.block(i)[1])),
        );
        // unitary DFT matrix
        let f = DMatrix::from_fn(n, n, |r, c| {
            let ang = -std::f64::consts::TAU * (r * c) as f64 / n as f64;
            Complex::new(ang.cos(), ang.sin()) / (n as f64).sqrt()
        });
        for set in inst.problem.sets() {
            let (map, radii) = match set {
                ConstraintSet::Amplitude { map, radii } => (map, radii),
                _ => unreachable!(),
            };
            let mask = match &map.modifier {
                Modifier::PointwiseMask(m) => m,
                _ => unreachable!(),
            };
            let p = DMatrix::from_fn(n, n, |r, c| {
                if r == c {
                    Complex::new(mask.block(r)[0], mask.block(r)[1])
                } else {
                    Complex::new(0.0, 0.0)
                }
            });
            let image = &f * (&p * &zt);
            for i in 0..n {
                assert!((image[i].norm() - radii[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cdp_masks_unit_modulus_and_deterministic() {
        let a = gen_cdp(Shape::OneD(32), 4, 17).unwrap();
        let b = gen_cdp(Shape::OneD(32), 4, 17).unwrap();
        assert_eq!(a, b);
        for set in a.problem.sets() {
            if let ConstraintSet::Amplitude { map, .. } = set {
                if let Modifier::PointwiseMask(mask) = &map.modifier {
                    for i in 0..mask.len() {
                        assert!((mask.block_norm(i) - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
        let c = gen_cdp(Shape::OneD(32), 4, 18).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn octanary_masks_use_modulated_alphabet() {
        let inst = gen_cdp_with(Shape::OneD(64), 2, 3, MaskAlphabet::Octanary).unwrap();
        let (mut low, mut high) = (0usize, 0usize);
        for set in inst.problem.sets() {
            if let ConstraintSet::Amplitude { map, .. } = set {
                if let Modifier::PointwiseMask(mask) = &map.modifier {
                    for i in 0..mask.len() {
                        let theta = mask.block(i)[1].atan2(mask.block(i)[0]);
                        let steps = theta / std::f64::consts::FRAC_PI_2;
                        assert!((steps - steps.round()).abs() < 1e-12);
                        let r = mask.block_norm(i);
                        if (r - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-12 {
                            low += 1;
                        } else {
                            assert!((r - 3.0_f64.sqrt()).abs() < 1e-12);
                            high += 1;
                        }
                    }
                }
            }
        }
        assert!(low > high);
    }

    #[test]
    fn sparse_dots_truth_in_both_sets() {
        let inst = gen_sparse_dots(32, 32, 2, 4).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        let total: f64 = inst
            .problem
            .sets()
            .iter()
            .map(|s| s.distance(truth).unwrap())
            .sum();
        assert!(total < 1e-10, "residual {total}");
    }

    #[test]
    fn sparse_dots_sparsity_overestimates_support() {
        let inst = gen_sparse_dots(32, 32, 1, 11).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        let nnz = (0..truth.len())
            .filter(|&i| truth.block_norm(i) > 0.0)
            .count();
        assert!(nnz > 0);
        match &inst.problem.sets()[0] {
            ConstraintSet::SparseNonnegCone { s, .. } => {
                assert!(*s >= nnz);
                assert!(*s as f64 >= 1.2 * nnz as f64 - 1.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn sparse_dots_b_matches_dense_dft_oracle() {
        use nalgebra::{Complex, DMatrix, DVector};
        // small grid keeps the dense oracle tractable
        let (h, w) = (16, 16);
        let inst = gen_sparse_dots(h, w, 2, 6).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        let n = h * w;
        let zt: DVector<Complex<f64>> = DVector::from_iterator(
            n,
            (0..n).map(|i| Complex::new(truth.block(i)[0], truth.block(i)[1])),
        );
        // 2-D unitary DFT as the Kronecker action on row-major data
        let f1 = |n: usize| {
            DMatrix::from_fn(n, n, |r, c| {
                let ang = -std::f64::consts::TAU * (r * c) as f64 / n as f64;
                Complex::new(ang.cos(), ang.sin()) / (n as f64).sqrt()
            })
        };
        let (fh, fw) = (f1(h), f1(w));
        let big = DMatrix::from_fn(n, n, |r, c| {
            let (ry, rx) = (r / w, r % w);
            let (cy, cx) = (c / w, c % w);
            fh[(ry, cy)] * fw[(rx, cx)]
        });
        let image = &big * zt;
        let radii = match &inst.problem.sets()[1] {
            ConstraintSet::Amplitude { radii, .. } => radii,
            _ => unreachable!(),
        };
        for i in 0..n {
            assert!(
                (image[i].norm() - radii[i]).abs() < 1e-10,
                "bin {i}: {} vs {}",
                image[i].norm(),
                radii[i]
            );
        }
    }

    #[test]
    fn sparse_dots_rejects_overfull_grid() {
        assert!(gen_sparse_dots(16, 16, 50, 1).is_err());
    }

    #[test]
    fn srcloc_truth_on_all_circles() {
        let inst = gen_srcloc(3, false, 2).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        for set in inst.problem.sets() {
            assert!(set.distance(truth).unwrap() < 1e-12);
        }
    }

    #[test]
    fn srcloc_trilateration_oracle_recovers_truth() {
        use nalgebra::{Matrix2, Vector2};
        let inst = gen_srcloc(3, false, 23).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        let mut sensors = Vec::new();
        let mut radii = Vec::new();
        for set in inst.problem.sets() {
            if let ConstraintSet::Amplitude { map, radii: r } = set {
                if let Modifier::Translate(a) = &map.modifier {
                    sensors.push([a[0], a[1]]);
                    radii.push(r[0]);
                }
            }
        }
        // subtracting sphere equations pairwise gives a linear system
        let row = |i: usize| {
            [
                2.0 * (sensors[i][0] - sensors[0][0]),
                2.0 * (sensors[i][1] - sensors[0][1]),
            ]
        };
        let rhs = |i: usize| {
            radii[0] * radii[0] - radii[i] * radii[i]
                + sensors[i][0] * sensors[i][0] - sensors[0][0] * sensors[0][0]
                + sensors[i][1] * sensors[i][1] - sensors[0][1] * sensors[0][1]
        };
        let a = Matrix2::new(row(1)[0], row(1)[1], row(2)[0], row(2)[1]);
        let b = Vector2::new(rhs(1), rhs(2));
        let x = a.lu().solve(&b).unwrap();
        assert!((x[0] - truth.data()[0]).abs() < 1e-9);
        assert!((x[1] - truth.data()[1]).abs() < 1e-9);
    }

    #[test]
    fn srcloc_noiseless_objective_minimized_at_truth() {
        let inst = gen_srcloc(5, false, 31).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        let f = |x: f64, y: f64| {
            let z = Signal::new(2, Shape::Scalar, vec![x, y]).unwrap();
            inst.problem.sq_dist_objective(&z).unwrap()
        };
        let f_truth = f(truth.data()[0], truth.data()[1]);
        assert!(f_truth < 1e-20);
        for i in 0..100 {
            for j in 0..100 {
                let v = f(i as f64 + 0.5, j as f64 + 0.5);
                assert!(v >= f_truth - 1e-12);
            }
        }
    }

    #[test]
    fn srcloc_noise_displaces_sensors_by_about_three_units() {
        let mut total = 0.0;
        let mut count = 0;
        for seed in 0..40 {
            let clean = gen_srcloc(10, false, seed).unwrap();
            let noisy = gen_srcloc(10, true, seed).unwrap();
            let sensor_of = |inst: &Instance, j: usize| match &inst.problem.sets()[j] {
                ConstraintSet::Amplitude { map, .. } => match &map.modifier {
                    Modifier::Translate(a) => [a[0], a[1]],
                    _ => unreachable!(),
                },
                _ => unreachable!(),
            };
            for j in 0..10 {
                let a = sensor_of(&clean, j);
                let b = sensor_of(&noisy, j);
                total += (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
                count += 1;
            }
            // truth and exact ranges are unchanged by the noise model
            assert_eq!(clean.truth, noisy.truth);
        }
        let rms = (total / count as f64).sqrt();
        assert!((rms - 3.0).abs() < 0.5, "rms displacement {rms}");
    }

    #[test]
    fn prb1_round_trip_is_exact() {
        for inst in [
            gen_cdp(Shape::OneD(8), 2, 7).unwrap(),
            gen_cdp(Shape::TwoD(4, 4), 3, 8).unwrap(),
            gen_sparse_dots(16, 16, 1, 9).unwrap(),
            gen_srcloc(4, true, 10).unwrap(),
        ] {
            let bytes = to_prb1_bytes(&inst).unwrap();
            let back = from_prb1_bytes(&bytes).unwrap();
            assert_eq!(inst, back);
        }
    }

    #[test]
    fn prb1_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cdp.prb1");
        let inst = gen_cdp(Shape::OneD(8), 2, 7).unwrap();
        save_dataset(&inst, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), inst);
    }

    #[test]
    fn prb1_rejects_corruption() {
        let inst = gen_cdp(Shape::OneD(8), 2, 7).unwrap();
        let bytes = to_prb1_bytes(&inst).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            from_prb1_bytes(&bad_magic),
            Err(Error::DatasetFormat(_))
        ));

        let truncated = &bytes[..20];
        let err = from_prb1_bytes(truncated).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(from_prb1_bytes(&bad_version).is_err());
    }

    #[test]
    fn prb1_minimal_file_gets_default_dft_maps() {
        // core sections only, no extension
        let inst = gen_cdp(Shape::OneD(4), 2, 3).unwrap();
        let bytes = to_prb1_bytes(&inst).unwrap();
        let ext_at = bytes
            .windows(4)
            .position(|w| w == EXT_MARKER)
            .unwrap();
        let minimal = &bytes[..ext_at];
        let loaded = from_prb1_bytes(minimal).unwrap();
        assert_eq!(loaded.meta.family, ProblemFamily::File);
        assert_eq!(loaded.problem.sets().len(), 2);
        for set in loaded.problem.sets() {
            match set {
                ConstraintSet::Amplitude { map, .. } => {
                    assert_eq!(map.transform, Transform::Dft1D);
                    assert_eq!(map.modifier, Modifier::None);
                }
                _ => unreachable!(),
            }
        }
        assert!(loaded.truth.is_some());
    }

    #[test]
    fn success_accepts_truth_for_every_family() {
        for inst in [
            gen_cdp(Shape::OneD(8), 2, 1).unwrap(),
            gen_cdp(Shape::TwoD(4, 4), 2, 1).unwrap(),
            gen_sparse_dots(16, 16, 1, 1).unwrap(),
            gen_srcloc(3, false, 1).unwrap(),
        ] {
            let truth = inst.truth.clone().unwrap();
            let crit = SuccessCriteria::default_for(&inst);
            assert!(success(&inst, &truth, &crit).unwrap(), "{:?}", inst.meta);
        }
    }

    #[test]
    fn success_is_phase_invariant_for_cdp() {
        let inst = gen_cdp(Shape::OneD(8), 2, 2).unwrap();
        let rotated =
            rotate_phase(inst.truth.as_ref().unwrap(), std::f64::consts::FRAC_PI_4).unwrap();
        let crit = SuccessCriteria::default_for(&inst);
        assert!(success(&inst, &rotated, &crit).unwrap());
    }

    #[test]
    fn success_missing_truth_errors() {
        let mut inst = gen_cdp(Shape::OneD(8), 2, 2).unwrap();
        inst.truth = None;
        let crit = SuccessCriteria::default_for(&inst);
        assert!(matches!(
            success(&inst, &Signal::zeros(2, Shape::OneD(8)), &crit),
            Err(Error::MissingTruth)
        ));
    }

    fn cyclic_shift_amp(inst: &Instance, sy: usize, sx: usize) -> Signal {
        let truth = inst.truth.as_ref().unwrap();
        let (h, w) = match inst.problem.shape() {
            Shape::TwoD(h, w) => (h, w),
            _ => unreachable!(),
        };
        let mut out = Signal::zeros(2, inst.problem.shape());
        for r in 0..h {
            for c in 0..w {
                let src = truth.block(r * w + c).to_vec();
                let dst = out.block_mut(((r + h - sy) % h) * w + (c + w - sx) % w);
                dst.copy_from_slice(&src);
            }
        }
        out
    }

    #[test]
    fn sparse_success_accepts_cyclic_shifts_and_reflection() {
        let inst = gen_sparse_dots(16, 16, 2, 13).unwrap();
        let crit = SuccessCriteria::default_for(&inst);
        let shifted = cyclic_shift_amp(&inst, 3, 5);
        assert!(success(&inst, &shifted, &crit).unwrap());
        // point reflection of the truth
        let truth = inst.truth.as_ref().unwrap();
        let amp = amplitudes(truth);
        let refl = reflect_grid(&amp, 16, 16);
        let refl_sig =
            Signal::new(2, inst.problem.shape(), refl.iter().flat_map(|&v| [v, 0.0]).collect())
                .unwrap();
        assert!(success(&inst, &refl_sig, &crit).unwrap());
    }

    #[test]
    fn sparse_success_rejects_wrong_support() {
        let inst = gen_sparse_dots(16, 16, 2, 13).unwrap();
        let crit = SuccessCriteria::default_for(&inst);
        let mut wrong = inst.truth.clone().unwrap();
        // move mass to a pixel outside the support
        let truth = inst.truth.as_ref().unwrap();
        let empty = (0..truth.len())
            .find(|&i| truth.block_norm(i) == 0.0)
            .unwrap();
        wrong.block_mut(empty)[0] = 1.0;
        assert!(!success(&inst, &wrong, &crit).unwrap());
    }

    #[test]
    fn sparse_alignment_matches_exhaustive_oracle() {
        let inst = gen_sparse_dots(16, 16, 2, 21).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        let (h, w) = (16, 16);
        let crit = SuccessCriteria::default_for(&inst);
        for &(sy, sx) in &[(0usize, 0usize), (3, 5), (10, 1), (7, 7)] {
            let z = cyclic_shift_amp(&inst, sy, sx);
            let fast = truth_distance(&inst, &z, &crit).unwrap();
            // exhaustive: minimum L-inf error over all shifts and the
            // reflection, with the support constraint
            let t_amp = amplitudes(truth);
            let t_supp = support_of(&t_amp);
            let z_amp = amplitudes(&z);
            let mut best = f64::INFINITY;
            for refl in [false, true] {
                let a = if refl {
                    reflect_grid(&z_amp, h, w)
                } else {
                    z_amp.clone()
                };
                let a_supp = support_of(&a);
                for ty in 0..h {
                    for tx in 0..w {
                        let mut ok = true;
                        let mut err = 0.0f64;
                        for r in 0..h {
                            for c in 0..w {
                                let src = ((r + ty) % h) * w + (c + tx) % w;
                                if a_supp[src] != t_supp[r * w + c] {
                                    ok = false;
                                }
                                err = err.max((a[src] - t_amp[r * w + c]).abs());
                            }
                        }
                        if ok {
                            best = best.min(err);
                        }
                    }
                }
            }
            assert!(
                (fast - best).abs() < 1e-12 || (fast.is_infinite() && best.is_infinite()),
                "shift ({sy},{sx}): fast {fast} oracle {best}"
            );
            assert!(fast < 1e-12);
        }
    }
}
