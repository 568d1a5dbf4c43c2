//! Independent oracles and random-instance builders shared by the
//! integration tests and the acceptance run.
#![allow(dead_code)]

use grmssvdd::data::{assemble_dataset, Label, MultimodalDataset, MultimodalInstance};
use grmssvdd::graphs;
use grmssvdd::linalg::orthonormalize_rows;
use grmssvdd::regularizers::{self, Operands};
use grmssvdd::Regularizer;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
}

/// Owned version of [`Operands`] for random problems.
pub struct Problem {
    pub q: Vec<DMatrix<f64>>,
    pub x: Vec<DMatrix<f64>>,
    pub alpha: DMatrix<f64>,
    pub c: f64,
    pub laplacians: Vec<DMatrix<f64>>,
}

impl Problem {
    pub fn ops(&self) -> Operands<'_> {
        Operands {
            q: &self.q,
            x: &self.x,
            alpha: &self.alpha,
            c: self.c,
            laplacians: &self.laplacians,
        }
    }

    pub fn with_q(&self, q: Vec<DMatrix<f64>>) -> Problem {
        Problem {
            q,
            x: self.x.clone(),
            alpha: self.alpha.clone(),
            c: self.c,
            laplacians: self.laplacians.clone(),
        }
    }
}

/// Random instance with `m` modalities, `n` points, subspace `d`. Alpha lies in
/// the capped simplex with some entries pinned at `C` so lambda differs from alpha.
pub fn random_problem(rng: &mut ChaCha8Rng, reg: Regularizer, m: usize, n: usize, d: usize) -> Problem {
    let dims: Vec<usize> = (0..m).map(|_| rng.random_range(d.max(2)..=d + 4)).collect();
    let x: Vec<DMatrix<f64>> = dims.iter().map(|&dm| gaussian(rng, dm, n)).collect();
    let q: Vec<DMatrix<f64>> = dims.iter().map(|&dm| orthonormalize_rows(&gaussian(rng, d, dm))).collect();
    let total = m * n;
    let c = (2.0 / total as f64).max(0.2).min(1.0);
    let raw: Vec<f64> = (0..total).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut a = project_capped_simplex(&DVector::from_vec(raw), c);
    // pin one coordinate to the cap when there is room
    if c * 2.0 <= 1.0 {
        a = project_capped_simplex(&{
            let mut v = a.clone();
            v[0] += 10.0;
            v
        }, c);
    }
    let alpha = DMatrix::from_row_slice(m, n, a.as_slice());
    let laplacians = match reg.graph() {
        Some(kind) => x
            .iter()
            .enumerate()
            .map(|(i, xm)| graphs::build_laplacian(kind, xm, 1 + (n / 3).min(3), i as u64).unwrap().matrix)
            .collect(),
        None => Vec::new(),
    };
    Problem { q, x, alpha, c, laplacians }
}

/// Central finite differences of `omega_value` with respect to `Q_m`.
pub fn fd_gradient(reg: Regularizer, m: usize, p: &Problem) -> DMatrix<f64> {
    let (d, dm) = p.q[m].shape();
    let scale = p.q[m].amax().max(1.0);
    let h = 1e-6 * scale;
    DMatrix::from_fn(d, dm, |i, j| {
        let mut plus = p.q.clone();
        plus[m][(i, j)] += h;
        let mut minus = p.q.clone();
        minus[m][(i, j)] -= h;
        let fp = regularizers::omega_value(reg, &p.with_q(plus).ops()).unwrap();
        let fm = regularizers::omega_value(reg, &p.with_q(minus).ops()).unwrap();
        (fp - fm) / (2.0 * h)
    })
}

/// `|a - b| / max(|b|, floor)` in Frobenius norm.
pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}

/// Euclidean projection onto `{0 <= a <= c, sum a = 1}` by bisection on the shift.
pub fn project_capped_simplex(v: &DVector<f64>, c: f64) -> DVector<f64> {
    let mass = |tau: f64| v.iter().map(|x| (x - tau).clamp(0.0, c)).sum::<f64>();
    let mut lo = v.min() - c - 1.0;
    let mut hi = v.max() + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.map(|x| (x - tau).clamp(0.0, c))
}

/// SVDD dual `sum a_i K_ii - a^T K a`.
pub fn dual_value(k: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    k.diagonal().dot(a) - a.dot(&(k * a))
}

/// Dense QP oracle: accelerated projected gradient (FISTA with restarts)
/// on the negated dual over the capped simplex.
pub fn qp_oracle(y: &DMatrix<f64>, c: f64, iters: usize) -> DVector<f64> {
    let n = y.ncols();
    let k = y.transpose() * y;
    let lip = 2.0 * k.symmetric_eigenvalues().amax() + 1e-12;
    let grad = |a: &DVector<f64>| &k * a * 2.0 - k.diagonal();
    let f = |a: &DVector<f64>| -dual_value(&k, a);
    let mut x = project_capped_simplex(&DVector::from_element(n, 1.0 / n as f64), c);
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let next = project_capped_simplex(&(&z - grad(&z) / lip), c);
        if f(&next) > f(&x) {
            // restart momentum
            t = 1.0;
            z = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &x) * ((t - 1.0) / t_next);
        x = next;
        t = t_next;
    }
    x
}

pub fn instance(vectors: Vec<Vec<f64>>, label: Label, event: &str) -> MultimodalInstance {
    MultimodalInstance {
        label,
        end_time: 0.0,
        source_event: event.to_string(),
        vectors_per_modality: vectors,
    }
}

/// `n` target instances around the origin, `dims[m]` features per modality.
pub fn blob_dataset(rng: &mut ChaCha8Rng, dims: &[usize], n: usize, spread: f64) -> MultimodalDataset {
    let instances = (0..n)
        .map(|i| {
            let v = dims
                .iter()
                .map(|&dm| (0..dm).map(|_| spread * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect())
                .collect();
            instance(v, Label::Abnormal, &format!("e{i}"))
        })
        .collect();
    assemble_dataset(instances).unwrap()
}

/// One-channel event: 0 before `jump`, `level` from `jump` on, annotated
/// `[tau1_idx, tau2_idx]`, sampled every `dt`.
pub fn step_event(n: usize, dt: f64, jump: usize, level: f64, tau1_idx: usize, tau2_idx: usize) -> grmssvdd::EventSeries {
    let ts: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let ch = DMatrix::from_fn(1, n, |_, i| if i >= jump { level } else { 0.0 });
    grmssvdd::EventSeries::new("step", ts.clone(), ch, vec![0], ts[tau1_idx], ts[tau2_idx], None).unwrap()
}

/// Identity-projection model whose sphere is centered at `level` in every
/// coordinate of a `w`-sample window, with radius `radius`.
pub fn box_model(w: usize, level: f64, radius: f64) -> grmssvdd::TrainedModel {
    use grmssvdd::svdd::SvddSolution;
    use grmssvdd::trainer::{TrainingMeta, SCHEMA_VERSION};
    grmssvdd::TrainedModel {
        schema_version: SCHEMA_VERSION,
        config: grmssvdd::ModelConfig { d: w, ..grmssvdd::ModelConfig::default() },
        projections: vec![DMatrix::identity(w, w)],
        solution: SvddSolution {
            alpha: vec![1.0],
            center: vec![level; w],
            radius,
            c: 1.0,
            support: vec![0],
            boundary: vec![],
            iterations: 0,
            max_violation: 0.0,
        },
        npt: None,
        preprocessing: None,
        meta: TrainingMeta { n_train: 1, iterations_run: 0, final_omega: 0.0, history: vec![] },
    }
}

/// Per-feature z-score detector fitted on normal training windows; the
/// threshold sits halfway between the largest normal and the smallest
/// abnormal training score. Returns the gm on the test windows.
pub fn threshold_detector_gm(train: &MultimodalDataset, test: &MultimodalDataset) -> f64 {
    let flat = |i: &MultimodalInstance| -> Vec<f64> { i.vectors_per_modality.concat() };
    let normals: Vec<Vec<f64>> = train.instances().iter().filter(|i| !i.label.is_target()).map(flat).collect();
    let dim = normals[0].len();
    let mean: Vec<f64> = (0..dim).map(|j| normals.iter().map(|v| v[j]).sum::<f64>() / normals.len() as f64).collect();
    let sd: Vec<f64> = (0..dim)
        .map(|j| {
            let var = normals.iter().map(|v| (v[j] - mean[j]).powi(2)).sum::<f64>() / normals.len() as f64;
            var.sqrt().max(1e-12)
        })
        .collect();
    let score = |i: &MultimodalInstance| -> f64 {
        flat(i).iter().enumerate().map(|(j, x)| ((x - mean[j]) / sd[j]).abs()).sum::<f64>() / dim as f64
    };
    let max_normal = train.instances().iter().filter(|i| !i.label.is_target()).map(score).fold(f64::MIN, f64::max);
    let min_abnormal = train.instances().iter().filter(|i| i.label.is_target()).map(score).fold(f64::MAX, f64::min);
    let threshold = 0.5 * (max_normal + min_abnormal);
    let preds: Vec<bool> = test.instances().iter().map(|i| score(i) > threshold).collect();
    let labels: Vec<bool> = test.instances().iter().map(|i| i.label.is_target()).collect();
    grmssvdd::metrics::reliability_metrics(&preds, &labels).unwrap().gm
}
