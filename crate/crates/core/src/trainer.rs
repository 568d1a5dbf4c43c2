//! Training loop: alternate between solving the SVDD on the projected data
//! and taking a signed gradient step on every projection matrix, followed by
//! QR re-orthonormalization.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{MultimodalDataset, MultimodalInstance};
use crate::error::{invalid, shape, Error, Result};
use crate::graphs;
use crate::linalg::{self, row_major_vec};
use crate::npt::{self, NptModel};
use crate::preprocessing::Preprocessor;
use crate::regularizers::{self, Operands, Regularizer};
use crate::svdd::{self, SvddSolution};

pub const SCHEMA_VERSION: u32 = 1;

/// Early stop once no projection entry moves more than this in one iteration.
pub const STEP_TOL: f64 = 1e-8;

/// Direction of the gradient step for one modality. `Minus` descends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }

    /// All `2^m` sign vectors, `(-, ..., -)` first, last modality fastest.
    pub fn combinations(m: usize) -> Vec<Vec<Sign>> {
        (0..1usize << m)
            .map(|bits| {
                (0..m)
                    .map(|i| {
                        if bits >> (m - 1 - i) & 1 == 1 {
                            Sign::Plus
                        } else {
                            Sign::Minus
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Sign::Minus),
            1 => Ok(Sign::Plus),
            other => Err(format!("sign must be -1 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub beta: f64,
    pub eta: f64,
    pub sigma: f64,
    pub k: usize,
    pub regularizer: Regularizer,
    /// One sign per modality. Empty means all `Minus`.
    pub signs: Vec<Sign>,
    pub use_npt: bool,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 2,
            c: 0.1,
            beta: 1.0,
            eta: 0.1,
            sigma: 10.0,
            k: 3,
            regularizer: Regularizer::new(0).expect("0 is a valid id"),
            signs: Vec::new(),
            use_npt: false,
            max_iter: 100,
            seed: 0,
        }
    }
}

impl ModelConfig {
    fn validate(&self, m: usize) -> Result<Vec<Sign>> {
        if self.d == 0 {
            return invalid("subspace dimension d must be at least 1");
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return invalid(format!("C must be in (0, 1], got {}", self.c));
        }
        if !(self.eta > 0.0) {
            return invalid(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.beta >= 0.0) {
            return invalid(format!("beta must be nonnegative, got {}", self.beta));
        }
        if self.use_npt && !(self.sigma > 0.0) {
            return invalid(format!("sigma must be positive with NPT, got {}", self.sigma));
        }
        match self.signs.len() {
            0 => Ok(vec![Sign::Minus; m]),
            n if n == m => Ok(self.signs.clone()),
            n => invalid(format!("{n} signs given for {m} modalities")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub omega: f64,
    pub radius: f64,
    /// Largest entry change of any projection matrix in this iteration.
    pub max_step: f64,
    /// Largest `|Q Q^T - I|` entry over modalities after QR.
    pub orthonormality_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_train: usize,
    pub iterations_run: usize,
    pub final_omega: f64,
    pub history: Vec<IterationRecord>,
}

/// What an observer sees after each iteration.
pub struct IterationState<'a> {
    pub record: &'a IterationRecord,
    /// `Q_m + s_m eta dL_m` before orthonormalization.
    pub pre_qr: &'a [DMatrix<f64>],
    pub projections: &'a [DMatrix<f64>],
    pub gradients: &'a [DMatrix<f64>],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub schema_version: u32,
    pub config: ModelConfig,
    /// `Q_m`, each `d x D_m` (effective input dimension) with orthonormal rows.
    #[serde(with = "row_major_vec")]
    pub projections: Vec<DMatrix<f64>>,
    pub solution: SvddSolution,
    pub npt: Option<Vec<NptModel>>,
    pub preprocessing: Option<Preprocessor>,
    pub meta: TrainingMeta,
}

/// Gradient of the Lagrangian with respect to `Q_m`:
/// `2 Q_m X_m diag(a_m) X_m^T - 2 center (X_m a_m)^T + beta * dOmega_m`.
pub fn lagrangian_gradient(
    reg: Regularizer,
    beta: f64,
    m: usize,
    ops: &Operands,
    center: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let x = &ops.x[m];
    let alpha_m = ops.alpha.row(m).transpose();
    let mut weighted = x.clone();
    for (mut col, a) in weighted.column_iter_mut().zip(alpha_m.iter()) {
        col *= *a;
    }
    let mut grad = &ops.q[m] * (weighted * x.transpose()) * 2.0;
    grad -= center * (x * &alpha_m).transpose() * 2.0;
    if beta != 0.0 && reg.id() != 0 {
        grad += regularizers::omega_gradient(reg, m, ops)? * beta;
    }
    Ok(grad)
}

/// Top-`d` principal directions of the columns of `x`, as rows.
pub fn principal_directions(x: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let n = x.ncols().max(1);
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = &centered * centered.transpose() / n as f64;
    let (_, vecs) = linalg::sym_eigen_desc(&cov);
    vecs.columns(0, d).transpose()
}

fn concat_projected(q: &[DMatrix<f64>], x: &[DMatrix<f64>]) -> DMatrix<f64> {
    let blocks: Vec<DMatrix<f64>> = q.iter().zip(x).map(|(q, x)| q * x).collect();
    let d = blocks[0].nrows();
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut y = DMatrix::zeros(d, total);
    let mut off = 0;
    for b in &blocks {
        y.columns_mut(off, b.ncols()).copy_from(b);
        off += b.ncols();
    }
    y
}

fn alpha_matrix(alpha: &[f64], m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(m, n, alpha)
}

pub fn train(dataset: &MultimodalDataset, config: &ModelConfig) -> Result<TrainedModel> {
    train_observed(dataset, config, |_| {})
}

/// Train on target-class instances, calling `observer` after every iteration.
pub fn train_observed(
    dataset: &MultimodalDataset,
    config: &ModelConfig,
    mut observer: impl FnMut(&IterationState),
) -> Result<TrainedModel> {
    if dataset.instances().iter().any(|i| !i.label.is_target()) {
        return invalid("training data must contain target-class instances only");
    }
    let m_count = dataset.n_modalities();
    let n = dataset.len();
    let signs = config.validate(m_count)?;
    let min_c = 1.0 / (m_count * n) as f64;
    if config.c < min_c * (1.0 - 1e-12) {
        return Err(Error::InfeasibleC {
            c: config.c,
            min: min_c,
        });
    }

    let raw = dataset.modality_matrices();
    let (x, npt_models) = if config.use_npt {
        let models = raw
            .iter()
            .map(|xm| npt::fit_npt(xm, config.sigma))
            .collect::<Result<Vec<_>>>()?;
        let phis = models.iter().map(|mdl| mdl.phi_train.clone()).collect();
        (phis, Some(models))
    } else {
        (raw, None)
    };
    let min_dim = x.iter().map(|xm| xm.nrows()).min().unwrap_or(0);
    if config.d > min_dim {
        return invalid(format!(
            "subspace dimension {} exceeds the smallest modality dimension {min_dim}",
            config.d
        ));
    }

    let reg = config.regularizer;
    let laplacians: Vec<DMatrix<f64>> = match reg.graph() {
        Some(kind) => x
            .iter()
            .enumerate()
            .map(|(m, xm)| {
                graphs::build_laplacian(kind, xm, config.k, config.seed.wrapping_add(m as u64))
                    .map(|l| l.matrix)
            })
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };

    let mut q: Vec<DMatrix<f64>> = x
        .iter()
        .map(|xm| principal_directions(xm, config.d))
        .collect();
    let mut history = Vec::new();

    for iteration in 0..config.max_iter {
        let y = concat_projected(&q, &x);
        let sol = svdd::solve_svdd(&y, config.c)?;
        let alpha = alpha_matrix(&sol.alpha, m_count, n);
        let center = DVector::from_column_slice(&sol.center);
        let ops = Operands {
            q: &q,
            x: &x,
            alpha: &alpha,
            c: sol.c,
            laplacians: &laplacians,
        };
        let omega = regularizers::omega_value(reg, &ops)?;
        let gradients = (0..m_count)
            .map(|m| lagrangian_gradient(reg, config.beta, m, &ops, &center))
            .collect::<Result<Vec<_>>>()?;
        let pre_qr: Vec<DMatrix<f64>> = q
            .iter()
            .zip(&gradients)
            .zip(&signs)
            .map(|((qm, g), s)| qm + g * (s.value() * config.eta))
            .collect();
        let next: Vec<DMatrix<f64>> = pre_qr.iter().map(linalg::orthonormalize_rows).collect();
        let max_step = next
            .iter()
            .zip(&q)
            .map(|(a, b)| linalg::max_abs_diff(a, b))
            .fold(0.0, f64::max);
        let orthonormality_error = next
            .iter()
            .map(linalg::orthonormality_error)
            .fold(0.0, f64::max);
        q = next;
        let record = IterationRecord {
            iteration,
            omega,
            radius: sol.radius,
            max_step,
            orthonormality_error,
        };
        observer(&IterationState {
            record: &record,
            pre_qr: &pre_qr,
            projections: &q,
            gradients: &gradients,
        });
        history.push(record);
        if max_step < STEP_TOL {
            break;
        }
    }

    let y = concat_projected(&q, &x);
    let solution = svdd::solve_svdd(&y, config.c)?;
    let alpha = alpha_matrix(&solution.alpha, m_count, n);
    let final_omega = regularizers::omega_value(
        reg,
        &Operands {
            q: &q,
            x: &x,
            alpha: &alpha,
            c: solution.c,
            laplacians: &laplacians,
        },
    )?;

    let mut stored = config.clone();
    stored.signs = signs;
    Ok(TrainedModel {
        schema_version: SCHEMA_VERSION,
        config: stored,
        projections: q,
        solution,
        npt: npt_models,
        preprocessing: None,
        meta: TrainingMeta {
            n_train: n,
            iterations_run: history.len(),
            final_omega,
            history,
        },
    })
}

impl TrainedModel {
    pub fn n_modalities(&self) -> usize {
        self.projections.len()
    }

    pub fn with_preprocessing(mut self, pre: Preprocessor) -> Self {
        self.preprocessing = Some(pre);
        self
    }

    /// Input dimension expected by [`TrainedModel::project_features`].
    pub fn feature_dims(&self) -> Vec<usize> {
        match &self.npt {
            Some(models) => models.iter().map(|m| m.train_inputs.nrows()).collect(),
            None => self.projections.iter().map(|q| q.ncols()).collect(),
        }
    }

    /// Project already-preprocessed modality vectors: optional NPT map, then Q_m.
    pub fn project_features(&self, vectors: &[Vec<f64>]) -> Result<Vec<DVector<f64>>> {
        if vectors.len() != self.n_modalities() {
            return shape(format!(
                "{} modalities given, model has {}",
                vectors.len(),
                self.n_modalities()
            ));
        }
        let dims = self.feature_dims();
        vectors
            .iter()
            .enumerate()
            .map(|(m, v)| {
                if v.len() != dims[m] {
                    return shape(format!(
                        "modality {m}: expected {} features, got {}",
                        dims[m],
                        v.len()
                    ));
                }
                let x = DVector::from_column_slice(v);
                let x = match &self.npt {
                    Some(models) => {
                        let mapped = npt::map_test(&models[m], &DMatrix::from_column_slice(v.len(), 1, v))?;
                        mapped.column(0).into_owned()
                    }
                    None => x,
                };
                Ok(&self.projections[m] * x)
            })
            .collect()
    }

    /// Full chain for a raw window: PCA and standard scores when the model
    /// carries a preprocessor, then NPT and Q_m.
    pub fn project(&self, instance: &MultimodalInstance) -> Result<Vec<DVector<f64>>> {
        match &self.preprocessing {
            Some(pre) => self.project_features(&pre.transform_vectors(&instance.vectors_per_modality)?),
            None => self.project_features(&instance.vectors_per_modality),
        }
    }

    /// Project a preprocessed dataset; returns one `d x P` matrix per modality.
    pub fn project_dataset(&self, ds: &MultimodalDataset) -> Result<Vec<DMatrix<f64>>> {
        if ds.n_modalities() != self.n_modalities() {
            return shape("dataset and model disagree on the modality count");
        }
        let dims = self.feature_dims();
        (0..self.n_modalities())
            .map(|m| {
                let xm = ds.modality_matrix(m);
                if xm.nrows() != dims[m] {
                    return shape(format!(
                        "modality {m}: expected {} features, got {}",
                        dims[m],
                        xm.nrows()
                    ));
                }
                let xm = match &self.npt {
                    Some(models) => npt::map_test(&models[m], &xm)?,
                    None => xm,
                };
                Ok(&self.projections[m] * xm)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(s)?;
        if model.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "unsupported model schema version {} (expected {SCHEMA_VERSION})",
                model.schema_version
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
