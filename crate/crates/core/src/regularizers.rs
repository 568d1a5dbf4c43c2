//! The ten subspace regularizers and their gradients with respect to each
//! projection matrix.
//!
//! Ids 0-3 penalize `sum_m |Q_m X_m nu_m|^2`, ids 4-6 the crossed form
//! `|sum_m Q_m X_m nu_m|^2`, ids 7-9 the graph form
//! `sum_m tr(Q_m X_m L_m X_m^T Q_m^T)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::graphs::GraphKind;

/// Alphas at or above `C - OUTLIER_EPS` count as outliers.
const OUTLIER_EPS: f64 = 1e-12;

/// Which weights a nu-based regularizer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuKind {
    Zero,
    Ones,
    Alpha,
    /// `alpha` with outliers zeroed.
    Lambda,
}

/// Regularizer id in `0..=9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Regularizer(u8);

impl Regularizer {
    pub const ALL: [Regularizer; 10] = [
        Regularizer(0),
        Regularizer(1),
        Regularizer(2),
        Regularizer(3),
        Regularizer(4),
        Regularizer(5),
        Regularizer(6),
        Regularizer(7),
        Regularizer(8),
        Regularizer(9),
    ];

    pub fn new(id: u8) -> Result<Self> {
        if id > 9 {
            return invalid(format!("regularizer id must be 0..=9, got {id}"));
        }
        Ok(Self(id))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn nu_kind(self) -> Option<NuKind> {
        match self.0 {
            0 => Some(NuKind::Zero),
            1 | 4 => Some(NuKind::Ones),
            2 | 5 => Some(NuKind::Alpha),
            3 | 6 => Some(NuKind::Lambda),
            _ => None,
        }
    }

    pub fn is_crossed(self) -> bool {
        (4..=6).contains(&self.0)
    }

    pub fn graph(self) -> Option<GraphKind> {
        match self.0 {
            7 => Some(GraphKind::Knn),
            8 => Some(GraphKind::WithinCluster),
            9 => Some(GraphKind::BetweenCluster),
            _ => None,
        }
    }
}

impl From<Regularizer> for u8 {
    fn from(r: Regularizer) -> u8 {
        r.0
    }
}

impl TryFrom<u8> for Regularizer {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Regularizer::new(v).map_err(|e| e.to_string())
    }
}

impl std::fmt::Display for Regularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "w{}", self.0)
    }
}

/// Everything a regularizer reads. `alpha` is `M x N`, row `m` holding the
/// dual coefficients of modality `m`. `laplacians` is only read by ids 7-9.
#[derive(Debug, Clone, Copy)]
pub struct Operands<'a> {
    pub q: &'a [DMatrix<f64>],
    pub x: &'a [DMatrix<f64>],
    pub alpha: &'a DMatrix<f64>,
    pub c: f64,
    pub laplacians: &'a [DMatrix<f64>],
}

impl Operands<'_> {
    fn check(&self, reg: Regularizer) -> Result<()> {
        let m = self.q.len();
        if self.x.len() != m || self.alpha.nrows() != m {
            return shape(format!(
                "{} projections, {} inputs, {} alpha rows",
                m,
                self.x.len(),
                self.alpha.nrows()
            ));
        }
        let n = self.alpha.ncols();
        let d = self.q.first().map_or(0, |q| q.nrows());
        for (i, (q, x)) in self.q.iter().zip(self.x).enumerate() {
            if q.nrows() != d || q.ncols() != x.nrows() || x.ncols() != n {
                return shape(format!(
                    "modality {i}: Q is {:?}, X is {:?}, alpha has {n} columns",
                    q.shape(),
                    x.shape()
                ));
            }
        }
        if reg.graph().is_some() {
            if self.laplacians.len() != m {
                return shape(format!("{} laplacians for {m} modalities", self.laplacians.len()));
            }
            if self.laplacians.iter().any(|l| l.shape() != (n, n)) {
                return shape(format!("laplacians must be {n}x{n}"));
            }
        }
        Ok(())
    }

    fn nu(&self, reg: Regularizer, m: usize) -> Result<DVector<f64>> {
        build_nu(reg, &self.alpha.row(m).transpose(), self.c)
    }
}

/// Weight vector for nu-based regularizers.
pub fn build_nu(reg: Regularizer, alpha_m: &DVector<f64>, c: f64) -> Result<DVector<f64>> {
    let n = alpha_m.len();
    match reg.nu_kind() {
        None => Err(Error::WrongPath(reg.id())),
        Some(NuKind::Zero) => Ok(DVector::zeros(n)),
        Some(NuKind::Ones) => Ok(DVector::from_element(n, 1.0)),
        Some(NuKind::Alpha) => Ok(alpha_m.clone()),
        Some(NuKind::Lambda) => Ok(alpha_m.map(|a| if a >= c - OUTLIER_EPS { 0.0 } else { a })),
    }
}

/// Value of the regularizer (without the beta factor).
pub fn omega_value(reg: Regularizer, ops: &Operands) -> Result<f64> {
    ops.check(reg)?;
    let m_count = ops.q.len();
    if reg.id() == 0 {
        return Ok(0.0);
    }
    if reg.graph().is_some() {
        let mut total = 0.0;
        for m in 0..m_count {
            let p = &ops.q[m] * &ops.x[m];
            total += (&p * &ops.laplacians[m] * p.transpose()).trace();
        }
        return Ok(total);
    }
    let projected: Vec<DVector<f64>> = (0..m_count)
        .map(|m| Ok(&ops.q[m] * (&ops.x[m] * ops.nu(reg, m)?)))
        .collect::<Result<_>>()?;
    if reg.is_crossed() {
        let sum = projected
            .iter()
            .fold(DVector::zeros(projected[0].len()), |acc, v| acc + v);
        Ok(sum.norm_squared())
    } else {
        Ok(projected.iter().map(|v| v.norm_squared()).sum())
    }
}

/// Gradient of [`omega_value`] with respect to `Q_m`, holding alpha fixed.
pub fn omega_gradient(reg: Regularizer, m: usize, ops: &Operands) -> Result<DMatrix<f64>> {
    ops.check(reg)?;
    if m >= ops.q.len() {
        return shape(format!("modality {m} out of range"));
    }
    let (d, dm) = ops.q[m].shape();
    if reg.id() == 0 {
        return Ok(DMatrix::zeros(d, dm));
    }
    if reg.graph().is_some() {
        let p = &ops.q[m] * &ops.x[m];
        return Ok(p * &ops.laplacians[m] * ops.x[m].transpose() * 2.0);
    }
    let xnu_m = &ops.x[m] * ops.nu(reg, m)?;
    let left = if reg.is_crossed() {
        let mut sum = DVector::zeros(d);
        for n in 0..ops.q.len() {
            sum += &ops.q[n] * (&ops.x[n] * ops.nu(reg, n)?);
        }
        sum
    } else {
        &ops.q[m] * &xnu_m
    };
    Ok(left * xnu_m.transpose() * 2.0)
}
