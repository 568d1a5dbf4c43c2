//! Per-modality sphere membership and Boolean decision fusion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{MultimodalDataset, MultimodalInstance};
use crate::error::{invalid, shape, Error, Result};
use crate::svdd;
use crate::trainer::TrainedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DecisionStrategy {
    And,
    Or,
    /// Trust a single modality.
    Uni(usize),
}

impl DecisionStrategy {
    /// AND, OR, then UNI_0..UNI_{M-1}.
    pub fn all(m: usize) -> Vec<DecisionStrategy> {
        let mut out = vec![DecisionStrategy::And, DecisionStrategy::Or];
        out.extend((0..m).map(DecisionStrategy::Uni));
        out
    }

    pub fn validate(self, m: usize) -> Result<Self> {
        match self {
            DecisionStrategy::Uni(i) if i >= m => {
                invalid(format!("strategy uni{i} needs at least {} modalities", i + 1))
            }
            s => Ok(s),
        }
    }
}

impl fmt::Display for DecisionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecisionStrategy::And => write!(f, "and"),
            DecisionStrategy::Or => write!(f, "or"),
            DecisionStrategy::Uni(m) => write!(f, "uni{m}"),
        }
    }
}

impl FromStr for DecisionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "and" => Ok(DecisionStrategy::And),
            "or" => Ok(DecisionStrategy::Or),
            _ => lower
                .strip_prefix("uni")
                .and_then(|rest| rest.parse().ok())
                .map(DecisionStrategy::Uni)
                .ok_or_else(|| Error::InvalidInput(format!("unknown decision strategy '{s}'"))),
        }
    }
}

impl From<DecisionStrategy> for String {
    fn from(s: DecisionStrategy) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for DecisionStrategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Fuse per-modality verdicts.
pub fn fuse(p: &[bool], strategy: DecisionStrategy) -> bool {
    match strategy {
        DecisionStrategy::And => p.iter().all(|&x| x),
        DecisionStrategy::Or => p.iter().any(|&x| x),
        DecisionStrategy::Uni(m) => p.get(m).copied().unwrap_or(false),
    }
}

/// Inside-sphere verdict for each already-projected modality vector. The
/// boundary counts as inside.
pub fn verdicts(model: &TrainedModel, projected: &[nalgebra::DVector<f64>]) -> Result<Vec<bool>> {
    projected
        .iter()
        .map(|y| svdd::score(&model.solution, y.as_slice()).map(|s| s <= 0.0))
        .collect()
}

/// Classify a raw window (full preprocessing chain when the model has one).
pub fn classify_modalities(model: &TrainedModel, instance: &MultimodalInstance) -> Result<Vec<bool>> {
    verdicts(model, &model.project(instance)?)
}

/// Classify already-preprocessed modality vectors.
pub fn classify_features(model: &TrainedModel, vectors: &[Vec<f64>]) -> Result<Vec<bool>> {
    verdicts(model, &model.project_features(vectors)?)
}

/// Per-instance verdicts for a preprocessed dataset, computed in one batch.
pub fn classify_dataset(model: &TrainedModel, ds: &MultimodalDataset) -> Result<Vec<Vec<bool>>> {
    let projected = model.project_dataset(ds)?;
    let p = ds.len();
    (0..p)
        .map(|i| {
            projected
                .iter()
                .map(|ym| svdd::score(&model.solution, ym.column(i).as_slice()).map(|s| s <= 0.0))
                .collect()
        })
        .collect()
}

/// One row of the batch prediction CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub instance_id: String,
    pub per_modality: Vec<bool>,
    pub fused: bool,
    pub label: bool,
}

pub fn prediction_rows(
    model: &TrainedModel,
    ds: &MultimodalDataset,
    strategy: DecisionStrategy,
) -> Result<Vec<PredictionRow>> {
    let strategy = strategy.validate(ds.n_modalities())?;
    let verdicts = classify_dataset(model, ds)?;
    Ok(ds
        .instances()
        .iter()
        .zip(verdicts)
        .enumerate()
        .map(|(i, (inst, p))| PredictionRow {
            instance_id: format!("{}#{i}", inst.source_event),
            fused: fuse(&p, strategy),
            per_modality: p,
            label: inst.label.is_target(),
        })
        .collect())
}

/// CSV with columns `instance_id, p_0..p_{M-1}, fused, label` (0/1 values).
pub fn write_predictions_csv<W: std::io::Write>(rows: &[PredictionRow], out: W) -> Result<()> {
    let m = rows.first().map_or(0, |r| r.per_modality.len());
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["instance_id".to_string()];
    header.extend((0..m).map(|i| format!("p_{i}")));
    header.push("fused".into());
    header.push("label".into());
    wtr.write_record(&header)?;
    let bit = |b: bool| if b { "1".to_string() } else { "0".to_string() };
    for r in rows {
        if r.per_modality.len() != m {
            return shape("prediction rows disagree on the modality count");
        }
        let mut rec = vec![r.instance_id.clone()];
        rec.extend(r.per_modality.iter().map(|&b| bit(b)));
        rec.push(bit(r.fused));
        rec.push(bit(r.label));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuse_examples() {
        assert!(fuse(&[true, true, true], DecisionStrategy::And));
        assert!(fuse(&[true, false, true], DecisionStrategy::Or));
        assert!(fuse(&[false, true, false], DecisionStrategy::Uni(1)));
        assert!(!fuse(&[true, false, true], DecisionStrategy::And));
        assert!(!fuse(&[false, false, false], DecisionStrategy::Or));
    }

    #[test]
    fn strategy_lattice_exhaustive() {
        for m in 1..=4usize {
            for bits in 0..1u32 << m {
                let p: Vec<bool> = (0..m).map(|i| bits >> i & 1 == 1).collect();
                for u in 0..m {
                    let uni = fuse(&p, DecisionStrategy::Uni(u));
                    if fuse(&p, DecisionStrategy::And) {
                        assert!(uni);
                    }
                    if uni {
                        assert!(fuse(&p, DecisionStrategy::Or));
                    }
                }
            }
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("AND".parse::<DecisionStrategy>().unwrap(), DecisionStrategy::And);
        assert_eq!("uni2".parse::<DecisionStrategy>().unwrap(), DecisionStrategy::Uni(2));
        assert!("xor".parse::<DecisionStrategy>().is_err());
        assert!(DecisionStrategy::Uni(3).validate(3).is_err());
        let all = DecisionStrategy::all(3);
        let names: Vec<String> = all.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["and", "or", "uni0", "uni1", "uni2"]);
        assert_eq!(serde_json::to_string(&DecisionStrategy::Uni(1)).unwrap(), "\"uni1\"");
    }

    #[test]
    fn csv_layout() {
        let rows = vec![PredictionRow {
            instance_id: "e#0".into(),
            per_modality: vec![true, false],
            fused: false,
            label: true,
        }];
        let mut buf = Vec::new();
        write_predictions_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "instance_id,p_0,p_1,fused,label\ne#0,1,0,0,1\n"
        );
    }
}
