//! Reliability metrics over fused predictions and the earliness harness.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::EventSeries;
use crate::error::{invalid, shape, Result};
use crate::inference::{self, DecisionStrategy};
use crate::preprocessing::{extract_rolling_instances, ExtractionMode, WindowSpec};
use crate::trainer::TrainedModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_tp: usize,
    pub n_tn: usize,
    pub n_fp: usize,
    pub n_fn: usize,
    pub acc: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub pre: f64,
    pub hm: f64,
    pub gm: f64,
    /// Set when one of the classes is absent from the labels.
    pub degenerate: bool,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn geometric_mean(tpr: f64, tnr: f64) -> f64 {
    (tpr * tnr).sqrt()
}

/// F1-style mean of precision and recall.
pub fn harmonic_mean(pre: f64, tpr: f64) -> f64 {
    if pre + tpr == 0.0 {
        0.0
    } else {
        2.0 * pre * tpr / (pre + tpr)
    }
}

/// Confusion counts and rates, with `true` meaning target (abnormal).
pub fn reliability_metrics(predictions: &[bool], labels: &[bool]) -> Result<EvaluationReport> {
    if predictions.len() != labels.len() {
        return shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        ));
    }
    let (mut tp, mut tn, mut fp, mut fneg) = (0, 0, 0, 0);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
        }
    }
    let tpr = ratio(tp, tp + fneg);
    let tnr = ratio(tn, tn + fp);
    let pre = ratio(tp, tp + fp);
    Ok(EvaluationReport {
        n_tp: tp,
        n_tn: tn,
        n_fp: fp,
        n_fn: fneg,
        acc: ratio(tp + tn, labels.len()),
        tpr,
        tnr,
        pre,
        hm: harmonic_mean(pre, tpr),
        gm: geometric_mean(tpr, tnr),
        degenerate: tp + fneg == 0 || tn + fp == 0,
    })
}

/// Aligned text table, columns acc, tpr, tnr, pre, hm, gm.
pub fn reliability_table(rows: &[(String, EvaluationReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(8);
    let mut out = format!(
        "{:<width$}  {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n",
        "strategy", "acc", "tpr", "tnr", "pre", "hm", "gm"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
            name, r.acc, r.tpr, r.tnr, r.pre, r.hm, r.gm
        );
    }
    out
}

/// Outcome of rolling one event through the detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDetection {
    pub event_id: String,
    pub tau1: f64,
    pub tau2: f64,
    /// End time of the first window fused as abnormal, if any.
    pub first_detection: Option<f64>,
}

impl EventDetection {
    pub fn is_true_trigger(&self) -> bool {
        self.first_detection
            .is_some_and(|t| self.tau1 <= t && t <= self.tau2)
    }

    pub fn delay(&self) -> Option<f64> {
        self.is_true_trigger()
            .then(|| self.first_detection.map(|t| t - self.tau1))
            .flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlinessReport {
    pub cct: f64,
    pub n_events: usize,
    pub n_false_triggers: usize,
    /// Mean delay over true triggers; absent when there are none.
    pub del: Option<f64>,
    pub ttr: f64,
    pub ftr: f64,
    pub earl: Option<f64>,
    pub events: Vec<EventDetection>,
}

/// Aggregate per-event detections. Missing detections count as false triggers.
pub fn earliness_from_detections(detections: Vec<EventDetection>, cct: f64) -> Result<EarlinessReport> {
    if !(cct > 0.0) {
        return invalid(format!("critical clearing time must be positive, got {cct}"));
    }
    if detections.is_empty() {
        return invalid("earliness needs at least one event");
    }
    let n_events = detections.len();
    let delays: Vec<f64> = detections.iter().filter_map(EventDetection::delay).collect();
    let n_false = n_events - delays.len();
    let ftr = n_false as f64 / n_events as f64;
    let del = (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64);
    Ok(EarlinessReport {
        cct,
        n_events,
        n_false_triggers: n_false,
        del,
        ttr: 1.0 - ftr,
        ftr,
        earl: del.map(|d| earliness(cct, d)),
        events: detections,
    })
}

/// `(cct - del) / cct`.
pub fn earliness(cct: f64, del: f64) -> f64 {
    (cct - del) / cct
}

/// First fused-abnormal window of `event`, scanning chronologically.
pub fn first_detection(
    model: &TrainedModel,
    strategy: DecisionStrategy,
    event: &EventSeries,
    spec: &WindowSpec,
) -> Result<Option<f64>> {
    let spec = WindowSpec {
        mode: ExtractionMode::Rolling,
        ..*spec
    };
    for inst in extract_rolling_instances(event, &spec)? {
        let p = inference::classify_modalities(model, &inst)?;
        if inference::fuse(&p, strategy) {
            return Ok(Some(inst.end_time));
        }
    }
    Ok(None)
}

/// Roll every event through the model and aggregate delays.
pub fn evaluate_earliness(
    model: &TrainedModel,
    strategy: DecisionStrategy,
    events: &[EventSeries],
    cct: f64,
    spec: &WindowSpec,
) -> Result<EarlinessReport> {
    if !(cct > 0.0) {
        return invalid(format!("critical clearing time must be positive, got {cct}"));
    }
    let strategy = strategy.validate(model.n_modalities())?;
    let detections = events
        .iter()
        .map(|ev| {
            Ok(EventDetection {
                event_id: ev.id().to_string(),
                tau1: ev.tau1(),
                tau2: ev.tau2(),
                first_detection: first_detection(model, strategy, ev, spec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    earliness_from_detections(detections, cct)
}
