//! Multimodal containers: annotated event series, windowed instances and
//! datasets, plus the on-disk event format (CSV samples + JSON sidecar).

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};

const TIMESTEP_JITTER: f64 = 1e-9;

/// An annotated multichannel time series with one event in `[tau1, tau2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    id: String,
    timestamps: Vec<f64>,
    /// `n_channels x n_timesteps`
    channels: DMatrix<f64>,
    modality_of_channel: Vec<usize>,
    tau1: f64,
    tau2: f64,
    event_class: Option<String>,
}

impl EventSeries {
    pub fn new(
        id: impl Into<String>,
        timestamps: Vec<f64>,
        channels: DMatrix<f64>,
        modality_of_channel: Vec<usize>,
        tau1: f64,
        tau2: f64,
        event_class: Option<String>,
    ) -> Result<Self> {
        let id = id.into();
        let n = timestamps.len();
        if n == 0 {
            return invalid(format!("event {id}: empty time series"));
        }
        if channels.ncols() != n {
            return shape(format!(
                "event {id}: {} timestamps but {} samples per channel",
                n,
                channels.ncols()
            ));
        }
        if channels.nrows() == 0 || channels.nrows() != modality_of_channel.len() {
            return shape(format!(
                "event {id}: {} channels but {} modality assignments",
                channels.nrows(),
                modality_of_channel.len()
            ));
        }
        if n > 1 {
            let dt = (timestamps[n - 1] - timestamps[0]) / (n - 1) as f64;
            if !(dt > 0.0) {
                return invalid(format!("event {id}: timestamps must be strictly increasing"));
            }
            for w in timestamps.windows(2) {
                let step = w[1] - w[0];
                if !(step > 0.0) || ((step - dt) / dt).abs() >= TIMESTEP_JITTER {
                    return invalid(format!("event {id}: timestamps are not uniformly spaced"));
                }
            }
        }
        let last = timestamps[n - 1];
        if !(0.0 <= tau1 && tau1 <= tau2 && tau2 <= last) {
            return invalid(format!(
                "event {id}: need 0 <= tau1 <= tau2 <= last timestamp, got tau1={tau1}, tau2={tau2}, last={last}"
            ));
        }
        let m = modality_of_channel.iter().max().map_or(0, |&x| x + 1);
        for modality in 0..m {
            if !modality_of_channel.contains(&modality) {
                return invalid(format!("event {id}: modality {modality} has no channel"));
            }
        }
        Ok(Self {
            id,
            timestamps,
            channels,
            modality_of_channel,
            tau1,
            tau2,
            event_class,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn channels(&self) -> &DMatrix<f64> {
        &self.channels
    }

    pub fn modality_of_channel(&self) -> &[usize] {
        &self.modality_of_channel
    }

    pub fn tau1(&self) -> f64 {
        self.tau1
    }

    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn event_class(&self) -> Option<&str> {
        self.event_class.as_deref()
    }

    pub fn n_timesteps(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_modalities(&self) -> usize {
        self.modality_of_channel.iter().max().map_or(0, |&x| x + 1)
    }

    /// Timestep in seconds; 0 for a single-sample series.
    pub fn dt(&self) -> f64 {
        let n = self.timestamps.len();
        if n < 2 {
            0.0
        } else {
            (self.timestamps[n - 1] - self.timestamps[0]) / (n - 1) as f64
        }
    }

    /// Channel indices belonging to each modality, in channel order.
    pub fn channels_by_modality(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_modalities()];
        for (c, &m) in self.modality_of_channel.iter().enumerate() {
            out[m].push(c);
        }
        out
    }

    /// Whether a window ending at time `t` is labeled abnormal.
    pub fn is_abnormal_at(&self, t: f64) -> bool {
        self.tau1 <= t && t <= self.tau2
    }
}

/// Binary instance label. Abnormal windows are the target class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Normal,
    Abnormal,
}

impl Label {
    pub fn is_target(self) -> bool {
        self == Label::Abnormal
    }
}

impl From<bool> for Label {
    fn from(abnormal: bool) -> Self {
        if abnormal {
            Label::Abnormal
        } else {
            Label::Normal
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        match l {
            Label::Normal => 0,
            Label::Abnormal => 1,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Normal),
            1 => Ok(Label::Abnormal),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

/// One window seen through every modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalInstance {
    pub label: Label,
    pub end_time: f64,
    pub source_event: String,
    #[serde(rename = "vectors")]
    pub vectors_per_modality: Vec<Vec<f64>>,
}

impl MultimodalInstance {
    pub fn dims(&self) -> Vec<usize> {
        self.vectors_per_modality.iter().map(Vec::len).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalDataset {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "D")]
    d: Vec<usize>,
    instances: Vec<MultimodalInstance>,
}

impl MultimodalDataset {
    pub fn n_modalities(&self) -> usize {
        self.m
    }

    pub fn dims(&self) -> &[usize] {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[MultimodalInstance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<MultimodalInstance> {
        self.instances
    }

    pub fn labels(&self) -> Vec<Label> {
        self.instances.iter().map(|i| i.label).collect()
    }

    /// Modality `m` as a `D_m x N` matrix, one column per instance.
    pub fn modality_matrix(&self, m: usize) -> DMatrix<f64> {
        let dm = self.d[m];
        DMatrix::from_fn(dm, self.instances.len(), |r, c| {
            self.instances[c].vectors_per_modality[m][r]
        })
    }

    pub fn modality_matrices(&self) -> Vec<DMatrix<f64>> {
        (0..self.m).map(|m| self.modality_matrix(m)).collect()
    }

    /// Target-class (abnormal) instances only.
    pub fn targets(&self) -> Result<MultimodalDataset> {
        assemble_dataset(
            self.instances
                .iter()
                .filter(|i| i.label.is_target())
                .cloned()
                .collect(),
        )
    }

    /// Keep the instances whose index satisfies `keep`.
    pub fn subset(&self, mut keep: impl FnMut(usize, &MultimodalInstance) -> bool) -> Result<Self> {
        assemble_dataset(
            self.instances
                .iter()
                .enumerate()
                .filter(|(i, inst)| keep(*i, inst))
                .map(|(_, inst)| inst.clone())
                .collect(),
        )
    }

    pub fn shuffled(&self, seed: u64) -> Self {
        let mut instances = self.instances.clone();
        instances.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self {
            m: self.m,
            d: self.d.clone(),
            instances,
        }
    }

    /// Rebuild a dataset of identical shape-by-construction with new vectors.
    pub(crate) fn with_instances(m: usize, d: Vec<usize>, instances: Vec<MultimodalInstance>) -> Self {
        Self { m, d, instances }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let ds: MultimodalDataset = serde_json::from_str(&fs::read_to_string(path)?)?;
        let checked = assemble_dataset(ds.instances)?;
        if checked.m != ds.m || checked.d != ds.d {
            return shape(format!("{}: header M/D disagree with instances", path.display()));
        }
        Ok(checked)
    }
}

/// Build a dataset from instances sharing one shape.
pub fn assemble_dataset(instances: Vec<MultimodalInstance>) -> Result<MultimodalDataset> {
    let first = match instances.first() {
        Some(f) => f,
        None => return invalid("cannot assemble a dataset from zero instances"),
    };
    let d = first.dims();
    if d.is_empty() || d.iter().any(|&x| x == 0) {
        return invalid(format!("every modality needs at least one feature, got D={d:?}"));
    }
    for (i, inst) in instances.iter().enumerate() {
        if inst.dims() != d {
            return shape(format!(
                "instance {i} has D={:?}, expected {d:?}",
                inst.dims()
            ));
        }
    }
    Ok(MultimodalDataset {
        m: d.len(),
        d,
        instances,
    })
}

/// Shuffle events under `seed` and put `floor(train_fraction * n)` of them in
/// the training side. Splitting is per event, so windows never straddle sides.
pub fn split_train_test(
    events: &[EventSeries],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<EventSeries>, Vec<EventSeries>)> {
    if events.is_empty() {
        return invalid("cannot split an empty event list");
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return invalid(format!("train_fraction must be in (0, 1], got {train_fraction}"));
    }
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * events.len() as f64).floor() as usize;
    let train = order[..n_train].iter().map(|&i| events[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| events[i].clone()).collect();
    Ok((train, test))
}

/// JSON sidecar stored next to each event CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventSidecar {
    pub id: String,
    pub tau1: f64,
    pub tau2: f64,
    pub event_class: Option<String>,
    pub modality_of_channel: Vec<usize>,
}

/// Write `<dir>/<id>.csv` and `<dir>/<id>.json`.
pub fn write_event(dir: &Path, event: &EventSeries) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut wtr = csv::Writer::from_path(dir.join(format!("{}.csv", event.id)))?;
    let mut header = vec!["timestamp".to_string()];
    header.extend((0..event.channels.nrows()).map(|c| format!("ch{c}")));
    wtr.write_record(&header)?;
    for (t, &ts) in event.timestamps.iter().enumerate() {
        let mut row = vec![ts.to_string()];
        row.extend(event.channels.column(t).iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    let sidecar = EventSidecar {
        id: event.id.clone(),
        tau1: event.tau1,
        tau2: event.tau2,
        event_class: event.event_class.clone(),
        modality_of_channel: event.modality_of_channel.clone(),
    };
    fs::write(
        dir.join(format!("{}.json", event.id)),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

/// Read one event from its CSV and sidecar. A non-numeric first row is
/// treated as a header.
pub fn read_event(csv_path: &Path, json_path: &Path) -> Result<EventSeries> {
    let sidecar: EventSidecar = serde_json::from_str(&fs::read_to_string(json_path)?)?;
    let parse_err = |msg: String| Error::Parse {
        path: csv_path.display().to_string(),
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(csv_path)?;
    let mut timestamps = Vec::new();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(parse_err(format!("row {}: {e}", line + 1))),
        };
        if values.len() < 2 {
            return Err(parse_err(format!("row {}: need a timestamp and at least one channel", line + 1)));
        }
        if let Some(first) = samples.first() {
            if first.len() != values.len() - 1 {
                return Err(parse_err(format!("row {}: ragged row", line + 1)));
            }
        }
        timestamps.push(values[0]);
        samples.push(values[1..].to_vec());
    }
    if samples.is_empty() {
        return Err(parse_err("no samples".into()));
    }
    let n_channels = samples[0].len();
    let channels = DMatrix::from_fn(n_channels, samples.len(), |c, t| samples[t][c]);
    EventSeries::new(
        sidecar.id,
        timestamps,
        channels,
        sidecar.modality_of_channel,
        sidecar.tau1,
        sidecar.tau2,
        sidecar.event_class,
    )
}

/// Load every `<stem>.csv` + `<stem>.json` pair in `dir`, sorted by file name.
pub fn load_events_dir(dir: &Path) -> Result<Vec<EventSeries>> {
    let mut csvs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    csvs.sort();
    csvs.iter()
        .map(|csv_path| read_event(csv_path, &csv_path.with_extension("json")))
        .collect()
}
