//! Turning annotated series into OCC instances: windowing, Gaussian noise,
//! per-modality PCA and whole-matrix standard scores.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{EventSeries, Label, MultimodalDataset, MultimodalInstance};
use crate::error::{invalid, shape, Error, Result};
use crate::linalg::{self, row_major};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    /// Up to three windows per event: one inside, one before, one after.
    Reliability,
    /// Every window end position, step 1, in chronological order.
    Rolling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub w: usize,
    pub mode: ExtractionMode,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            w: 10,
            mode: ExtractionMode::Reliability,
        }
    }
}

impl WindowSpec {
    pub fn new(w: usize, mode: ExtractionMode) -> Result<Self> {
        if w == 0 {
            return invalid("window length must be at least 1");
        }
        Ok(Self { w, mode })
    }

    pub fn extract(&self, event: &EventSeries) -> Result<Vec<MultimodalInstance>> {
        match self.mode {
            ExtractionMode::Reliability => extract_reliability_instances(event, self),
            ExtractionMode::Rolling => extract_rolling_instances(event, self),
        }
    }
}

fn check_window(event: &EventSeries, spec: &WindowSpec) -> Result<()> {
    if spec.w == 0 {
        return invalid("window length must be at least 1");
    }
    if spec.w > event.n_timesteps() {
        return invalid(format!(
            "window length {} exceeds series length {} of event {}",
            spec.w,
            event.n_timesteps(),
            event.id()
        ));
    }
    Ok(())
}

/// Instance whose last sample is timestep `end`. Each modality vector is the
/// concatenation of its channels, each contributing `w` consecutive samples.
pub fn window_at(event: &EventSeries, end: usize, w: usize) -> MultimodalInstance {
    let start = end + 1 - w;
    let channels = event.channels();
    let vectors = event
        .channels_by_modality()
        .into_iter()
        .map(|chs| {
            chs.iter()
                .flat_map(|&c| (start..=end).map(move |t| channels[(c, t)]))
                .collect()
        })
        .collect();
    let t = event.timestamps()[end];
    MultimodalInstance {
        label: Label::from(event.is_abnormal_at(t)),
        end_time: t,
        source_event: event.id().to_string(),
        vectors_per_modality: vectors,
    }
}

/// At most one positive window (ending at the middle in-event timestep), one
/// negative ending just before `tau1`, and one negative ending at the final
/// timestep when the event stops before the series does.
pub fn extract_reliability_instances(
    event: &EventSeries,
    spec: &WindowSpec,
) -> Result<Vec<MultimodalInstance>> {
    check_window(event, spec)?;
    let w = spec.w;
    let ts = event.timestamps();
    let n = ts.len();
    let mut out = Vec::with_capacity(3);

    let inside: Vec<usize> = (0..n).filter(|&i| event.is_abnormal_at(ts[i])).collect();
    if !inside.is_empty() {
        let mid = inside[(inside.len() - 1) / 2];
        let end = if mid + 1 >= w {
            Some(mid)
        } else {
            inside.iter().copied().find(|&i| i + 1 >= w)
        };
        if let Some(end) = end {
            out.push(window_at(event, end, w));
        }
    }

    let n_before = ts.iter().take_while(|&&t| t < event.tau1()).count();
    if n_before >= w {
        out.push(window_at(event, n_before - 1, w));
    }

    if ts[n - 1] > event.tau2() {
        out.push(window_at(event, n - 1, w));
    }
    Ok(out)
}

/// One instance per end position `w-1..n`, chronological.
pub fn extract_rolling_instances(
    event: &EventSeries,
    spec: &WindowSpec,
) -> Result<Vec<MultimodalInstance>> {
    check_window(event, spec)?;
    Ok((spec.w - 1..event.n_timesteps())
        .map(|end| window_at(event, end, spec.w))
        .collect())
}

/// Standard deviation of every raw channel over all windows of a dataset,
/// grouped per modality. `channels_per_modality[m]` is the number of raw
/// channels in modality `m`; features are laid out channel-major.
pub fn channel_stds(dataset: &MultimodalDataset, channels_per_modality: &[usize]) -> Result<Vec<Vec<f64>>> {
    if channels_per_modality.len() != dataset.n_modalities() {
        return shape(format!(
            "{} channel counts for {} modalities",
            channels_per_modality.len(),
            dataset.n_modalities()
        ));
    }
    let mut out = Vec::with_capacity(channels_per_modality.len());
    for (m, &nc) in channels_per_modality.iter().enumerate() {
        let w = window_len(dataset.dims()[m], nc)?;
        let stds = (0..nc)
            .map(|c| {
                let vals = dataset
                    .instances()
                    .iter()
                    .flat_map(|i| i.vectors_per_modality[m][c * w..(c + 1) * w].iter().copied());
                population_std(vals)
            })
            .collect();
        out.push(stds);
    }
    Ok(out)
}

fn window_len(dim: usize, n_channels: usize) -> Result<usize> {
    if n_channels == 0 || dim % n_channels != 0 {
        return shape(format!("{dim} features cannot be split into {n_channels} channels"));
    }
    Ok(dim / n_channels)
}

fn population_std(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = vals.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    let var = vals.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    var.sqrt()
}

/// Add zero-mean Gaussian noise with std `noise_factor * channel std` to every
/// feature. `per_channel_std[m][c]` is the std of channel `c` of modality `m`.
pub fn inject_noise(
    dataset: &MultimodalDataset,
    noise_factor: f64,
    per_channel_std: &[Vec<f64>],
    seed: u64,
) -> Result<MultimodalDataset> {
    if !(noise_factor >= 0.0) {
        return invalid(format!("noise factor must be >= 0, got {noise_factor}"));
    }
    if per_channel_std.len() != dataset.n_modalities() {
        return shape("one std vector per modality required");
    }
    let mut windows = Vec::with_capacity(per_channel_std.len());
    for (m, stds) in per_channel_std.iter().enumerate() {
        if stds.iter().any(|s| !(*s >= 0.0)) {
            return invalid("channel standard deviations must be nonnegative");
        }
        windows.push(window_len(dataset.dims()[m], stds.len())?);
    }
    if noise_factor == 0.0 {
        return Ok(dataset.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = dataset
        .instances()
        .iter()
        .map(|inst| {
            let mut inst = inst.clone();
            for (m, v) in inst.vectors_per_modality.iter_mut().enumerate() {
                for (j, x) in v.iter_mut().enumerate() {
                    let sd = noise_factor * per_channel_std[m][j / windows[m]];
                    if sd > 0.0 {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *x += sd * z;
                    }
                }
            }
            inst
        })
        .collect();
    Ok(MultimodalDataset::with_instances(
        dataset.n_modalities(),
        dataset.dims().to_vec(),
        instances,
    ))
}

/// PCA for one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `n_components x D_raw`, rows orthonormal, by descending variance.
    #[serde(with = "row_major")]
    pub components: DMatrix<f64>,
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    /// Map a reduced vector back to the input space.
    pub fn reconstruct(&self, reduced: &DVector<f64>) -> DVector<f64> {
        self.components.transpose() * reduced + DVector::from_column_slice(&self.mean)
    }
}

/// Fit one PCA per modality on the training set.
pub fn fit_pca(train: &MultimodalDataset, n_components: usize) -> Result<Vec<PcaModel>> {
    let n = train.len();
    if n_components == 0 {
        return invalid("need at least one PCA component");
    }
    (0..train.n_modalities())
        .map(|m| {
            let dm = train.dims()[m];
            if n_components > dm.min(n) {
                return invalid(format!(
                    "{n_components} components requested but modality {m} has D={dm}, N={n}"
                ));
            }
            let x = train.modality_matrix(m);
            let mean = x.column_mean();
            let mut centered = x;
            for mut col in centered.column_iter_mut() {
                col -= &mean;
            }
            let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
            let cov = &centered * centered.transpose() / denom;
            let (vals, vecs) = linalg::sym_eigen_desc(&cov);
            let components = vecs.columns(0, n_components).transpose();
            Ok(PcaModel {
                mean: mean.as_slice().to_vec(),
                components,
                explained_variance: vals.iter().take(n_components).map(|v| v.max(0.0)).collect(),
                total_variance: vals.iter().map(|v| v.max(0.0)).sum(),
            })
        })
        .collect()
}

/// `components * (x - mean)`.
pub fn apply_pca(model: &PcaModel, x: &[f64]) -> Result<DVector<f64>> {
    if x.len() != model.input_dim() {
        return shape(format!(
            "PCA expects {} inputs, got {}",
            model.input_dim(),
            x.len()
        ));
    }
    let centered = DVector::from_iterator(x.len(), x.iter().zip(&model.mean).map(|(a, b)| a - b));
    Ok(&model.components * centered)
}

pub fn apply_pca_dataset(models: &[PcaModel], ds: &MultimodalDataset) -> Result<MultimodalDataset> {
    if models.len() != ds.n_modalities() {
        return shape(format!("{} PCA models for {} modalities", models.len(), ds.n_modalities()));
    }
    let instances = ds
        .instances()
        .iter()
        .map(|inst| {
            let vectors = inst
                .vectors_per_modality
                .iter()
                .zip(models)
                .map(|(v, pca)| apply_pca(pca, v).map(|r| r.as_slice().to_vec()))
                .collect::<Result<Vec<_>>>()?;
            Ok(MultimodalInstance {
                vectors_per_modality: vectors,
                ..inst.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultimodalDataset::with_instances(
        ds.n_modalities(),
        models.iter().map(PcaModel::n_components).collect(),
        instances,
    ))
}

/// Whole-matrix mean and population std of each training modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    pub fn fit(train: &MultimodalDataset) -> Result<Self> {
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for m in 0..train.n_modalities() {
            let vals = train
                .instances()
                .iter()
                .flat_map(|i| i.vectors_per_modality[m].iter().copied());
            let count = train.len() * train.dims()[m];
            let mu = vals.clone().sum::<f64>() / count as f64;
            let sd = population_std(vals);
            if !(sd > 0.0) {
                return Err(Error::DegenerateData(format!(
                    "modality {m} has zero standard deviation on the training set"
                )));
            }
            mean.push(mu);
            std.push(sd);
        }
        Ok(Self { mean, std })
    }

    pub fn apply_vector(&self, m: usize, v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| (x - self.mean[m]) / self.std[m]).collect()
    }

    pub fn apply(&self, ds: &MultimodalDataset) -> Result<MultimodalDataset> {
        if self.mean.len() != ds.n_modalities() {
            return shape("normalization stats do not match the modality count");
        }
        let instances = ds
            .instances()
            .iter()
            .map(|inst| MultimodalInstance {
                vectors_per_modality: inst
                    .vectors_per_modality
                    .iter()
                    .enumerate()
                    .map(|(m, v)| self.apply_vector(m, v))
                    .collect(),
                ..inst.clone()
            })
            .collect();
        Ok(MultimodalDataset::with_instances(
            ds.n_modalities(),
            ds.dims().to_vec(),
            instances,
        ))
    }
}

/// Fitted preprocessing chain applied to raw windows: PCA, then standard
/// scores. Channel stds are kept so rolling windows can get the same noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub pca: Vec<PcaModel>,
    pub normalization: NormalizationStats,
    pub channel_std: Vec<Vec<f64>>,
    pub noise_factor: f64,
}

impl Preprocessor {
    pub fn transform_vectors(&self, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if vectors.len() != self.pca.len() {
            return shape(format!(
                "{} modalities given, preprocessor has {}",
                vectors.len(),
                self.pca.len()
            ));
        }
        vectors
            .iter()
            .enumerate()
            .map(|(m, v)| {
                let reduced = apply_pca(&self.pca[m], v)?;
                Ok(self.normalization.apply_vector(m, reduced.as_slice()))
            })
            .collect()
    }

    pub fn transform(&self, ds: &MultimodalDataset) -> Result<MultimodalDataset> {
        self.normalization.apply(&apply_pca_dataset(&self.pca, ds)?)
    }
}

/// Standardize both sets with statistics of the training set.
pub fn fit_apply_normalization(
    train: &MultimodalDataset,
    test: &MultimodalDataset,
) -> Result<(MultimodalDataset, MultimodalDataset, NormalizationStats)> {
    let stats = NormalizationStats::fit(train)?;
    Ok((stats.apply(train)?, stats.apply(test)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::assemble_dataset;
    use rand::Rng;

    /// 2 modalities: channels 0,1 -> modality 0, channel 2 -> modality 1.
    fn series(n: usize, tau1: f64, tau2: f64) -> EventSeries {
        let ts: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ch = DMatrix::from_fn(3, n, |c, t| (c * 1000 + t) as f64);
        EventSeries::new("ev", ts, ch, vec![0, 0, 1], tau1, tau2, None).unwrap()
    }

    fn spec(w: usize) -> WindowSpec {
        WindowSpec::new(w, ExtractionMode::Reliability).unwrap()
    }

    #[test]
    fn three_reliability_windows() {
        let ev = series(40, 20.0, 30.0);
        let out = extract_reliability_instances(&ev, &spec(10)).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].label, Label::Abnormal);
        assert_eq!(out[0].end_time, 25.0);
        assert_eq!(out[1].label, Label::Normal);
        assert_eq!(out[1].end_time, 19.0);
        assert_eq!(out[2].label, Label::Normal);
        assert_eq!(out[2].end_time, 39.0);
        assert_eq!(out[0].dims(), vec![20, 10]);
        // channel-major layout: channel 0 samples 16..=25, then channel 1
        assert_eq!(out[0].vectors_per_modality[0][0], 16.0);
        assert_eq!(out[0].vectors_per_modality[0][9], 25.0);
        assert_eq!(out[0].vectors_per_modality[0][10], 1016.0);
        assert_eq!(out[0].vectors_per_modality[1][9], 2025.0);
    }

    #[test]
    fn no_pre_window_when_event_starts_early() {
        let ev = series(40, 5.0, 30.0);
        let out = extract_reliability_instances(&ev, &spec(10)).unwrap();
        assert!(out.len() <= 2);
        assert!(out.iter().all(|i| i.end_time >= 5.0));
    }

    #[test]
    fn event_at_last_timestamp() {
        let ev = series(30, 29.0, 29.0);
        let out = extract_reliability_instances(&ev, &spec(10)).unwrap();
        let labels: Vec<_> = out.iter().map(|i| i.label).collect();
        assert_eq!(labels, vec![Label::Abnormal, Label::Normal]);
        assert_eq!(out[0].end_time, 29.0);
        assert_eq!(out[1].end_time, 28.0);
    }

    #[test]
    fn window_longer_than_series() {
        let ev = series(5, 1.0, 2.0);
        assert!(matches!(
            extract_reliability_instances(&ev, &spec(10)),
            Err(Error::InvalidInput(_))
        ));
        assert!(extract_rolling_instances(&ev, &spec(10)).is_err());
    }

    #[test]
    fn rolling_counts_and_order() {
        let ev = series(20, 15.0, 19.0);
        let out = extract_rolling_instances(&ev, &spec(10)).unwrap();
        // enumerate end positions 9..=19 directly
        let expected: Vec<f64> = (0..20).filter(|e| e + 1 >= 10).map(|e| e as f64).collect();
        assert_eq!(out.len(), 11);
        let got: Vec<f64> = out.iter().map(|i| i.end_time).collect();
        assert_eq!(got, expected);
        assert_eq!(out[0].label, Label::Normal);
        assert_eq!(out[6].label, Label::Abnormal);

        let single = extract_rolling_instances(&series(10, 0.0, 1.0), &spec(10)).unwrap();
        assert_eq!(single.len(), 1);

        // tau2 <= last timestamp, so a quiet tail is only possible at the start:
        // every window ends after the event
        let quiet = extract_rolling_instances(&series(20, 2.0, 4.0), &spec(10)).unwrap();
        assert!(quiet.iter().all(|i| i.label == Label::Normal));
    }

    #[test]
    fn reliability_categories_unique() {
        for (a, b) in [(10.0, 20.0), (0.0, 39.0), (12.0, 12.0), (35.0, 39.0)] {
            let out = extract_reliability_instances(&series(40, a, b), &spec(10)).unwrap();
            let pos = out.iter().filter(|i| i.label == Label::Abnormal).count();
            let pre = out.iter().filter(|i| i.end_time < a).count();
            let post = out.iter().filter(|i| i.end_time > b).count();
            assert!(pos <= 1 && pre <= 1 && post <= 1);
        }
    }

    fn random_dataset(n: usize, dims: &[usize], seed: u64) -> MultimodalDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        assemble_dataset(
            (0..n)
                .map(|i| MultimodalInstance {
                    label: Label::from(i % 2 == 0),
                    end_time: i as f64,
                    source_event: format!("e{i}"),
                    vectors_per_modality: dims
                        .iter()
                        .map(|&d| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
                        .collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let ds = random_dataset(5, &[4, 6], 1);
        let stds = channel_stds(&ds, &[2, 3]).unwrap();
        assert_eq!(inject_noise(&ds, 0.0, &stds, 9).unwrap(), ds);
    }

    #[test]
    fn noise_deterministic_and_validated() {
        let ds = random_dataset(5, &[4, 6], 1);
        let stds = channel_stds(&ds, &[2, 3]).unwrap();
        let a = inject_noise(&ds, 0.1, &stds, 9).unwrap();
        let b = inject_noise(&ds, 0.1, &stds, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, ds);
        assert!(matches!(inject_noise(&ds, -0.1, &stds, 9), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn constant_channel_stays_constant() {
        let mut ds = random_dataset(4, &[4], 2);
        let instances: Vec<_> = ds
            .instances()
            .iter()
            .cloned()
            .map(|mut i| {
                i.vectors_per_modality[0][0] = 7.0;
                i.vectors_per_modality[0][1] = 7.0;
                i
            })
            .collect();
        ds = assemble_dataset(instances).unwrap();
        let stds = channel_stds(&ds, &[2]).unwrap();
        assert_eq!(stds[0][0], 0.0);
        let noisy = inject_noise(&ds, 1.0, &stds, 3).unwrap();
        for (a, b) in noisy.instances().iter().zip(ds.instances()) {
            assert_eq!(a.vectors_per_modality[0][..2], b.vectors_per_modality[0][..2]);
            assert_ne!(a.vectors_per_modality[0][2..], b.vectors_per_modality[0][2..]);
        }
    }

    #[test]
    fn pca_shapes_and_bounds() {
        let ds = random_dataset(12, &[6, 8], 4);
        let pcas = fit_pca(&ds, 5).unwrap();
        assert_eq!(pcas[0].components.shape(), (5, 6));
        assert_eq!(pcas[1].components.shape(), (5, 8));
        for p in &pcas {
            assert!(linalg::orthonormality_error(&p.components) < 1e-8);
            assert!(p.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        }
        assert!(matches!(fit_pca(&ds, 7), Err(Error::InvalidInput(_))));
        assert!(fit_pca(&random_dataset(3, &[6], 4), 4).is_err());
    }

    #[test]
    fn pca_rank_one_explains_everything() {
        // x_i = t_i * u with a fixed direction u
        let u = [1.0, -2.0, 0.5, 3.0];
        let ts = [-1.5, 0.3, 2.0, 0.7, -0.2];
        let ds = assemble_dataset(
            ts.iter()
                .map(|t| MultimodalInstance {
                    label: Label::Abnormal,
                    end_time: 0.0,
                    source_event: "x".into(),
                    vectors_per_modality: vec![u.iter().map(|v| v * t).collect()],
                })
                .collect(),
        )
        .unwrap();
        let pca = &fit_pca(&ds, 1).unwrap()[0];
        assert!((pca.explained_variance_ratio()[0] - 1.0).abs() < 1e-9);
        // oracle: top right-singular vector of the centered data is +-u/|u|
        let x = ds.modality_matrix(0);
        let mut c = x.clone();
        let mean = x.column_mean();
        for mut col in c.column_iter_mut() {
            col -= &mean;
        }
        let svd = c.transpose().svd(false, true);
        let top = svd.v_t.unwrap().row(0).transpose();
        let comp = pca.components.row(0).transpose();
        assert!((comp.dot(&top).abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pca_full_rank_reconstructs() {
        let ds = random_dataset(10, &[4], 5);
        let pca = &fit_pca(&ds, 4).unwrap()[0];
        for inst in ds.instances() {
            let x = &inst.vectors_per_modality[0];
            let back = pca.reconstruct(&apply_pca(pca, x).unwrap());
            for (a, b) in back.iter().zip(x) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn apply_pca_examples() {
        let ds = random_dataset(10, &[5], 6);
        let pca = &fit_pca(&ds, 3).unwrap()[0];
        let zero = apply_pca(pca, &pca.mean).unwrap();
        assert!(zero.amax() < 1e-12);
        let shifted: Vec<f64> = pca
            .mean
            .iter()
            .zip(pca.components.row(0).iter())
            .map(|(m, c)| m + c)
            .collect();
        let e1 = apply_pca(pca, &shifted).unwrap();
        assert!((e1[0] - 1.0).abs() < 1e-12 && e1[1].abs() < 1e-12 && e1[2].abs() < 1e-12);
        // direct multiply oracle
        let x = [0.3, -1.2, 2.2, 0.0, 5.0];
        let got = apply_pca(pca, &x).unwrap();
        for k in 0..3 {
            let mut acc = 0.0;
            for j in 0..5 {
                acc += pca.components[(k, j)] * (x[j] - pca.mean[j]);
            }
            assert!((got[k] - acc).abs() < 1e-10);
        }
        assert!(matches!(apply_pca(pca, &[1.0]), Err(Error::ShapeMismatch(_))));
    }

    fn scalar_ds(vals: &[f64]) -> MultimodalDataset {
        assemble_dataset(
            vals.iter()
                .map(|&v| MultimodalInstance {
                    label: Label::Normal,
                    end_time: 0.0,
                    source_event: "s".into(),
                    vectors_per_modality: vec![vec![v]],
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn two_point_standardization() {
        let (tr, te, stats) = fit_apply_normalization(&scalar_ds(&[0.0, 2.0]), &scalar_ds(&[1.0])).unwrap();
        assert_eq!(stats.mean, vec![1.0]);
        assert_eq!(stats.std, vec![1.0]);
        assert_eq!(tr.instances()[0].vectors_per_modality[0][0], -1.0);
        assert_eq!(tr.instances()[1].vectors_per_modality[0][0], 1.0);
        assert_eq!(te.instances()[0].vectors_per_modality[0][0], 0.0);
    }

    #[test]
    fn zero_std_rejected() {
        assert!(matches!(
            NormalizationStats::fit(&scalar_ds(&[3.0, 3.0])),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn normalization_matches_recomputation() {
        let train = random_dataset(9, &[3, 5], 7);
        let test = random_dataset(4, &[3, 5], 8);
        let (tr, te, stats) = fit_apply_normalization(&train, &test).unwrap();
        for m in 0..2 {
            let vals: Vec<f64> = train
                .instances()
                .iter()
                .flat_map(|i| i.vectors_per_modality[m].clone())
                .collect();
            let mu = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / vals.len() as f64;
            let sd = var.sqrt();
            assert!((stats.mean[m] - mu).abs() < 1e-12);
            assert!((stats.std[m] - sd).abs() < 1e-12);
            for (a, b) in te.instances().iter().zip(test.instances()) {
                for (x, y) in a.vectors_per_modality[m].iter().zip(&b.vectors_per_modality[m]) {
                    assert!((x - (y - mu) / sd).abs() < 1e-12);
                }
            }
            let out: Vec<f64> = tr
                .instances()
                .iter()
                .flat_map(|i| i.vectors_per_modality[m].clone())
                .collect();
            let omu = out.iter().sum::<f64>() / out.len() as f64;
            let osd = (out.iter().map(|v| (v - omu).powi(2)).sum::<f64>() / out.len() as f64).sqrt();
            assert!(omu.abs() < 1e-9);
            assert!((osd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_composition() {
        let train = random_dataset(6, &[4], 10);
        let stats = NormalizationStats::fit(&train).unwrap();
        let (mu, sd) = (stats.mean[0], stats.std[0]);
        let twice = stats.apply(&stats.apply(&train).unwrap()).unwrap();
        for (a, b) in twice.instances().iter().zip(train.instances()) {
            for (x, y) in a.vectors_per_modality[0].iter().zip(&b.vectors_per_modality[0]) {
                let expected = (y - mu - mu * sd) / (sd * sd);
                assert!((x - expected).abs() < 1e-12);
            }
        }
    }
}
