//! Config-driven commands: train, evaluate, sweep and sample.

pub mod config;
pub mod dataset;
pub mod eval;
pub mod overlay;

pub use config::{DatasetConfig, DatasetKind, EvalConfig, ExperimentConfig, FidBackend, Precision, EXPERIMENT_KEYS};
pub use dataset::{load_raw, prepare_dataset};
pub use eval::{evaluate_generator, EvalOutputs};
pub use overlay::{render_overlay, OverlayMode};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::io::save_png;
use crate::data::{read_constraint_file, write_manifest, DatasetSplit};
use crate::error::{Error, Result};
use crate::metrics::connectivity::write_connectivity_csv;
use crate::metrics::{extract_features, mean_abs_gray_diff, write_metric_report, MetricRecord, Split};
use crate::model::{catalog, ConditionalGenerator, Discriminator, Generator, InputKind};
use crate::objectives::LatentSpec;
use crate::scalar::Scalar;
use crate::train::{
    persist_state, restore_state, select_best_epoch, train_one_epoch, Checkpoint, EpochRecord, EpochStats,
    MetricsHistory, TrainState,
};

const EVAL_SALT: u64 = 0x6576_616c;
const CKPT_DIR: &str = "ckpt";

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn eval_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ EVAL_SALT)
}

/// Fresh generator/discriminator pair and optimizer state for `cfg`.
pub fn build_state<T: Scalar>(cfg: &ExperimentConfig, image_channels: usize) -> Result<TrainState<T>> {
    let t = &cfg.train;
    let g_spec = catalog::spec(&cfg.generator)?;
    let d_spec = catalog::spec(&cfg.discriminator_name()?)?;
    let probe = crate::model::Network::<T>::build(
        &g_spec,
        crate::model::BuildContext {
            image_channels,
            conditional: false,
            pack: 1,
        },
        0,
    )?;
    let (zc, zh, zw) = probe
        .input_shape(InputKind::Latent)
        .ok_or_else(|| Error::config("generator", "architecture has no latent input"))?;
    let latent = LatentSpec::new(zc, zh, zw, t.latent_distribution);
    let g = Generator::build(&g_spec, image_channels, latent, t.seed)?;
    let d = Discriminator::build(&d_spec, image_channels, t.conditional_d, t.pac, t.seed.wrapping_add(1))?;
    TrainState::new(g, d, t)
}

fn history_header(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    if cfg.train.lambda == 0.0 {
        s.push_str("# lambda = 0: conditional generator baseline (no reconstruction term)\n");
    } else {
        let _ = writeln!(s, "# lambda = {}: regularized objective", cfg.train.lambda);
    }
    let _ = writeln!(
        s,
        "# generator {} / discriminator {} / pac {}",
        cfg.generator,
        cfg.discriminator_name().unwrap_or_default(),
        cfg.train.pac
    );
    s.push_str("# epoch metric split value backend\n");
    s
}

fn history_text(cfg: &ExperimentConfig, history: &MetricsHistory) -> Result<String> {
    let mut buf = history_header(cfg).into_bytes();
    write_metric_report(&history.to_records(), &mut buf).map_err(|e| Error::io("history", e))?;
    Ok(String::from_utf8(buf).expect("ascii report"))
}

fn image_shape<T: Scalar>(data: &DatasetSplit<T>) -> Result<(usize, usize, usize)> {
    data.train
        .images
        .first()
        .map(|s| s.image.shape())
        .ok_or_else(|| Error::invalid("training split is empty"))
}

/// Result of [`cmd_train`].
#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub dir: PathBuf,
    pub history: MetricsHistory,
    pub best_epoch: usize,
    pub epochs: Vec<EpochStats>,
}

impl TrainSummary {
    pub fn best(&self) -> &EpochRecord {
        self.history.get(self.best_epoch).expect("best epoch is in the history")
    }
}

/// Trains for `cfg.train.epochs`, scoring the validation split after every
/// epoch, checkpointing, and finally selecting the best epoch.
pub fn cmd_train<T: Scalar>(cfg: &ExperimentConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let out = cfg.out.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_file(&out.join("config.txt"), cfg.to_text())?;

    let data = prepare_dataset::<T>(&cfg.dataset, cfg.train.constraint_density, cfg.train.noise)?;
    write_file(&out.join("manifest.txt"), write_manifest(&data.manifest()))?;
    let shape = image_shape(&data)?;
    let extractor = eval::build_extractor(cfg.fid, shape, &data.train)?;

    let ckpt_root = out.join(CKPT_DIR);
    let (mut state, mut history) = if cfg.resume && ckpt_root.join("latest").is_file() {
        let ck: Checkpoint<T> = restore_state(&ckpt_root)?;
        let mut saved = ck.config.clone();
        saved.epochs = cfg.train.epochs;
        if saved != cfg.train {
            return Err(Error::config("resume", "checkpoint was written with a different training config"));
        }
        if ck.history.backend != extractor.name() {
            return Err(Error::config("fid_backend", "checkpoint history uses a different backend"));
        }
        (ck.state, ck.history)
    } else {
        (build_state::<T>(cfg, shape.2)?, MetricsHistory::new(Split::Validation, extractor.name()))
    };

    let train_images = data.train.images();
    let train_maps = data.train.maps();
    let val_maps = data.validation.maps();
    let val_real = extract_features(&data.validation.images(), extractor.as_ref())?;
    let mut log = if state.epoch > 0 {
        fs::read_to_string(out.join("train_log.txt")).unwrap_or_default()
    } else {
        String::new()
    };
    let mut epochs = Vec::new();
    while state.epoch < cfg.train.epochs {
        let stats = train_one_epoch(&mut state, &train_images, &train_maps, &cfg.train)?;
        let _ = writeln!(log, "{stats}");
        write_file(&out.join("train_log.txt"), &log)?;
        epochs.push(stats);

        let (fid, mse) = eval::score_maps(
            &state.generator,
            &val_maps,
            &val_real,
            extractor.as_ref(),
            cfg.eval.fid_samples_per_map,
            &mut eval_rng(cfg.train.seed),
        )?;
        let mut rec = EpochRecord::new(state.epoch, fid, mse.per_image);
        rec.aux.insert("mse_per_pixel".into(), mse.per_pixel);
        history.push(rec)?;
        persist_state(
            &ckpt_root,
            &Checkpoint {
                config: cfg.train.clone(),
                state: state.clone(),
                history: history.clone(),
            },
        )?;
        write_file(&out.join("history.txt"), history_text(cfg, &history)?)?;
    }
    let best_epoch = select_best_epoch(&history)?;
    let best = history.get(best_epoch).expect("selected from history");
    write_file(
        &out.join("best_epoch.txt"),
        format!(
            "epoch {best_epoch}\nfid {:.6}\nmse {:.6}\ncheckpoint {}/epoch_{best_epoch}\n",
            best.fid, best.mse, CKPT_DIR
        ),
    )?;
    Ok(TrainSummary {
        dir: out,
        history,
        best_epoch,
        epochs,
    })
}

/// Result of [`cmd_evaluate`].
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub records: Vec<MetricRecord>,
    /// `(training backend, evaluation backend)` when they differ.
    pub backend_mismatch: Option<(String, String)>,
    pub dir: PathBuf,
}

/// Scores a checkpoint on the test split. Writes `report.txt` and the two
/// connectivity CSVs under `out/eval`.
pub fn cmd_evaluate<T: Scalar>(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<EvalReport> {
    cfg.validate()?;
    let ck: Checkpoint<T> = restore_state(checkpoint)?;
    let data = prepare_dataset::<T>(&cfg.dataset, ck.config.constraint_density, ck.config.noise)?;
    let shape = image_shape(&data)?;
    if ck.state.generator.image_shape() != shape {
        return Err(Error::config(
            "dataset",
            format!(
                "checkpoint generates {:?} images, dataset has {:?}",
                ck.state.generator.image_shape(),
                shape
            ),
        ));
    }
    let extractor = eval::build_extractor(cfg.fid, shape, &data.train)?;
    let backend = extractor.name();
    let mismatch = (ck.history.backend != backend).then(|| (ck.history.backend.clone(), backend.clone()));
    let outputs = evaluate_generator(
        &ck.state.generator,
        &data.test,
        extractor.as_ref(),
        &cfg.eval,
        &mut eval_rng(cfg.train.seed),
    )?;
    let records: Vec<MetricRecord> = outputs
        .metrics
        .iter()
        .map(|(m, v)| MetricRecord {
            epoch: ck.state.epoch,
            metric: m.clone(),
            split: Split::Test,
            value: *v,
            backend: backend.clone(),
        })
        .collect();

    let dir = cfg.out.join("eval");
    let mut text = format!("# checkpoint epoch {}\n", ck.state.epoch);
    if let Some((a, b)) = &mismatch {
        let _ = writeln!(text, "# warning: FID backend mismatch (training {a}, evaluation {b})");
    }
    text.push_str("# epoch metric split value backend\n");
    let mut buf = text.into_bytes();
    write_metric_report(&records, &mut buf).map_err(|e| Error::io(&dir, e))?;
    write_file(&dir.join("report.txt"), buf)?;
    for (name, curves) in [
        ("connectivity_real.csv", &outputs.connectivity_real),
        ("connectivity_generated.csv", &outputs.connectivity_generated),
    ] {
        let mut csv = Vec::new();
        write_connectivity_csv(curves, &mut csv).map_err(|e| Error::io(dir.join(name), e))?;
        write_file(&dir.join(name), csv)?;
    }
    Ok(EvalReport {
        records,
        backend_mismatch: mismatch,
        dir,
    })
}

/// Best-epoch scores of one sweep run, or the error that stopped it.
#[derive(Clone, Debug)]
pub struct SweepRun {
    pub lambda: f64,
    pub seed: u64,
    pub outcome: std::result::Result<SweepScore, String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepScore {
    pub best_epoch: usize,
    pub fid: f64,
    pub mse: f64,
    pub mse_per_pixel: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepMedian {
    pub lambda: f64,
    pub ok: usize,
    pub failed: usize,
    pub fid: f64,
    pub mse: f64,
    pub mse_per_pixel: f64,
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub runs: Vec<SweepRun>,
    pub medians: Vec<SweepMedian>,
}

/// Median of a non-empty list; NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize_sweep(lambdas: &[f64], runs: &[SweepRun]) -> Vec<SweepMedian> {
    lambdas
        .iter()
        .map(|&lambda| {
            let ok: Vec<&SweepScore> = runs
                .iter()
                .filter(|r| r.lambda == lambda)
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            let failed = runs.iter().filter(|r| r.lambda == lambda && r.outcome.is_err()).count();
            let col = |f: fn(&SweepScore) -> f64| median(&ok.iter().map(|s| f(s)).collect::<Vec<_>>());
            SweepMedian {
                lambda,
                ok: ok.len(),
                failed,
                fid: col(|s| s.fid),
                mse: col(|s| s.mse),
                mse_per_pixel: col(|s| s.mse_per_pixel),
            }
        })
        .collect()
}

fn fmt_opt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

/// Trains every `(lambda, seed)` pair under `out/lambda_<l>/seed_<s>` and
/// writes `sweep_runs.csv`, `sweep_medians.csv` and `pareto.csv`.
pub fn cmd_sweep<T: Scalar>(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    cfg.validate()?;
    let mut runs = Vec::new();
    for &lambda in &cfg.lambdas {
        for &seed in &cfg.seeds {
            let mut sub = cfg.clone();
            sub.train.lambda = lambda;
            sub.train.seed = seed;
            sub.out = cfg.out.join(format!("lambda_{lambda}")).join(format!("seed_{seed}"));
            let outcome = match cmd_train::<T>(&sub) {
                Ok(s) => {
                    let b = s.best();
                    Ok(SweepScore {
                        best_epoch: s.best_epoch,
                        fid: b.fid,
                        mse: b.mse,
                        mse_per_pixel: b.aux.get("mse_per_pixel").copied().unwrap_or(f64::NAN),
                    })
                }
                Err(e @ Error::Config { .. }) => return Err(e),
                Err(e) => {
                    write_file(&sub.out.join("FAILED"), format!("{e}\n"))?;
                    Err(e.to_string())
                }
            };
            runs.push(SweepRun { lambda, seed, outcome });
        }
    }
    let medians = summarize_sweep(&cfg.lambdas, &runs);

    let mut csv = String::from("lambda,seed,status,best_epoch,fid,mse,mse_per_pixel,error\n");
    let mut pareto = String::from("lambda,seed,mse,fid\n");
    for r in &runs {
        match &r.outcome {
            Ok(s) => {
                let _ = writeln!(
                    csv,
                    "{},{},ok,{},{:.6},{:.6},{:.6},",
                    r.lambda, r.seed, s.best_epoch, s.fid, s.mse, s.mse_per_pixel
                );
                let _ = writeln!(pareto, "{},{},{:.6},{:.6}", r.lambda, r.seed, s.mse, s.fid);
            }
            Err(e) => {
                let msg = e.replace([',', '\n'], ";");
                let _ = writeln!(csv, "{},{},failed,,,,,{msg}", r.lambda, r.seed);
            }
        }
    }
    let mut med = String::from("# medians of best-epoch scores; mse is the per-image sum form\n");
    med.push_str("lambda,runs_ok,runs_failed,median_fid,median_mse,median_mse_per_pixel\n");
    for m in &medians {
        let _ = writeln!(
            med,
            "{},{},{},{},{},{}",
            m.lambda,
            m.ok,
            m.failed,
            fmt_opt(m.fid),
            fmt_opt(m.mse),
            fmt_opt(m.mse_per_pixel)
        );
    }
    write_file(&cfg.out.join("sweep_runs.csv"), csv)?;
    write_file(&cfg.out.join("sweep_medians.csv"), med)?;
    write_file(&cfg.out.join("pareto.csv"), pareto)?;
    Ok(SweepSummary { runs, medians })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleOptions {
    pub n: usize,
    /// Squared-error threshold; a constrained pixel is satisfied when its
    /// error is strictly below it.
    pub eps: f64,
    pub mode: OverlayMode,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleReport {
    pub fractions: Vec<f64>,
    /// Mean grayscale absolute difference over sample pairs (n >= 2).
    pub diversity: Option<f64>,
}

/// Draws `n` samples for one constraint map with any generator and renders
/// their overlays into `out`.
pub fn sample_with<T: Scalar>(
    generator: &dyn ConditionalGenerator<T>,
    map: &crate::constraint::ConstraintMap<T>,
    opts: &SampleOptions,
    out: &Path,
) -> Result<SampleReport> {
    if opts.n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    if map.shape() != generator.image_shape() {
        return Err(Error::invalid(format!(
            "constraint map is {:?} but the generator produces {:?}",
            map.shape(),
            generator.image_shape()
        )));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let maps = vec![map.clone(); opts.n];
    let samples = eval::generate_for_maps(generator, &maps, 1, &mut ChaCha8Rng::seed_from_u64(opts.seed))?.remove(0);
    let mut fractions = Vec::with_capacity(opts.n);
    let mut report = String::from("# sample satisfied_fraction\n");
    for (i, s) in samples.iter().enumerate() {
        let (overlay, sat) = render_overlay(s, map, opts.eps, opts.mode)?;
        save_png(s, &out.join(format!("sample_{i}.png")))?;
        save_png(&overlay, &out.join(format!("overlay_{i}.png")))?;
        let _ = writeln!(report, "{i} {:.6}", sat.fraction);
        fractions.push(sat.fraction);
    }
    let diversity = if opts.n >= 2 {
        let mut total = 0.0;
        let mut pairs = 0;
        for i in 0..opts.n {
            for j in i + 1..opts.n {
                total += mean_abs_gray_diff(&samples[i], &samples[j])?;
                pairs += 1;
            }
        }
        let d = total / pairs as f64;
        let _ = writeln!(report, "# diversity {d:.6e}");
        Some(d)
    } else {
        None
    };
    write_file(&out.join("report.txt"), report)?;
    Ok(SampleReport { fractions, diversity })
}

/// [`sample_with`] on the generator stored in a checkpoint.
pub fn cmd_sample<T: Scalar>(checkpoint: &Path, constraints: &Path, opts: &SampleOptions, out: &Path) -> Result<SampleReport> {
    let ck: Checkpoint<T> = restore_state(checkpoint)?;
    let map = read_constraint_file::<T>(constraints)?;
    sample_with(&ck.state.generator, &map, opts, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::sample_constraint_map;
    use crate::objectives::LatentDistribution;
    use crate::tensor::Tensor;

    /// Emits the constrained values and zero elsewhere.
    struct CopyGenerator;

    impl ConditionalGenerator<f64> for CopyGenerator {
        fn image_shape(&self) -> (usize, usize, usize) {
            (8, 8, 1)
        }
        fn latent(&self) -> LatentSpec {
            LatentSpec::new(1, 1, 1, LatentDistribution::Uniform)
        }
        fn generate(&self, conditioning: &Tensor<f64>, _z: &Tensor<f64>) -> Result<Tensor<f64>> {
            Ok(conditioning.split_channels(&[1, 1])?.remove(0))
        }
    }

    fn small_cfg(out: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.train_size = 48;
        cfg.dataset.validation_size = 16;
        cfg.dataset.test_size = 16;
        cfg.train.batch_size = 12;
        cfg.train.epochs = 2;
        cfg.train.constraint_density = 0.02;
        cfg.fid = FidBackend::RandomProjection { dim: 8, seed: 0 };
        cfg.eval.fid_samples_per_map = 2;
        cfg.out = out.to_path_buf();
        cfg
    }

    #[test]
    fn copy_generator_satisfies_every_constraint() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let img = ImageTensor::from_fn(8, 8, 1, |y, x, _| (y as f64 - x as f64) / 8.0).unwrap();
        let map = sample_constraint_map(&img, 0.05, &mut rng).unwrap();
        let opts = SampleOptions {
            n: 3,
            eps: 1e-6,
            mode: OverlayMode::Block,
            seed: 1,
        };
        let rep = sample_with(&CopyGenerator, &map, &opts, dir.path()).unwrap();
        assert_eq!(rep.fractions, vec![1.0; 3]);
        assert_eq!(rep.diversity, Some(0.0));
        let samples = eval::generate_for_maps(&CopyGenerator, &[map.clone()], 1, &mut rng).unwrap();
        assert_eq!(crate::metrics::constraint_mse(&[map], &samples[0]).unwrap().per_image, 0.0);
        for i in 0..3 {
            assert!(dir.path().join(format!("overlay_{i}.png")).is_file());
        }
        assert!(std::fs::read_to_string(dir.path().join("report.txt")).unwrap().contains("diversity"));
    }

    #[test]
    fn sample_rejects_mismatched_map() {
        let dir = tempfile::tempdir().unwrap();
        let map = ConstraintMap::<f64>::from_entries(4, 4, 1, &[(0, 0, vec![0.0])]).unwrap();
        let opts = SampleOptions {
            n: 1,
            eps: 0.1,
            mode: OverlayMode::PurePixel,
            seed: 0,
        };
        assert!(sample_with(&CopyGenerator, &map, &opts, dir.path()).is_err());
    }

    use crate::constraint::ConstraintMap;
    use crate::image::ImageTensor;

    #[test]
    fn train_writes_history_and_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let sa = cmd_train::<f32>(&small_cfg(a.path())).unwrap();
        let sb = cmd_train::<f32>(&small_cfg(b.path())).unwrap();
        assert_eq!(sa.history.len(), 2);
        assert_eq!(sa.epochs.len(), 2);
        assert_eq!(sa.history, sb.history);
        let ha = fs::read_to_string(a.path().join("history.txt")).unwrap();
        assert_eq!(ha, fs::read_to_string(b.path().join("history.txt")).unwrap());
        assert!(ha.contains("regularized objective"));
        assert!(a.path().join("best_epoch.txt").is_file());
        assert!(a.path().join("ckpt/epoch_2/state.bin").is_file());
    }

    #[test]
    fn resume_continues_to_the_same_history() {
        let full = tempfile::tempdir().unwrap();
        let part = tempfile::tempdir().unwrap();
        let whole = cmd_train::<f32>(&small_cfg(full.path())).unwrap();
        let mut cfg = small_cfg(part.path());
        cfg.train.epochs = 1;
        cmd_train::<f32>(&cfg).unwrap();
        cfg.train.epochs = 2;
        cfg.resume = true;
        let resumed = cmd_train::<f32>(&cfg).unwrap();
        assert_eq!(resumed.history, whole.history);
        assert_eq!(resumed.epochs.len(), 1);
    }

    #[test]
    fn zero_lambda_history_is_labelled_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_cfg(dir.path());
        cfg.train.lambda = 0.0;
        cfg.train.epochs = 1;
        cmd_train::<f32>(&cfg).unwrap();
        let h = fs::read_to_string(dir.path().join("history.txt")).unwrap();
        assert!(h.starts_with("# lambda = 0: conditional generator baseline"));
    }

    #[test]
    fn evaluate_and_sweep_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_cfg(dir.path());
        cfg.train.epochs = 1;
        cfg.lambdas = vec![0.0, 1.0];
        cfg.seeds = vec![0];
        let sweep = cmd_sweep::<f32>(&cfg).unwrap();
        assert_eq!(sweep.runs.len(), 2);
        assert!(sweep.medians.iter().all(|m| m.ok == 1 && m.failed == 0));
        let csv = fs::read_to_string(dir.path().join("sweep_medians.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);

        let mut ecfg = cfg.clone();
        ecfg.fid = FidBackend::RandomProjection { dim: 4, seed: 9 };
        let rep = cmd_evaluate::<f32>(&ecfg, &dir.path().join("lambda_1/seed_0/ckpt")).unwrap();
        assert!(rep.backend_mismatch.is_some());
        let names: Vec<&str> = rep.records.iter().map(|r| r.metric.as_str()).collect();
        for m in ["mse", "mse_per_pixel", "fid", "hog_chi2", "lbp1_chi2", "lbp2_chi2", "diversity"] {
            assert!(names.contains(&m), "{m}");
        }
        assert!(rep.dir.join("connectivity_real.csv").is_file());
        let text = fs::read_to_string(rep.dir.join("report.txt")).unwrap();
        assert!(text.contains("mismatch"));
    }

    #[test]
    fn median_handles_even_and_empty() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
