//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset.

use std::collections::{HashSet, VecDeque};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pixgan::constraint::{encode_batch, sample_constraint_map, ConstraintMap};
use pixgan::data::{split_with_constraint_sets, two_shapes, RawSplits, Sample};
use pixgan::experiment::{cmd_sweep, ExperimentConfig, FidBackend};
use pixgan::image::{images_to_tensor, ImageTensor};
use pixgan::metrics::{
    connectivity_binary, diversity_score, fid, hog_descriptor, lbp_descriptor, Direction, FeatureEmbedding,
};
use pixgan::model::{catalog, ArchSpec, InputKind, Role};
use pixgan::objectives::{
    reconstruction_loss, reconstruction_loss_tensor, GeneratorLossKind, LatentDistribution, LatentSpec,
};
use pixgan::tensor::Tensor;
use pixgan::train::{generator_step, select_best_epoch, EpochRecord, GeneratorBatch, MetricsHistory};
use pixgan::metrics::Split;
use pixgan::{ConditionalGenerator, Discriminator, Generator, Result as PResult};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, || {
        format!("runtime {:.1}s exceeds {limit_s}s", elapsed.as_secs_f64())
    })
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> ImageTensor<f64> {
    ImageTensor::new(h, w, c, (0..h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

// 1 -------------------------------------------------------------------------

fn recon_oracle(map: &ConstraintMap<f64>, g: &ImageTensor<f64>) -> f64 {
    let mut s = 0.0;
    for y in 0..map.height() {
        for x in 0..map.width() {
            for c in 0..map.channels() {
                if map.is_masked(y, x) {
                    let d = map.value(y, x, c) - g.get(y, x, c);
                    s += d * d;
                }
            }
        }
    }
    s
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let (h, w, c) = if i % 2 == 0 { (8, 8, 1) } else { (16, 16, 3) };
        let source = random_image(&mut rng, h, w, c);
        let density = rng.random_range(0.01..0.05);
        let map = sample_constraint_map(&source, density, &mut rng).map_err(|e| e.to_string())?;
        let g = random_image(&mut rng, h, w, c);
        let want = recon_oracle(&map, &g);
        let a = reconstruction_loss(&map, &g).map_err(|e| e.to_string())?;
        let cond = encode_batch(std::slice::from_ref(&map)).map_err(|e| e.to_string())?;
        let gt = images_to_tensor(std::slice::from_ref(&g)).map_err(|e| e.to_string())?;
        let (b, _) = reconstruction_loss_tensor(&cond, &gt).map_err(|e| e.to_string())?;
        worst = worst.max((a - want).abs()).max((b - want).abs());
    }
    check(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    within(t0.elapsed(), 5.0)?;
    Ok(format!("max deviation {worst:.1e} over 200 pairs"))
}

// 2 -------------------------------------------------------------------------

const TOY_G: &str = "name toy_g\nrole generator\n\
input_z 1 - - - - - - 3x3\n\
input_y - - - - - - - 3x3\n\
conv 2 1x1 x1 1 leaky - - 3x3\n\
conv 1 1x1 x1 1 tanh - - 3x3\n";

const TOY_D: &str = "name toy_d\nrole discriminator\n\
input_x - - - - - - - 3x3\n\
dense 1 - - - sigmoid - - 1x1\n";

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let gs = ArchSpec::parse(TOY_G, "toy_g").map_err(|e| e.to_string())?;
    let ds = ArchSpec::parse(TOY_D, "toy_d").map_err(|e| e.to_string())?;
    let latent = LatentSpec::new(1, 3, 3, LatentDistribution::Uniform);
    let mut g = Generator::<f64>::build(&gs, 1, latent, 3).map_err(|e| e.to_string())?;
    let d = Discriminator::<f64>::build(&ds, 1, false, 1, 4).map_err(|e| e.to_string())?;
    // Move away from the small-init regime so every coordinate carries signal.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for p in g.network_mut().params_mut() {
        for v in p.data_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
    }
    let n_params = g.network().param_count();
    check(n_params <= 20, || format!("toy generator has {n_params} parameters"))?;

    let images: Vec<ImageTensor<f64>> = (0..4).map(|_| random_image(&mut rng, 3, 3, 1)).collect();
    let maps: Vec<ConstraintMap<f64>> = images
        .iter()
        .map(|im| sample_constraint_map(im, 0.3, &mut rng).unwrap())
        .collect();
    let batch = GeneratorBatch {
        conditioning: encode_batch(&maps).map_err(|e| e.to_string())?,
        condition: None,
        latents: vec![latent.sample::<f64, _>(4, &mut rng)],
        input_noise: None,
    };
    let kind = GeneratorLossKind::Saturating;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for lambda in [0.0, 1.0, 10.0] {
        let step = generator_step(&g, &d, &batch, lambda, kind, true).map_err(|e| e.to_string())?;
        let total = |g: &Generator<f64>| generator_step(g, &d, &batch, lambda, kind, true).unwrap().losses.g_total;
        for (pi, grad) in step.grads.iter().enumerate() {
            for j in 0..grad.len() {
                let mut gp = g.clone();
                gp.network_mut().params_mut()[pi].data_mut()[j] += h;
                let mut gm = g.clone();
                gm.network_mut().params_mut()[pi].data_mut()[j] -= h;
                let numeric = (total(&gp) - total(&gm)) / (2.0 * h);
                let analytic = grad.data()[j];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
                if rel >= 1e-4 {
                    return Err(format!(
                        "lambda {lambda}, param {pi}[{j}]: analytic {analytic:e}, numeric {numeric:e}, rel {rel:e}"
                    ));
                }
                worst = worst.max(rel);
            }
        }
    }
    within(t0.elapsed(), 30.0)?;
    Ok(format!("{n_params} parameters, worst relative error {worst:.1e}"))
}

// 3 -------------------------------------------------------------------------

fn emb(mu: &[f64], sigma: DMatrix<f64>) -> FeatureEmbedding {
    FeatureEmbedding {
        mu: DVector::from_row_slice(mu),
        sigma,
        n_samples: 100,
    }
}

fn criterion_3() -> Outcome {
    let id = DMatrix::<f64>::identity(2, 2);
    let a = emb(&[0.3, -1.2], DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0]));
    let same = fid(&a, &a).map_err(|e| e.to_string())?;
    let shift = fid(&emb(&[3.0, 4.0], id.clone()), &emb(&[0.0, 0.0], id.clone())).map_err(|e| e.to_string())?;
    let scale = fid(&emb(&[0.0, 0.0], id.clone() * 4.0), &emb(&[0.0, 0.0], id)).map_err(|e| e.to_string())?;
    check(same.abs() <= 1e-6, || format!("fid(a, a) = {same:e}"))?;
    check((shift - 25.0).abs() <= 1e-6, || format!("mean shift case = {shift}"))?;
    check((scale - 2.0).abs() <= 1e-6, || format!("covariance case = {scale}"))?;
    Ok(format!("fid(a,a) = {same:.1e}, shift {shift:.9}, scale {scale:.9}"))
}

// 4 -------------------------------------------------------------------------

fn flood_labels(grid: &[u8], h: usize, w: usize, facies: u8) -> Vec<Option<usize>> {
    let mut label = vec![None; h * w];
    let mut next = 0;
    for start in 0..h * w {
        if grid[start] != facies || label[start].is_some() {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        label[start] = Some(next);
        while let Some(i) = queue.pop_front() {
            let (y, x) = (i / w, i % w);
            let mut nbrs = Vec::with_capacity(4);
            if y > 0 {
                nbrs.push(i - w);
            }
            if y + 1 < h {
                nbrs.push(i + w);
            }
            if x > 0 {
                nbrs.push(i - 1);
            }
            if x + 1 < w {
                nbrs.push(i + 1);
            }
            for j in nbrs {
                if grid[j] == facies && label[j].is_none() {
                    label[j] = Some(next);
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }
    label
}

fn connectivity_oracle(grid: &[u8], h: usize, w: usize, facies: u8, vertical: bool, lag: usize) -> f64 {
    let label = flood_labels(grid, h, w, facies);
    let (mut pairs, mut joined) = (0, 0);
    for y in 0..h {
        for x in 0..w {
            let (y2, x2) = if vertical { (y + lag, x) } else { (y, x + lag) };
            if y2 >= h || x2 >= w {
                continue;
            }
            if let (Some(a), Some(b)) = (label[y * w + x], label[y2 * w + x2]) {
                pairs += 1;
                if a == b {
                    joined += 1;
                }
            }
        }
    }
    if pairs == 0 {
        f64::NAN
    } else {
        joined as f64 / pairs as f64
    }
}

fn same_value(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let mut compared = 0usize;
    for bits in 0u32..1 << 16 {
        let grid: Vec<u8> = (0..16).map(|i| ((bits >> i) & 1) as u8).collect();
        for facies in [0u8, 1] {
            for (dir, vertical) in [(Direction::Horizontal, false), (Direction::Vertical, true)] {
                let curve = connectivity_binary(&grid, 4, 4, facies, dir, 2).map_err(|e| e.to_string())?;
                for lag in 1..=2 {
                    let want = connectivity_oracle(&grid, 4, 4, facies, vertical, lag);
                    let got = curve.probabilities[lag - 1];
                    if !same_value(got, want) {
                        return Err(format!(
                            "image {bits:#06x}, facies {facies}, {dir:?}, lag {lag}: got {got}, oracle {want}"
                        ));
                    }
                    compared += 1;
                }
            }
        }
    }
    within(t0.elapsed(), 120.0)?;
    Ok(format!("{compared} values identical"))
}

// 5 -------------------------------------------------------------------------

fn hog_oracle(g: &[f64], h: usize, w: usize, cell: usize, bins: usize) -> Vec<f64> {
    let px = |y: isize, x: isize| g[y as usize * w + x as usize];
    let (cy, cx) = (h / cell, w / cell);
    let mut cells = vec![vec![0.0; bins]; cy * cx];
    for y in 0..cy * cell {
        for x in 0..cx * cell {
            let (yi, xi) = (y as isize, x as isize);
            let interior_x = x >= 1 && x + 1 < w;
            let interior_y = y >= 1 && y + 1 < h;
            let gx = if interior_x { px(yi, xi + 1) - px(yi, xi - 1) } else { 0.0 };
            let gy = if interior_y { px(yi + 1, xi) - px(yi - 1, xi) } else { 0.0 };
            let mag = gx.hypot(gy);
            let mut deg = gy.atan2(gx) * 180.0 / std::f64::consts::PI;
            if deg < 0.0 {
                deg += 180.0;
            }
            let b = ((deg / (180.0 / bins as f64)).floor() as usize) % bins;
            cells[(y / cell) * cx + x / cell][b] += mag;
        }
    }
    for c in cells.iter_mut() {
        if c.iter().sum::<f64>() == 0.0 {
            *c = vec![1.0 / bins as f64; bins];
        }
    }
    let (by, bx) = (2.min(cy), 2.min(cx));
    let mut out = Vec::new();
    for y0 in 0..=cy - by {
        for x0 in 0..=cx - bx {
            let mut block = Vec::new();
            for yy in y0..y0 + by {
                for xx in x0..x0 + bx {
                    block.extend(cells[yy * cx + xx].iter().copied());
                }
            }
            let n = (block.iter().map(|v| v * v).sum::<f64>() + 1e-12).sqrt();
            out.extend(block.iter().map(|v| v / n));
        }
    }
    let total: f64 = out.iter().sum();
    out.iter().map(|v| v / total).collect()
}

fn lbp_oracle(g: &[f64], h: usize, w: usize, radius: usize) -> Vec<f64> {
    let p = 8 * radius;
    let r = radius as f64;
    let snap = |v: f64| if (v - v.round()).abs() < 1e-9 { v.round() } else { v };
    let sample = |y: f64, x: f64| {
        let (y0, x0) = (y.floor(), x.floor());
        let (fy, fx) = (y - y0, x - x0);
        let mut v = 0.0;
        for (dy, wy) in [(0usize, 1.0 - fy), (1, fy)] {
            for (dx, wx) in [(0usize, 1.0 - fx), (1, fx)] {
                if wy * wx != 0.0 {
                    v += wy * wx * g[(y0 as usize + dy) * w + x0 as usize + dx];
                }
            }
        }
        v
    };
    let mut hist = vec![0.0; 1 << p];
    let mut n = 0.0;
    for y in radius..h - radius {
        for x in radius..w - radius {
            let centre = g[y * w + x];
            let mut code = 0usize;
            for k in 0..p {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / p as f64;
                let v = sample(y as f64 + snap(-r * theta.sin()), x as f64 + snap(r * theta.cos()));
                if v >= centre - 1e-12 {
                    code += 1 << k;
                }
            }
            hist[code] += 1.0;
            n += 1.0;
        }
    }
    hist.iter().map(|v| v / n).collect()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hog_worst: f64 = 0.0;
    for i in 0..50 {
        let img = random_image(&mut rng, 8, 8, 1);
        let g: Vec<f64> = img.data().to_vec();
        for radius in [1, 2] {
            let got = lbp_descriptor(&img, radius).map_err(|e| e.to_string())?;
            let want = lbp_oracle(&g, 8, 8, radius);
            check(got.values == want, || format!("image {i}: LBP radius {radius} differs"))?;
        }
        for cell in [8, 4, 2] {
            let got = hog_descriptor(&img, cell, 9).map_err(|e| e.to_string())?;
            let want = hog_oracle(&g, 8, 8, cell, 9);
            check(got.values.len() == want.len(), || format!("image {i}: HOG length differs"))?;
            for (a, b) in got.values.iter().zip(&want) {
                hog_worst = hog_worst.max((a - b).abs());
            }
        }
    }
    check(hog_worst <= 1e-8, || format!("HOG deviation {hog_worst:e}"))?;
    Ok(format!("LBP exact on 50 images, HOG max deviation {hog_worst:.1e}"))
}

// 6 -------------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.image_size = 16;
    cfg.dataset.train_size = 512;
    cfg.generator = "dcgan_desk16".into();
    cfg.train.epochs = 10;
    cfg.lambdas = vec![0.0, 1.0, 10.0];
    cfg.seeds = vec![0, 1, 2];
    cfg.fid = FidBackend::RandomProjection { dim: 64, seed: 0 };
    cfg.out = dir.path().to_path_buf();
    let sweep = cmd_sweep::<f32>(&cfg).map_err(|e| e.to_string())?;
    let med: Vec<(f64, f64, usize)> = sweep.medians.iter().map(|m| (m.lambda, m.mse, m.ok)).collect();
    let text = med
        .iter()
        .map(|(l, m, _)| format!("lambda {l}: {m:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    check(med.iter().all(|m| m.2 == 3), || format!("failed runs: {:?}", sweep.medians))?;
    let at = |l: f64| med.iter().find(|m| m.0 == l).map(|m| m.1).unwrap_or(f64::NAN);
    check(at(10.0) < at(0.0), || format!("median MSE not reduced at lambda 10 ({text})"))?;
    check(med.iter().all(|m| m.1 <= at(0.0)), || format!("lambda 0 is not the maximum ({text})"))?;
    within(t0.elapsed(), 900.0)?;
    Ok(format!("median best-epoch MSE {text}; {:.0}s", t0.elapsed().as_secs_f64()))
}

// 7 -------------------------------------------------------------------------

struct IgnoresZ;

impl ConditionalGenerator<f64> for IgnoresZ {
    fn image_shape(&self) -> (usize, usize, usize) {
        (6, 6, 1)
    }
    fn latent(&self) -> LatentSpec {
        LatentSpec::new(1, 6, 6, LatentDistribution::Uniform)
    }
    fn generate(&self, conditioning: &Tensor<f64>, _z: &Tensor<f64>) -> PResult<Tensor<f64>> {
        Ok(conditioning.split_channels(&[1, 1])?.remove(0).map(|v| v * 0.5))
    }
}

/// Returns its latent code as the image.
struct EchoZ;

impl ConditionalGenerator<f64> for EchoZ {
    fn image_shape(&self) -> (usize, usize, usize) {
        (6, 6, 1)
    }
    fn latent(&self) -> LatentSpec {
        LatentSpec::new(1, 6, 6, LatentDistribution::Uniform)
    }
    fn generate(&self, _conditioning: &Tensor<f64>, z: &Tensor<f64>) -> PResult<Tensor<f64>> {
        Ok(z.clone())
    }
}

/// E|a - b| for independent a, b ~ U[-1, 1] by the midpoint rule.
fn echo_oracle() -> f64 {
    let n = 2000;
    let step = 2.0 / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let a = -1.0 + (i as f64 + 0.5) * step;
        for j in 0..n {
            let b = -1.0 + (j as f64 + 0.5) * step;
            s += (a - b).abs();
        }
    }
    s * step * step / 4.0
}

fn criterion_7() -> Outcome {
    for c in [1, 3] {
        let spec = catalog::spec(if c == 1 { "dcgan_desk16_d" } else { "unetres_cifar_d" }).map_err(|e| e.to_string())?;
        let d = Discriminator::<f64>::build(&spec, c, false, 2, 0).map_err(|e| e.to_string())?;
        check(d.input_channels() == 2 * c, || {
            format!("packed input has {} channels for c = {c}", d.input_channels())
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let src = random_image(&mut rng, 6, 6, 1);
    let map = sample_constraint_map(&src, 0.1, &mut rng).map_err(|e| e.to_string())?;
    let flat = diversity_score(&IgnoresZ, &map, 50, &mut rng).map_err(|e| e.to_string())?;
    check(flat == 0.0, || format!("z-ignoring generator diversity {flat}"))?;
    let oracle = echo_oracle();
    let echo = diversity_score(&EchoZ, &map, 400, &mut rng).map_err(|e| e.to_string())?;
    check((oracle - 2.0 / 3.0).abs() < 1e-4, || format!("integration oracle {oracle}"))?;
    check((echo - oracle).abs() <= 0.02, || format!("echo diversity {echo} vs oracle {oracle}"))?;
    Ok(format!("packed channels 2c; diversity 0 and {echo:.4} (oracle {oracle:.4})"))
}

// 8 -------------------------------------------------------------------------

fn history(fids: &[f64], mses: &[f64]) -> MetricsHistory {
    let mut h = MetricsHistory::new(Split::Validation, "test");
    for (i, (&f, &m)) in fids.iter().zip(mses).enumerate() {
        h.push(EpochRecord::new(i + 1, f, m)).unwrap();
    }
    h
}

fn criterion_8() -> Outcome {
    let (fids, mses) = ([10.0, 2.0, 4.0], [0.9, 0.5, 0.1]);
    let best = select_best_epoch(&history(&fids, &mses)).map_err(|e| e.to_string())?;
    check(best == 3, || format!("selected epoch {best}"))?;
    for (a, b) in [(2.0, 0.0), (0.01, 5.0), (1000.0, -3.0), (0.5, 100.0)] {
        let scaled: Vec<f64> = fids.iter().map(|f| a * f + b).collect();
        let s = select_best_epoch(&history(&scaled, &mses)).map_err(|e| e.to_string())?;
        check(s == 3, || format!("rescaled FID ({a}x + {b}) selects epoch {s}"))?;
    }
    Ok("epoch 3 selected, invariant under affine FID rescaling".into())
}

// 9 -------------------------------------------------------------------------

fn criterion_9() -> Outcome {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = [rng.random_range(10..120), rng.random_range(5..60), rng.random_range(5..60)];
        let all: Vec<Sample<f32>> =
            two_shapes(sizes.iter().sum(), 8, &mut rng).map_err(|e| e.to_string())?;
        let mut it = all.into_iter();
        let mut take = |n: usize| it.by_ref().take(n).collect::<Vec<_>>();
        let raw = RawSplits {
            train: take(sizes[0]),
            validation: take(sizes[1]),
            test: take(sizes[2]),
        };
        let split = split_with_constraint_sets(raw, 0.05, &mut rng).map_err(|e| e.to_string())?;
        let parts = [&split.train, &split.validation, &split.test];
        let image_ids: HashSet<usize> = parts.iter().flat_map(|p| p.images.iter().map(|s| s.id)).collect();
        for (k, part) in parts.iter().enumerate() {
            check(part.constraints.len() == sizes[k] / 5, || {
                format!("seed {seed}: part {k} has {} maps for {} images", part.constraints.len(), sizes[k])
            })?;
            for c in &part.constraints {
                check(!image_ids.contains(&c.source_id), || {
                    format!("seed {seed}: constraint source {} is also a retained image", c.source_id)
                })?;
            }
        }
    }
    Ok("20 seeds, no shared ids, floor(size/5) maps per part".into())
}

// 10 ------------------------------------------------------------------------

fn criterion_10() -> Outcome {
    let t0 = Instant::now();
    // Final tabulated shapes: generators (h, w, c), discriminators probability grid.
    let expected: &[(&str, (usize, usize, usize))] = &[
        ("dcgan_fashion", (28, 28, 1)),
        ("unetres_cifar", (32, 32, 3)),
        ("patchgan_texture_d", (10, 10, 1)),
        ("updil_texture", (160, 160, 3)),
        ("upencdec_texture", (160, 160, 3)),
        ("unet_texture", (160, 160, 3)),
        ("res_texture", (160, 160, 3)),
        ("unetres_texture", (160, 160, 3)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    for name in catalog::names() {
        let spec = catalog::spec(name).map_err(|e| format!("{name}: {e}"))?;
        let last = spec.rows.last().ok_or_else(|| format!("{name}: no rows"))?.output;
        let (h, w, c) = match spec.role {
            Role::Generator => {
                let channels = expected
                    .iter()
                    .find(|e| e.0 == name)
                    .map(|e| e.1 .2)
                    .unwrap_or(if name.contains("desk16") { 1 } else { 3 });
                let net = pixgan::model::Network::<f32>::build(
                    &spec,
                    pixgan::model::BuildContext {
                        image_channels: channels,
                        conditional: false,
                        pack: 1,
                    },
                    0,
                )
                .map_err(|e| format!("{name}: {e}"))?;
                let (zc, zh, zw) = net.input_shape(InputKind::Latent).ok_or_else(|| format!("{name}: no latent"))?;
                let latent = LatentSpec::new(zc, zh, zw, LatentDistribution::Uniform);
                let g = Generator::<f32>::build(&spec, channels, latent, 0).map_err(|e| format!("{name}: {e}"))?;
                let (gh, gw, gc) = g.image_shape();
                let src: ImageTensor<f32> = random_image(&mut rng, gh, gw, gc).cast();
                let map = sample_constraint_map(&src, 0.01, &mut rng).map_err(|e| e.to_string())?;
                let cond = encode_batch(&[map]).map_err(|e| e.to_string())?;
                let out = g
                    .generate(&cond, &latent.sample::<f32, _>(1, &mut rng))
                    .map_err(|e| format!("{name}: {e}"))?;
                check(out.data().iter().all(|v| v.is_finite()), || format!("{name}: non-finite output"))?;
                (out.height(), out.width(), out.channels())
            }
            Role::Discriminator => {
                let channels = if name.contains("desk16") || name.contains("fashion") { 1 } else { 3 };
                let d = Discriminator::<f32>::build(&spec, channels, false, 1, 0).map_err(|e| format!("{name}: {e}"))?;
                let (ih, iw) = spec.rows[0].output;
                let x = Tensor::<f32>::from_vec(
                    [channels, 1, ih, iw],
                    (0..channels * ih * iw).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )
                .map_err(|e| e.to_string())?;
                let p = d.evaluate(&x, None).map_err(|e| format!("{name}: {e}"))?;
                check(p.data().iter().all(|v| (0.0..=1.0).contains(v)), || {
                    format!("{name}: output outside [0, 1]")
                })?;
                (p.height(), p.width(), p.channels())
            }
        };
        check((h, w) == last, || format!("{name}: output {h}x{w}, table says {}x{}", last.0, last.1))?;
        if let Some((_, want)) = expected.iter().find(|e| e.0 == name) {
            check((h, w, c) == *want, || format!("{name}: output {:?}, expected {:?}", (h, w, c), want))?;
        }
        checked += 1;
    }
    within(t0.elapsed(), 120.0)?;
    Ok(format!("{checked} catalog entries, {:.1}s", t0.elapsed().as_secs_f64()))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("reconstruction loss oracle", criterion_1),
        ("gradient check", criterion_2),
        ("FID analytic cases", criterion_3),
        ("connectivity oracle", criterion_4),
        ("LBP/HOG oracle", criterion_5),
        ("lambda trade-off trend", criterion_6),
        ("packed discriminator and diversity", criterion_7),
        ("model selection", criterion_8),
        ("split disjointness", criterion_9),
        ("architecture catalog", criterion_10),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
