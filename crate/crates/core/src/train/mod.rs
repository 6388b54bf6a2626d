//! Adversarial training loops, model selection and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod history;

pub use checkpoint::{checkpoint_scalar, persist_state, restore_state, Checkpoint, CHECKPOINT_VERSION};
pub use config::{OptimizerChoice, TrainConfig, CONFIG_KEYS};
pub use history::{select_best_epoch, selection_distances, EpochRecord, MetricsHistory};

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::constraint::{dense_batch, encode_batch, ConstraintMap};
use crate::error::{Error, Result};
use crate::image::{images_to_tensor, ImageTensor};
use crate::model::{BnUpdates, ConditionalGenerator, Discriminator, Generator, Mode, NetInputs};
use crate::nn::{NodeId, Optimizer, Tape};
use crate::objectives::{
    discriminator_loss_grad, generator_adversarial_loss_grad, reconstruction_loss_tensor, GeneratorLossKind,
    LatentSpec, LossBreakdown,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const TRAIN: Mode = Mode::Train { update_stats: false };

/// Networks, optimizer moments and progress counters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T> {
    pub generator: Generator<T>,
    pub discriminator: Discriminator<T>,
    pub g_opt: Optimizer<T>,
    pub d_opt: Optimizer<T>,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed iterations over all epochs.
    pub iteration: usize,
}

impl<T: Scalar> TrainState<T> {
    pub fn new(generator: Generator<T>, discriminator: Discriminator<T>, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if discriminator.pack() != cfg.pac {
            return Err(Error::config(
                "pac",
                format!("discriminator built with pack {}, config asks for {}", discriminator.pack(), cfg.pac),
            ));
        }
        if discriminator.conditional() != cfg.conditional_d {
            return Err(Error::config("conditional_d", "does not match the discriminator"));
        }
        let kind = cfg.optimizer_kind();
        let g_opt = Optimizer::new(kind, cfg.learning_rate, generator.network().params());
        let d_opt = Optimizer::new(kind, cfg.learning_rate, discriminator.network().params());
        Ok(TrainState {
            generator,
            discriminator,
            g_opt,
            d_opt,
            epoch: 0,
            iteration: 0,
        })
    }
}

/// Inputs of one discriminator update.
#[derive(Clone, Debug)]
pub struct DiscriminatorBatch<T> {
    /// Real images, channel-packed when the discriminator is packed.
    pub real: Tensor<T>,
    /// Dense constraint values shown beside the real images (conditional
    /// discriminator only).
    pub real_condition: Option<Tensor<T>>,
    /// Generator encoding of the maps used for the fakes.
    pub conditioning: Tensor<T>,
    /// Dense values of the same maps (conditional discriminator only).
    pub fake_condition: Option<Tensor<T>>,
    /// One latent batch per packed sample.
    pub latents: Vec<Tensor<T>>,
    /// Additive noise on the real and fake discriminator inputs.
    pub input_noise: Option<(Tensor<T>, Tensor<T>)>,
}

/// Inputs of one generator update.
#[derive(Clone, Debug)]
pub struct GeneratorBatch<T> {
    pub conditioning: Tensor<T>,
    pub condition: Option<Tensor<T>>,
    /// One or two latent batches. With fewer latents than the
    /// discriminator's pack size the single sample is repeated.
    pub latents: Vec<Tensor<T>>,
    pub input_noise: Option<Tensor<T>>,
}

#[derive(Clone, Debug)]
pub struct DiscriminatorStep<T> {
    pub loss: f64,
    pub grads: Vec<Tensor<T>>,
    pub stats: BnUpdates<T>,
}

#[derive(Clone, Debug)]
pub struct GeneratorStep<T> {
    pub losses: LossBreakdown,
    pub grads: Vec<Tensor<T>>,
    pub stats: BnUpdates<T>,
}

fn shaped<T: Scalar>(like: &Tensor<T>, data: Vec<T>) -> Result<Tensor<T>> {
    Tensor::from_vec(like.shape(), data)
}

fn generate_node<T: Scalar>(
    g: &Generator<T>,
    tape: &mut Tape<T>,
    bound: &crate::model::Bound,
    y: NodeId,
    z: &Tensor<T>,
) -> Result<(NodeId, BnUpdates<T>)> {
    let zn = tape.leaf(z.clone(), false);
    g.network().forward_pure(
        tape,
        bound,
        NetInputs {
            latent: Some(zn),
            conditioning: Some(y),
            image: None,
        },
        TRAIN,
    )
}

fn discriminate<T: Scalar>(
    d: &Discriminator<T>,
    tape: &mut Tape<T>,
    bound: &crate::model::Bound,
    x: NodeId,
    condition: Option<&Tensor<T>>,
    noise: Option<&Tensor<T>>,
) -> Result<(NodeId, BnUpdates<T>)> {
    if d.conditional() != condition.is_some() {
        return Err(Error::invalid("condition must be given iff the discriminator is conditional"));
    }
    let x = match noise {
        Some(n) => tape.shift(x, n)?,
        None => x,
    };
    let y = condition.map(|c| tape.leaf(c.clone(), false));
    d.network().forward_pure(
        tape,
        bound,
        NetInputs {
            latent: None,
            conditioning: y,
            image: Some(x),
        },
        TRAIN,
    )
}

/// Loss and parameter gradients of the discriminator objective
/// `-[mean log D(x) + mean log(1 - D(G(y, z)))]`, generator frozen.
pub fn discriminator_step<T: Scalar>(
    g: &Generator<T>,
    d: &Discriminator<T>,
    batch: &DiscriminatorBatch<T>,
) -> Result<DiscriminatorStep<T>> {
    if batch.latents.len() != d.pack() {
        return Err(Error::shape(d.pack(), batch.latents.len()));
    }
    let mut tape = Tape::new();
    let gb = g.network().bind(&mut tape, false);
    let db = d.network().bind(&mut tape, true);
    let y = tape.leaf(batch.conditioning.clone(), false);
    let mut fakes = Vec::with_capacity(batch.latents.len());
    for z in &batch.latents {
        fakes.push(generate_node(g, &mut tape, &gb, y, z)?.0);
    }
    let fake = tape.concat(&fakes)?;
    let real = tape.leaf(batch.real.clone(), false);
    let (rn, fnoise) = match &batch.input_noise {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    let (d_real, s_real) = discriminate(d, &mut tape, &db, real, batch.real_condition.as_ref(), rn)?;
    let (d_fake, s_fake) = discriminate(d, &mut tape, &db, fake, batch.fake_condition.as_ref(), fnoise)?;
    let (loss, gr, gf) = discriminator_loss_grad(tape.value(d_real).data(), tape.value(d_fake).data())?;
    let seeds = vec![
        (d_real, shaped(tape.value(d_real), gr)?),
        (d_fake, shaped(tape.value(d_fake), gf)?),
    ];
    let mut grads = tape.backward(seeds)?;
    Ok(DiscriminatorStep {
        loss: loss.f64(),
        grads: d.network().gradients(&db, &mut grads),
        stats: s_real.chain(s_fake),
    })
}

/// Loss terms and parameter gradients of the regularised generator
/// objective `adv + lambda * rec`, discriminator frozen. With several
/// latents the reconstruction term is averaged over the samples.
pub fn generator_step<T: Scalar>(
    g: &Generator<T>,
    d: &Discriminator<T>,
    batch: &GeneratorBatch<T>,
    lambda: f64,
    kind: GeneratorLossKind,
    use_reconstruction: bool,
) -> Result<GeneratorStep<T>> {
    let k = batch.latents.len();
    if k == 0 || k > d.pack() {
        return Err(Error::shape(d.pack(), k));
    }
    let mut tape = Tape::new();
    let gb = g.network().bind(&mut tape, true);
    let db = d.network().bind(&mut tape, false);
    let y = tape.leaf(batch.conditioning.clone(), false);
    let mut fakes = Vec::with_capacity(k);
    let mut stats = BnUpdates::default();
    for z in &batch.latents {
        let (f, s) = generate_node(g, &mut tape, &gb, y, z)?;
        fakes.push(f);
        stats = stats.chain(s);
    }
    let packed: Vec<NodeId> = (0..d.pack()).map(|i| fakes[i.min(k - 1)]).collect();
    let x = tape.concat(&packed)?;
    let (d_out, _) = discriminate(d, &mut tape, &db, x, batch.condition.as_ref(), batch.input_noise.as_ref())?;
    let (adv, adv_grad) = generator_adversarial_loss_grad(tape.value(d_out).data(), kind)?;
    let mut seeds = vec![(d_out, shaped(tape.value(d_out), adv_grad)?)];
    let mut rec = 0.0;
    let scale = T::of(lambda / k as f64);
    for &f in &fakes {
        let (r, mut grad) = reconstruction_loss_tensor(&batch.conditioning, tape.value(f))?;
        rec += r.f64() / k as f64;
        if use_reconstruction {
            grad.scale(scale);
            seeds.push((f, grad));
        }
    }
    let adv = adv.f64();
    let mut grads = tape.backward(seeds)?;
    Ok(GeneratorStep {
        losses: LossBreakdown {
            d_loss: 0.0,
            g_adv: adv,
            g_rec: rec,
            g_total: if use_reconstruction { adv + lambda * rec } else { adv },
            lambda,
        },
        grads: g.network().gradients(&gb, &mut grads),
        stats,
    })
}

fn non_finite<T: Scalar>(state: &TrainState<T>, epoch: usize, losses: &LossBreakdown) -> Error {
    let finite = |p: &[Tensor<T>]| p.iter().all(|t| t.all_finite());
    Error::NonFinite {
        epoch,
        iteration: state.iteration + 1,
        snapshot: format!(
            "d_loss={} g_adv={} g_rec={} lambda={} g_params_finite={} d_params_finite={}",
            losses.d_loss,
            losses.g_adv,
            losses.g_rec,
            losses.lambda,
            finite(state.generator.network().params()),
            finite(state.discriminator.network().params()),
        ),
    }
}

/// One discriminator update followed by one generator update.
pub fn train_iteration<T: Scalar>(
    state: &mut TrainState<T>,
    d_batch: &DiscriminatorBatch<T>,
    g_batch: &GeneratorBatch<T>,
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    let epoch = state.epoch + 1;
    let ds = discriminator_step(&state.generator, &state.discriminator, d_batch)?;
    if !ds.loss.is_finite() {
        let l = LossBreakdown {
            d_loss: ds.loss,
            lambda: cfg.lambda,
            ..Default::default()
        };
        return Err(non_finite(state, epoch, &l));
    }
    let dn = state.discriminator.network_mut();
    state.d_opt.apply(dn.params_mut(), &ds.grads)?;
    dn.apply_stats(&ds.stats);

    let gs = generator_step(
        &state.generator,
        &state.discriminator,
        g_batch,
        cfg.lambda,
        cfg.loss_variant,
        cfg.use_reconstruction,
    )?;
    let losses = LossBreakdown {
        d_loss: ds.loss,
        ..gs.losses
    };
    if ![losses.g_adv, losses.g_rec, losses.g_total].iter().all(|v| v.is_finite()) {
        return Err(non_finite(state, epoch, &losses));
    }
    let gn = state.generator.network_mut();
    state.g_opt.apply(gn.params_mut(), &gs.grads)?;
    gn.apply_stats(&gs.stats);
    state.iteration += 1;
    Ok(losses)
}

/// Mean losses over one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub iterations: usize,
    pub d_loss: f64,
    pub g_adv: f64,
    pub g_rec: f64,
    pub g_total: f64,
    pub lambda: f64,
}

impl fmt::Display for EpochStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {} iters {} d_loss {:.6} g_adv {:.6} g_rec {:.6} g_total {:.6} lambda {}",
            self.epoch, self.iterations, self.d_loss, self.g_adv, self.g_rec, self.g_total, self.lambda
        )
    }
}

/// Random stream for one epoch; depends only on the run seed and the epoch
/// number, so a resumed run replays the same draws.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Iterations in one epoch: each consumes `pac * m` distinct real images.
pub fn iterations_per_epoch(n_images: usize, batch_size: usize, pac: usize) -> usize {
    n_images / (batch_size * pac).max(1)
}

struct Sampler<'a, T> {
    maps: &'a [ConstraintMap<T>],
    latent: LatentSpec,
    m: usize,
    conditional: bool,
}

impl<T: Scalar> Sampler<'_, T> {
    fn maps<R: Rng>(&self, rng: &mut R) -> Vec<ConstraintMap<T>> {
        (0..self.m).map(|_| self.maps[rng.random_range(0..self.maps.len())].clone()).collect()
    }

    fn condition(&self, maps: &[ConstraintMap<T>]) -> Result<Option<Tensor<T>>> {
        self.conditional.then(|| dense_batch(maps)).transpose()
    }

    fn noise<R: Rng>(&self, shape: [usize; 4], sigma: f64, rng: &mut R) -> Option<Tensor<T>> {
        if sigma <= 0.0 {
            return None;
        }
        let d = Normal::new(0.0, sigma).expect("positive sigma");
        let len = shape.iter().product();
        Some(Tensor::from_vec(shape, (0..len).map(|_| T::of(d.sample(rng))).collect()).expect("noise shape"))
    }
}

fn run_epoch<T: Scalar>(
    state: &mut TrainState<T>,
    images: &[ImageTensor<T>],
    constraints: &[ConstraintMap<T>],
    cfg: &TrainConfig,
) -> Result<EpochStats> {
    cfg.validate()?;
    if constraints.is_empty() {
        return Err(Error::invalid("constraint set is empty"));
    }
    let pac = cfg.pac;
    let m = cfg.batch_size;
    let iters = iterations_per_epoch(images.len(), m, pac);
    if iters == 0 {
        return Err(Error::invalid(format!(
            "{} images cannot fill one iteration of {pac} x {m}",
            images.len()
        )));
    }
    let (h, w, c) = state.generator.image_shape();
    if let Some(bad) = images.iter().find(|im| im.shape() != (h, w, c)) {
        return Err(Error::shape((h, w, c), bad.shape()));
    }
    if let Some(bad) = constraints.iter().find(|y| y.shape() != (h, w, c)) {
        return Err(Error::shape((h, w, c), bad.shape()));
    }
    let epoch = state.epoch + 1;
    let mut rng = epoch_rng(cfg.seed, epoch);
    let sampler = Sampler {
        maps: constraints,
        latent: state.generator.latent(),
        m,
        conditional: cfg.conditional_d,
    };
    let total_iters = (cfg.epochs.max(epoch) * iters) as f64;
    let g_latents = if pac == 2 && cfg.pac_g_step { 2 } else { 1 };
    let mut order: Vec<usize> = (0..images.len()).collect();
    order.shuffle(&mut rng);

    let mut sums = [0.0f64; 4];
    for it in 0..iters {
        let sigma = cfg.d_input_noise * (1.0 - state.iteration as f64 / total_iters).max(0.0);
        let chunks: Vec<Tensor<T>> = (0..pac)
            .map(|k| {
                let start = (it * pac + k) * m;
                let imgs: Vec<ImageTensor<T>> = order[start..start + m].iter().map(|&i| images[i].clone()).collect();
                images_to_tensor(&imgs)
            })
            .collect::<Result<_>>()?;
        let real = Tensor::concat_channels(&chunks.iter().collect::<Vec<_>>())?;
        let d_maps = sampler.maps(&mut rng);
        let latents = (0..pac).map(|_| sampler.latent.sample::<T, _>(m, &mut rng)).collect();
        let real_condition = if cfg.conditional_d {
            sampler.condition(&sampler.maps(&mut rng))?
        } else {
            None
        };
        let input_noise = sampler
            .noise(real.shape(), sigma, &mut rng)
            .zip(sampler.noise(real.shape(), sigma, &mut rng));
        let d_batch = DiscriminatorBatch {
            conditioning: encode_batch(&d_maps)?,
            fake_condition: sampler.condition(&d_maps)?,
            real,
            real_condition,
            latents,
            input_noise,
        };

        let g_maps = sampler.maps(&mut rng);
        let g_batch = GeneratorBatch {
            conditioning: encode_batch(&g_maps)?,
            condition: sampler.condition(&g_maps)?,
            latents: (0..g_latents).map(|_| sampler.latent.sample::<T, _>(m, &mut rng)).collect(),
            input_noise: sampler.noise(d_batch.real.shape(), sigma, &mut rng),
        };
        let l = train_iteration(state, &d_batch, &g_batch, cfg)?;
        sums[0] += l.d_loss;
        sums[1] += l.g_adv;
        sums[2] += l.g_rec;
        sums[3] += l.g_total;
    }
    state.epoch = epoch;
    let n = iters as f64;
    Ok(EpochStats {
        epoch,
        iterations: iters,
        d_loss: sums[0] / n,
        g_adv: sums[1] / n,
        g_rec: sums[2] / n,
        g_total: sums[3] / n,
        lambda: cfg.lambda,
    })
}

/// One pass of the plain algorithm: per mini-batch a discriminator step,
/// then a generator step on freshly drawn maps and latents. Real images are
/// shuffled once per epoch; maps are drawn with replacement.
pub fn train_epoch<T: Scalar>(
    state: &mut TrainState<T>,
    images: &[ImageTensor<T>],
    constraints: &[ConstraintMap<T>],
    cfg: &TrainConfig,
) -> Result<EpochStats> {
    if cfg.pac != 1 || state.discriminator.pack() != 1 {
        return Err(Error::config("pac", "train_epoch needs pac = 1; use train_epoch_pac"));
    }
    run_epoch(state, images, constraints, cfg)
}

/// One pass of the packed algorithm: the discriminator compares two packed
/// real batches against two generator samples for the same maps and
/// independent latents.
pub fn train_epoch_pac<T: Scalar>(
    state: &mut TrainState<T>,
    images: &[ImageTensor<T>],
    constraints: &[ConstraintMap<T>],
    cfg: &TrainConfig,
) -> Result<EpochStats> {
    if cfg.pac != 2 || state.discriminator.pack() != 2 {
        return Err(Error::config("pac", "train_epoch_pac needs pac = 2 and a packed discriminator"));
    }
    run_epoch(state, images, constraints, cfg)
}

/// Dispatches on `cfg.pac`.
pub fn train_one_epoch<T: Scalar>(
    state: &mut TrainState<T>,
    images: &[ImageTensor<T>],
    constraints: &[ConstraintMap<T>],
    cfg: &TrainConfig,
) -> Result<EpochStats> {
    if cfg.pac == 2 {
        train_epoch_pac(state, images, constraints, cfg)
    } else {
        train_epoch(state, images, constraints, cfg)
    }
}
