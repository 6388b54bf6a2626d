//! Compiles an [`ArchSpec`] into parameter tensors and an execution plan,
//! and runs the plan on a [`Tape`].

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::arch::{ArchSpec, LayerKind, Norm, Role, Scaling, Skip};
use crate::error::{Error, Result};
use crate::nn::{BatchStats, ConvGeom, Gradients, NodeId, NormGroup, Tape};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Standard deviation of the Gaussian weight initialisation.
pub const INIT_STD: f64 = 0.02;
/// Weight of the current batch in running batch-norm statistics.
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    Latent,
    Conditioning,
    Image,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Step {
    Input {
        which: InputKind,
        channels: usize,
    },
    /// Flatten everything pending, fully connected, reshape.
    DenseFlat {
        in_features: usize,
        out: (usize, usize, usize),
    },
    Conv {
        transposed: bool,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        dilation: usize,
        out_pad: usize,
    },
    Residual {
        cin: usize,
        channels: usize,
        kernel: usize,
        repeats: usize,
        dilation: usize,
    },
    /// A row that is inactive in this build (e.g. `input_y` of an
    /// unconditional discriminator).
    Skipped,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct PlanEntry {
    pub row: usize,
    pub step: Step,
    pub out: (usize, usize, usize),
}

/// Input channel counts for a build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildContext {
    pub image_channels: usize,
    pub conditional: bool,
    pub pack: usize,
}

impl BuildContext {
    fn input_channels(&self, spec: &ArchSpec, kind: LayerKind, units: usize) -> Option<usize> {
        match (spec.role, kind) {
            (Role::Generator, LayerKind::InputZ) => Some(units.max(1)),
            (Role::Generator, LayerKind::InputY) => Some(self.image_channels + 1),
            (Role::Discriminator, LayerKind::InputX) => Some(self.pack * self.image_channels),
            (Role::Discriminator, LayerKind::InputY) if self.conditional => Some(self.image_channels),
            _ => None,
        }
    }
}

/// Shape pass: resolves padding, channel counts and the dense mode of every
/// row, checking each against the tabulated output shape.
pub(crate) fn plan_shapes(
    spec: &ArchSpec,
    image_channels: usize,
    conditional: bool,
    pack: usize,
) -> Result<(Vec<PlanEntry>, (usize, usize, usize))> {
    let ctx = BuildContext {
        image_channels,
        conditional,
        pack,
    };
    let mut pending: Vec<(usize, usize, usize)> = Vec::new();
    let mut sources: HashMap<&str, (usize, usize, usize)> = HashMap::new();
    let mut plan = Vec::with_capacity(spec.rows.len());
    for (i, row) in spec.rows.iter().enumerate() {
        if row.kind.is_input() {
            let Some(ch) = ctx.input_channels(spec, row.kind, row.units) else {
                if row.skip.id().is_some() {
                    return Err(spec.row_error(i, "inactive input row cannot carry a skip link"));
                }
                plan.push(PlanEntry {
                    row: i,
                    step: Step::Skipped,
                    out: (0, 0, 0),
                });
                continue;
            };
            let shape = (ch, row.output.0, row.output.1);
            pending.push(shape);
            if let Skip::Source(id) = &row.skip {
                sources.insert(id, shape);
            }
            let which = match row.kind {
                LayerKind::InputZ => InputKind::Latent,
                LayerKind::InputY => InputKind::Conditioning,
                _ => InputKind::Image,
            };
            plan.push(PlanEntry {
                row: i,
                step: Step::Input { which, channels: ch },
                out: shape,
            });
            continue;
        }
        if pending.is_empty() {
            return Err(spec.row_error(i, "layer has no input"));
        }
        let (oh, ow) = row.output;
        let merge = |pending: &[(usize, usize, usize)]| -> Result<(usize, usize, usize)> {
            let (_, h, w) = pending[0];
            if let Some(p) = pending.iter().find(|p| (p.1, p.2) != (h, w)) {
                return Err(spec.row_error(
                    i,
                    format!("cannot concatenate {}x{} with {}x{}", h, w, p.1, p.2),
                ));
            }
            Ok((pending.iter().map(|p| p.0).sum(), h, w))
        };
        let into_input = |x: (usize, usize, usize)| -> Result<(usize, usize, usize)> {
            if let Skip::IntoInput(id) = &row.skip {
                let s = sources[id.as_str()];
                if (s.1, s.2) != (x.1, x.2) {
                    return Err(spec.row_error(
                        i,
                        format!("skip `{id}` is {}x{} but layer input is {}x{}", s.1, s.2, x.1, x.2),
                    ));
                }
                return Ok((x.0 + s.0, x.1, x.2));
            }
            Ok(x)
        };
        let (step, mut out) = match row.kind {
            LayerKind::Dense => {
                let pointwise = pending.iter().all(|p| (p.1, p.2) == (oh, ow))
                    && !matches!(row.skip, Skip::IntoInput(_));
                if pointwise {
                    let x = merge(&pending)?;
                    (
                        Step::Conv {
                            transposed: false,
                            cin: x.0,
                            cout: row.units,
                            kernel: 1,
                            stride: 1,
                            pad: 0,
                            dilation: 1,
                            out_pad: 0,
                        },
                        (row.units, oh, ow),
                    )
                } else {
                    if matches!(row.skip, Skip::IntoInput(_)) {
                        return Err(spec.row_error(i, "flattening dense row cannot take an input skip"));
                    }
                    if row.units % (oh * ow) != 0 {
                        return Err(spec.row_error(
                            i,
                            format!("{} units do not reshape to {}x{}", row.units, oh, ow),
                        ));
                    }
                    let in_features = pending.iter().map(|p| p.0 * p.1 * p.2).sum();
                    let out = (row.units / (oh * ow), oh, ow);
                    (Step::DenseFlat { in_features, out }, out)
                }
            }
            LayerKind::Conv | LayerKind::ConvTranspose => {
                let x = into_input(merge(&pending)?)?;
                let k = row.kernel;
                let d = row.dilation;
                let pad = d * (k - 1) / 2;
                let transposed = row.kind == LayerKind::ConvTranspose;
                let (stride, out_pad, got) = match (transposed, row.scaling) {
                    (false, Scaling::Same) => (1, 0, conv_hw(x, k, 1, pad, d)),
                    (false, Scaling::Down2) => (2, 0, conv_hw(x, k, 2, pad, d)),
                    (true, Scaling::Same) => (1, 0, conv_t_hw(x, k, 1, pad, d, 0)),
                    (true, Scaling::Up2) => {
                        let base = conv_t_hw(x, k, 2, pad, d, 0);
                        match base {
                            Some((bh, bw)) if oh >= bh && ow >= bw && oh - bh < 2 && oh - bh == ow - bw => {
                                (2, oh - bh, Some((oh, ow)))
                            }
                            _ => (2, 0, base),
                        }
                    }
                    (false, Scaling::Up2) => {
                        return Err(spec.row_error(i, "use convt for x2 scaling"));
                    }
                    (true, Scaling::Down2) => {
                        return Err(spec.row_error(i, "use conv for x1/2 scaling"));
                    }
                };
                if got != Some((oh, ow)) {
                    return Err(spec.row_error(
                        i,
                        format!(
                            "shape chain gives {} from {}x{} input, table says {}x{}",
                            got.map(|(a, b)| format!("{a}x{b}")).unwrap_or_else(|| "nothing".into()),
                            x.1,
                            x.2,
                            oh,
                            ow
                        ),
                    ));
                }
                (
                    Step::Conv {
                        transposed,
                        cin: x.0,
                        cout: row.units,
                        kernel: k,
                        stride,
                        pad,
                        dilation: d,
                        out_pad,
                    },
                    (row.units, oh, ow),
                )
            }
            LayerKind::Residual => {
                let x = into_input(merge(&pending)?)?;
                if row.scaling != Scaling::Same || (x.1, x.2) != (oh, ow) {
                    return Err(spec.row_error(i, format!("residual block keeps {}x{}, table says {}x{}", x.1, x.2, oh, ow)));
                }
                (
                    Step::Residual {
                        cin: x.0,
                        channels: row.units,
                        kernel: row.kernel,
                        repeats: row.repeats.max(1),
                        dilation: row.dilation,
                    },
                    (row.units, oh, ow),
                )
            }
            _ => unreachable!("inputs handled above"),
        };
        if let Skip::OntoOutput(id) = &row.skip {
            let s = sources[id.as_str()];
            if (s.1, s.2) != (out.1, out.2) {
                return Err(spec.row_error(
                    i,
                    format!("skip `{id}` is {}x{} but layer output is {}x{}", s.1, s.2, out.1, out.2),
                ));
            }
            out.0 += s.0;
        }
        if let Skip::Source(id) = &row.skip {
            sources.insert(id, out);
        }
        pending = vec![out];
        plan.push(PlanEntry { row: i, step, out });
    }
    if pending.len() != 1 {
        return Err(spec.row_error(spec.rows.len() - 1, "network must end in a single tensor"));
    }
    let last = &spec.rows[spec.rows.len() - 1];
    if last.kind.is_input() {
        return Err(spec.row_error(spec.rows.len() - 1, "network must end in a layer"));
    }
    Ok((plan, pending[0]))
}

fn conv_hw(x: (usize, usize, usize), k: usize, s: usize, p: usize, d: usize) -> Option<(usize, usize)> {
    Some((ConvGeom::conv_out(x.1, k, s, p, d)?, ConvGeom::conv_out(x.2, k, s, p, d)?))
}

fn conv_t_hw(x: (usize, usize, usize), k: usize, s: usize, p: usize, d: usize, op: usize) -> Option<(usize, usize)> {
    Some((
        ConvGeom::conv_t_out(x.1, k, s, p, d, op)?,
        ConvGeom::conv_t_out(x.2, k, s, p, d, op)?,
    ))
}

#[derive(Clone, Debug, PartialEq)]
struct NormSlot {
    group: NormGroup,
    gamma: usize,
    beta: usize,
    /// Indices of running mean and variance buffers (batch norm only).
    running: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
struct ConvSlot {
    w: usize,
    b: usize,
    norm: Option<NormSlot>,
}

#[derive(Clone, Debug, PartialEq)]
enum Slots {
    None,
    Layer(ConvSlot),
    Residual { convs: Vec<ConvSlot>, projection: Option<ConvSlot> },
}

/// Batch statistics from a training pass, keyed by running-buffer indices.
#[derive(Clone, Debug, Default)]
pub struct BnUpdates<T>(Vec<((usize, usize), BatchStats<T>)>);

impl<T> BnUpdates<T> {
    /// Appends `later`; applying the result equals applying both in order.
    pub fn chain(mut self, later: BnUpdates<T>) -> Self {
        self.0.extend(later.0);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; `update_stats` folds them into running averages.
    Train { update_stats: bool },
    /// Running statistics.
    Eval,
}

/// Parameter nodes of a network registered on a tape.
#[derive(Clone, Debug)]
pub struct Bound {
    ids: Vec<NodeId>,
}

/// Inputs for one forward pass.
#[derive(Clone, Copy, Debug, Default)]
pub struct NetInputs {
    pub latent: Option<NodeId>,
    pub conditioning: Option<NodeId>,
    pub image: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    spec: ArchSpec,
    ctx: BuildContext,
    plan: Vec<PlanEntry>,
    slots: Vec<Slots>,
    output: (usize, usize, usize),
    params: Vec<Tensor<T>>,
    names: Vec<String>,
    buffers: Vec<Tensor<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn build(spec: &ArchSpec, ctx: BuildContext, seed: u64) -> Result<Self> {
        spec.validate()?;
        if ctx.pack == 0 {
            return Err(Error::invalid("pack must be >= 1"));
        }
        let (plan, output) = plan_shapes(spec, ctx.image_channels, ctx.conditional, ctx.pack)?;
        let mut net = Network {
            spec: spec.clone(),
            ctx,
            plan: Vec::new(),
            slots: Vec::new(),
            output,
            params: Vec::new(),
            names: Vec::new(),
            buffers: Vec::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        for entry in &plan {
            let row = &spec.rows[entry.row];
            let tag = format!("r{}", entry.row);
            let slot = match &entry.step {
                Step::Input { .. } | Step::Skipped => Slots::None,
                Step::DenseFlat { in_features, out } => {
                    let units = out.0 * out.1 * out.2;
                    let w = net.param(&format!("{tag}.w"), [units, *in_features, 1, 1], &mut rng, Some(&normal));
                    let b = net.param(&format!("{tag}.b"), [units, 1, 1, 1], &mut rng, None);
                    let norm = net.norm_slot(&tag, row.norm, out.0);
                    Slots::Layer(ConvSlot { w, b, norm })
                }
                Step::Conv {
                    transposed,
                    cin,
                    cout,
                    kernel,
                    ..
                } => {
                    let shape = if *transposed {
                        [*cin, *cout, *kernel, *kernel]
                    } else {
                        [*cout, *cin, *kernel, *kernel]
                    };
                    let w = net.param(&format!("{tag}.w"), shape, &mut rng, Some(&normal));
                    let b = net.param(&format!("{tag}.b"), [*cout, 1, 1, 1], &mut rng, None);
                    let norm = net.norm_slot(&tag, row.norm, *cout);
                    Slots::Layer(ConvSlot { w, b, norm })
                }
                Step::Residual {
                    cin,
                    channels,
                    kernel,
                    repeats,
                    ..
                } => {
                    let mut convs = Vec::new();
                    for j in 0..*repeats {
                        let from = if j == 0 { *cin } else { *channels };
                        let t = format!("{tag}.c{j}");
                        let w = net.param(&format!("{t}.w"), [*channels, from, *kernel, *kernel], &mut rng, Some(&normal));
                        let b = net.param(&format!("{t}.b"), [*channels, 1, 1, 1], &mut rng, None);
                        let norm = net.norm_slot(&t, row.norm, *channels);
                        convs.push(ConvSlot { w, b, norm });
                    }
                    let projection = (*cin != *channels).then(|| {
                        let t = format!("{tag}.proj");
                        let w = net.param(&format!("{t}.w"), [*channels, *cin, 1, 1], &mut rng, Some(&normal));
                        let b = net.param(&format!("{t}.b"), [*channels, 1, 1, 1], &mut rng, None);
                        ConvSlot { w, b, norm: None }
                    });
                    Slots::Residual { convs, projection }
                }
            };
            net.slots.push(slot);
        }
        net.plan = plan;
        Ok(net)
    }

    fn param(&mut self, name: &str, shape: [usize; 4], rng: &mut ChaCha8Rng, init: Option<&Normal<f64>>) -> usize {
        let len: usize = shape.iter().product();
        let data = match init {
            Some(dist) => (0..len).map(|_| T::of(dist.sample(rng))).collect(),
            None => vec![T::zero(); len],
        };
        self.params.push(Tensor::from_vec(shape, data).expect("param shape"));
        self.names.push(name.to_string());
        self.params.len() - 1
    }

    fn norm_slot(&mut self, tag: &str, norm: Norm, channels: usize) -> Option<NormSlot> {
        let group = match norm {
            Norm::None => return None,
            Norm::Batch => NormGroup::Batch,
            Norm::Instance => NormGroup::Instance,
        };
        self.params.push(Tensor::filled([channels, 1, 1, 1], T::one()));
        self.names.push(format!("{tag}.gamma"));
        let gamma = self.params.len() - 1;
        self.params.push(Tensor::zeros([channels, 1, 1, 1]));
        self.names.push(format!("{tag}.beta"));
        let beta = self.params.len() - 1;
        let running = (group == NormGroup::Batch).then(|| {
            self.buffers.push(Tensor::zeros([channels, 1, 1, 1]));
            self.buffers.push(Tensor::filled([channels, 1, 1, 1], T::one()));
            (self.buffers.len() - 2, self.buffers.len() - 1)
        });
        Some(NormSlot {
            group,
            gamma,
            beta,
            running,
        })
    }

    pub fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    pub fn context(&self) -> BuildContext {
        self.ctx
    }

    /// `(channels, height, width)` of the network output.
    pub fn output_shape(&self) -> (usize, usize, usize) {
        self.output
    }

    /// Channel count expected for each active input.
    pub fn input_channels(&self, which: InputKind) -> Option<usize> {
        self.plan.iter().find_map(|e| match e.step {
            Step::Input { which: w, channels } if w == which => Some(channels),
            _ => None,
        })
    }

    pub fn input_shape(&self, which: InputKind) -> Option<(usize, usize, usize)> {
        self.plan.iter().find_map(|e| match e.step {
            Step::Input { which: w, .. } if w == which => Some(e.out),
            _ => None,
        })
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn buffers(&self) -> &[Tensor<T>] {
        &self.buffers
    }

    pub fn buffers_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.buffers
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    /// SHA-256 over parameters and buffers (as little-endian f64).
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for t in self.params.iter().chain(&self.buffers) {
            for v in t.data() {
                h.update(v.f64().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Registers every parameter on the tape.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Bound {
        Bound {
            ids: self.params.iter().map(|p| tape.leaf(p.clone(), trainable)).collect(),
        }
    }

    /// Parameter gradients in parameter order; zeros where nothing flowed.
    pub fn gradients(&self, bound: &Bound, grads: &mut Gradients<T>) -> Vec<Tensor<T>> {
        bound
            .ids
            .iter()
            .zip(&self.params)
            .map(|(&id, p)| grads.take(id).unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect()
    }

    /// Runs the plan. In training mode with `update_stats`, batch-norm running
    /// statistics are refreshed after the pass.
    pub fn forward(&mut self, tape: &mut Tape<T>, bound: &Bound, inputs: NetInputs, mode: Mode) -> Result<NodeId> {
        let (out, stats) = self.forward_pure(tape, bound, inputs, mode)?;
        if let Mode::Train { update_stats: true } = mode {
            self.apply_stats(&stats);
        }
        Ok(out)
    }

    /// Forward pass with running statistics; never mutates the network.
    pub fn forward_eval(&self, tape: &mut Tape<T>, bound: &Bound, inputs: NetInputs) -> Result<NodeId> {
        Ok(self.forward_pure(tape, bound, inputs, Mode::Eval)?.0)
    }

    /// Folds batch statistics gathered by [`Network::forward_pure`] into the
    /// running averages.
    pub fn apply_stats(&mut self, stats: &BnUpdates<T>) {
        let m = T::of(BN_MOMENTUM);
        for ((mi, vi), s) in &stats.0 {
            for (r, &b) in self.buffers[*mi].data_mut().iter_mut().zip(&s.mean) {
                *r = (T::one() - m) * *r + m * b;
            }
            for (r, &b) in self.buffers[*vi].data_mut().iter_mut().zip(&s.var_unbiased) {
                *r = (T::one() - m) * *r + m * b;
            }
        }
    }

    /// Runs the plan without touching the network; batch statistics (if
    /// any) are returned for [`Network::apply_stats`].
    pub fn forward_pure(&self, tape: &mut Tape<T>, bound: &Bound, inputs: NetInputs, mode: Mode) -> Result<(NodeId, BnUpdates<T>)> {
        let mut pending: Vec<NodeId> = Vec::new();
        let mut sources: HashMap<&str, NodeId> = HashMap::new();
        let mut stats = Vec::new();
        for (entry, slot) in self.plan.iter().zip(&self.slots) {
            let row = &self.spec.rows[entry.row];
            match &entry.step {
                Step::Skipped => continue,
                Step::Input { which, .. } => {
                    let node = match which {
                        InputKind::Latent => inputs.latent,
                        InputKind::Conditioning => inputs.conditioning,
                        InputKind::Image => inputs.image,
                    }
                    .ok_or_else(|| Error::invalid(format!("{}: missing {:?} input", self.spec.name, which)))?;
                    let got = tape.value(node).shape();
                    if (got[0], got[2], got[3]) != entry.out {
                        return Err(Error::shape(entry.out, (got[0], got[2], got[3])));
                    }
                    pending.push(node);
                    if let Skip::Source(id) = &row.skip {
                        sources.insert(id, node);
                    }
                    continue;
                }
                _ => {}
            }
            let layer = match slot {
                Slots::Layer(l) => Some(l),
                _ => None,
            };
            let mut y = match &entry.step {
                Step::DenseFlat { out, .. } => {
                    let flat: Vec<NodeId> = pending.iter().map(|&p| tape.flatten(p)).collect();
                    let x = tape.concat(&flat)?;
                    let l = layer.expect("dense slot");
                    let d = tape.dense(x, bound.ids[l.w], Some(bound.ids[l.b]))?;
                    let d = tape.unflatten(d, out.0, out.1, out.2)?;
                    let d = self.apply_norm(tape, bound, d, l.norm.as_ref(), mode, &mut stats)?;
                    tape.activation(d, row.activation)
                }
                Step::Conv {
                    transposed,
                    stride,
                    pad,
                    dilation,
                    out_pad,
                    ..
                } => {
                    let mut x = tape.concat(&pending)?;
                    if let Skip::IntoInput(id) = &row.skip {
                        x = tape.concat(&[x, sources[id.as_str()]])?;
                    }
                    let l = layer.expect("conv slot");
                    let (w, b) = (bound.ids[l.w], Some(bound.ids[l.b]));
                    let c = if *transposed {
                        tape.conv_transpose2d(x, w, b, *stride, *pad, *dilation, *out_pad)?
                    } else {
                        tape.conv2d(x, w, b, *stride, *pad, *dilation)?
                    };
                    let c = self.apply_norm(tape, bound, c, l.norm.as_ref(), mode, &mut stats)?;
                    tape.activation(c, row.activation)
                }
                Step::Residual { kernel, dilation, .. } => {
                    let mut x = tape.concat(&pending)?;
                    if let Skip::IntoInput(id) = &row.skip {
                        x = tape.concat(&[x, sources[id.as_str()]])?;
                    }
                    let Slots::Residual { convs, projection } = slot else {
                        unreachable!("residual slot")
                    };
                    let pad = dilation * (kernel - 1) / 2;
                    let mut h = x;
                    for (j, c) in convs.iter().enumerate() {
                        h = tape.conv2d(h, bound.ids[c.w], Some(bound.ids[c.b]), 1, pad, *dilation)?;
                        h = self.apply_norm(tape, bound, h, c.norm.as_ref(), mode, &mut stats)?;
                        if j + 1 < convs.len() {
                            h = tape.activation(h, row.activation);
                        }
                    }
                    let shortcut = match projection {
                        Some(p) => tape.conv2d(x, bound.ids[p.w], Some(bound.ids[p.b]), 1, 0, 1)?,
                        None => x,
                    };
                    let sum = tape.add(h, shortcut)?;
                    tape.activation(sum, row.activation)
                }
                Step::Input { .. } | Step::Skipped => unreachable!(),
            };
            if let Skip::OntoOutput(id) = &row.skip {
                y = tape.concat(&[y, sources[id.as_str()]])?;
            }
            if let Skip::Source(id) = &row.skip {
                sources.insert(id, y);
            }
            pending = vec![y];
        }
        Ok((pending[0], BnUpdates(stats)))
    }

    #[allow(clippy::type_complexity)]
    fn apply_norm(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        x: NodeId,
        norm: Option<&NormSlot>,
        mode: Mode,
        stats: &mut Vec<((usize, usize), BatchStats<T>)>,
    ) -> Result<NodeId> {
        let Some(n) = norm else { return Ok(x) };
        let running = match (n.group, mode, n.running) {
            (NormGroup::Batch, Mode::Eval, Some((m, v))) => Some((self.buffers[m].data(), self.buffers[v].data())),
            _ => None,
        };
        let (y, s) = tape.normalize(x, bound.ids[n.gamma], bound.ids[n.beta], n.group, running)?;
        if let (Some(s), Some(r)) = (s, n.running) {
            stats.push((r, s));
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::arch::{LayerRow, Scaling};
    use crate::nn::Activation;

    fn gen_spec() -> ArchSpec {
        use LayerKind::*;
        ArchSpec::new(
            "t",
            Role::Generator,
            vec![
                LayerRow::new(InputZ, 2, (4, 4)),
                LayerRow::new(InputY, 0, (8, 8)).skip(Skip::Source("y".into())),
                LayerRow::new(Dense, 32, (4, 4)).act(Activation::Relu).norm(Norm::Batch),
                LayerRow::new(ConvTranspose, 3, (8, 8))
                    .kernel(3)
                    .scaling(Scaling::Up2)
                    .act(Activation::Relu)
                    .skip(Skip::OntoOutput("y".into())),
                LayerRow::new(Residual, 4, (8, 8)).kernel(3).repeats(2).act(Activation::Relu).norm(Norm::Instance),
                LayerRow::new(Conv, 1, (8, 8)).kernel(3).act(Activation::Tanh),
            ],
        )
    }

    #[test]
    fn plan_resolves_channels() {
        let (plan, out) = plan_shapes(&gen_spec(), 1, false, 1).unwrap();
        assert_eq!(out, (1, 8, 8));
        assert!(matches!(plan[2].step, Step::DenseFlat { in_features: 160, out: (2, 4, 4) }));
        // convt output 3 channels plus the 2-channel conditioning skip
        assert_eq!(plan[3].out, (5, 8, 8));
        assert!(matches!(plan[4].step, Step::Residual { cin: 5, channels: 4, .. }));
    }

    #[test]
    fn forward_shapes_and_range() {
        let mut net = Network::<f64>::build(&gen_spec(), BuildContext { image_channels: 1, conditional: false, pack: 1 }, 3).unwrap();
        let mut tape = Tape::new();
        let bound = net.bind(&mut tape, false);
        let z = tape.leaf(Tensor::filled([2, 3, 4, 4], 0.5), false);
        let y = tape.leaf(Tensor::filled([2, 3, 8, 8], 0.25), false);
        let out = net
            .forward(&mut tape, &bound, NetInputs { latent: Some(z), conditioning: Some(y), image: None }, Mode::Train { update_stats: true })
            .unwrap();
        assert_eq!(tape.value(out).shape(), [1, 3, 8, 8]);
        assert!(tape.value(out).data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn same_seed_same_params() {
        let ctx = BuildContext { image_channels: 1, conditional: false, pack: 1 };
        let a = Network::<f32>::build(&gen_spec(), ctx, 7).unwrap();
        let b = Network::<f32>::build(&gen_spec(), ctx, 7).unwrap();
        let c = Network::<f32>::build(&gen_spec(), ctx, 8).unwrap();
        assert_eq!(a.checksum(), b.checksum());
        assert_ne!(a.checksum(), c.checksum());
        assert_eq!(a.param_count(), b.param_count());
    }

    #[test]
    fn missing_input_is_an_error() {
        let ctx = BuildContext { image_channels: 1, conditional: false, pack: 1 };
        let mut net = Network::<f64>::build(&gen_spec(), ctx, 0).unwrap();
        let mut tape = Tape::new();
        let bound = net.bind(&mut tape, false);
        let z = tape.leaf(Tensor::filled([2, 1, 4, 4], 0.5), false);
        let r = net.forward(&mut tape, &bound, NetInputs { latent: Some(z), ..Default::default() }, Mode::Eval);
        assert!(r.is_err());
    }

    #[test]
    fn identity_toy_reproduces_input() {
        use LayerKind::*;
        let spec = ArchSpec::new(
            "id",
            Role::Generator,
            vec![
                LayerRow::new(InputZ, 1, (3, 3)),
                LayerRow::new(InputY, 0, (3, 3)),
                LayerRow::new(Conv, 1, (3, 3)).kernel(1).act(Activation::Tanh),
            ],
        );
        let ctx = BuildContext { image_channels: 1, conditional: false, pack: 1 };
        let mut net = Network::<f64>::build(&spec, ctx, 0).unwrap();
        // Input channels are [z, value, mask]; pass the value channel through.
        net.params_mut()[0] = Tensor::from_vec([1, 3, 1, 1], vec![0.0, 1.0, 0.0]).unwrap();
        net.spec.rows[2].activation = Activation::Identity;
        let mut tape = Tape::new();
        let bound = net.bind(&mut tape, false);
        let vals: Vec<f64> = (0..9).map(|i| i as f64 / 10.0 - 0.4).collect();
        let mut y = vals.clone();
        y.extend(std::iter::repeat_n(1.0, 9));
        let y = tape.leaf(Tensor::from_vec([2, 1, 3, 3], y).unwrap(), false);
        let z = tape.leaf(Tensor::filled([1, 1, 3, 3], 0.7), false);
        let out = net.forward_eval(&mut tape, &bound, NetInputs { latent: Some(z), conditioning: Some(y), image: None }).unwrap();
        assert_eq!(tape.value(out).data(), &vals[..]);
    }
}
