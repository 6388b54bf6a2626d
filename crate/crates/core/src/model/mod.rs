//! Architecture tables, the shipped catalog, and generator/discriminator
//! handles built from them.

pub mod arch;
pub mod catalog;
pub mod network;

pub use arch::{ArchSpec, LatentInjection, LayerKind, LayerRow, Norm, Role, Scaling, Skip};
pub use network::{BnUpdates, Bound, BuildContext, InputKind, Mode, NetInputs, Network};

use crate::error::{Error, Result};
use crate::nn::{NodeId, Tape};
use crate::objectives::LatentSpec;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use network::Step;

/// Anything that maps an encoded constraint batch and a latent batch to
/// images. Implemented by [`Generator`] and by test oracles.
pub trait ConditionalGenerator<T: Scalar> {
    /// `(height, width, channels)` of generated images.
    fn image_shape(&self) -> (usize, usize, usize);
    fn latent(&self) -> LatentSpec;
    /// `conditioning` is `[c+1, n, h, w]`, `z` is `[zc, n, zh, zw]`; returns
    /// `[c, n, h, w]` in `[-1, 1]`.
    fn generate(&self, conditioning: &Tensor<T>, z: &Tensor<T>) -> Result<Tensor<T>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator<T> {
    net: Network<T>,
    latent: LatentSpec,
}

impl<T: Scalar> Generator<T> {
    pub fn build(spec: &ArchSpec, image_channels: usize, latent: LatentSpec, seed: u64) -> Result<Self> {
        if spec.role != Role::Generator {
            return Err(Error::invalid(format!("`{}` is not a generator", spec.name)));
        }
        let net = Network::build(
            spec,
            BuildContext {
                image_channels,
                conditional: false,
                pack: 1,
            },
            seed,
        )?;
        if net.output_shape().0 != image_channels {
            return Err(Error::invalid(format!(
                "`{}` emits {} channels, images have {}",
                spec.name,
                net.output_shape().0,
                image_channels
            )));
        }
        let want = net
            .input_shape(InputKind::Latent)
            .ok_or_else(|| Error::invalid(format!("`{}` has no latent input", spec.name)))?;
        if (latent.channels, latent.height, latent.width) != want {
            return Err(Error::shape(want, (latent.channels, latent.height, latent.width)));
        }
        Ok(Generator { net, latent })
    }

    pub fn network(&self) -> &Network<T> {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network<T> {
        &mut self.net
    }

    /// Differentiable forward pass.
    pub fn forward(
        &mut self,
        tape: &mut Tape<T>,
        bound: &Bound,
        conditioning: NodeId,
        z: NodeId,
        mode: Mode,
    ) -> Result<NodeId> {
        self.net.forward(
            tape,
            bound,
            NetInputs {
                latent: Some(z),
                conditioning: Some(conditioning),
                image: None,
            },
            mode,
        )
    }
}

impl<T: Scalar> ConditionalGenerator<T> for Generator<T> {
    fn image_shape(&self) -> (usize, usize, usize) {
        let (c, h, w) = self.net.output_shape();
        (h, w, c)
    }

    fn latent(&self) -> LatentSpec {
        self.latent
    }

    fn generate(&self, conditioning: &Tensor<T>, z: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bound = self.net.bind(&mut tape, false);
        let y = tape.leaf(conditioning.clone(), false);
        let zn = tape.leaf(z.clone(), false);
        let out = self.net.forward_eval(
            &mut tape,
            &bound,
            NetInputs {
                latent: Some(zn),
                conditioning: Some(y),
                image: None,
            },
        )?;
        Ok(tape.value(out).clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator<T> {
    net: Network<T>,
}

impl<T: Scalar> Discriminator<T> {
    /// `pack` must be 1 or 2. A conditional discriminator also takes the
    /// dense constraint values channel-concatenated to the image.
    pub fn build(spec: &ArchSpec, image_channels: usize, conditional: bool, pack: usize, seed: u64) -> Result<Self> {
        if spec.role != Role::Discriminator {
            return Err(Error::invalid(format!("`{}` is not a discriminator", spec.name)));
        }
        if !(1..=2).contains(&pack) {
            return Err(Error::invalid(format!("pack must be 1 or 2, got {pack}")));
        }
        if conditional && !spec.rows.iter().any(|r| r.kind == LayerKind::InputY) {
            return Err(Error::invalid(format!("`{}` has no conditioning input", spec.name)));
        }
        let net = Network::build(
            spec,
            BuildContext {
                image_channels,
                conditional,
                pack,
            },
            seed,
        )?;
        if net.output_shape().0 != 1 {
            return Err(Error::invalid(format!("`{}` must emit one channel", spec.name)));
        }
        Ok(Discriminator { net })
    }

    pub fn network(&self) -> &Network<T> {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network<T> {
        &mut self.net
    }

    pub fn pack(&self) -> usize {
        self.net.context().pack
    }

    pub fn conditional(&self) -> bool {
        self.net.context().conditional
    }

    /// Channels expected on the image input.
    pub fn input_channels(&self) -> usize {
        self.net.input_channels(InputKind::Image).unwrap_or(0)
    }

    /// Spatial size of the probability grid.
    pub fn output_grid(&self) -> (usize, usize) {
        let (_, h, w) = self.net.output_shape();
        (h, w)
    }

    pub fn forward(
        &mut self,
        tape: &mut Tape<T>,
        bound: &Bound,
        x: NodeId,
        y: Option<NodeId>,
        mode: Mode,
    ) -> Result<NodeId> {
        if self.conditional() != y.is_some() {
            return Err(Error::invalid("conditioning input must be given iff the discriminator is conditional"));
        }
        self.net.forward(
            tape,
            bound,
            NetInputs {
                latent: None,
                conditioning: y,
                image: Some(x),
            },
            mode,
        )
    }

    /// Probabilities `[1, n, gh, gw]` with running statistics.
    pub fn evaluate(&self, x: &Tensor<T>, y: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bound = self.net.bind(&mut tape, false);
        let xn = tape.leaf(x.clone(), false);
        let yn = y.map(|t| tape.leaf(t.clone(), false));
        let out = self.net.forward_eval(
            &mut tape,
            &bound,
            NetInputs {
                latent: None,
                conditioning: yn,
                image: Some(xn),
            },
        )?;
        Ok(tape.value(out).clone())
    }
}

/// Channel-wise concatenation of two equally shaped batches, `a` first.
pub fn pac_stack<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::shape(a.shape(), b.shape()));
    }
    Tensor::concat_channels(&[a, b])
}

/// Inverse of [`pac_stack`].
pub fn pac_unstack<T: Scalar>(packed: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let c = packed.channels();
    if c % 2 != 0 {
        return Err(Error::invalid(format!("cannot unstack {c} channels into two halves")));
    }
    let mut parts = packed.split_channels(&[c / 2, c / 2])?;
    let b = parts.pop().expect("two parts");
    let a = parts.pop().expect("two parts");
    Ok((a, b))
}

/// Theoretical receptive field along the main chain, per spatial axis.
/// Skip links are ignored; a flattening dense row is an error.
pub fn receptive_field(spec: &ArchSpec) -> Result<(usize, usize)> {
    let (plan, _) = network::plan_shapes(spec, 1, true, 1)?;
    let mut r = 1.0f64;
    let mut j = 1.0f64;
    for e in &plan {
        match &e.step {
            Step::Input { .. } | Step::Skipped => {}
            Step::DenseFlat { .. } => {
                return Err(spec.row_error(e.row, "receptive field undefined through a fully connected layer"));
            }
            Step::Conv {
                transposed,
                kernel,
                stride,
                dilation,
                ..
            } => {
                r += ((kernel - 1) * dilation) as f64 * j;
                if *transposed {
                    j /= *stride as f64;
                } else {
                    j *= *stride as f64;
                }
            }
            Step::Residual {
                kernel,
                repeats,
                dilation,
                ..
            } => {
                r += (*repeats * (kernel - 1) * dilation) as f64 * j;
            }
        }
    }
    let r = r.ceil() as usize;
    Ok((r, r))
}
