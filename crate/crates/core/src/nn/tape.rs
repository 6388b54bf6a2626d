//! Reverse-mode differentiation over channel-major batch tensors.
//!
//! A [`Tape`] records every intermediate value of a forward pass. Calling
//! [`Tape::backward`] with seed gradients on one or more nodes walks the
//! record in reverse and returns the gradient of every node that needs one.

use crate::error::{Error, Result};
use crate::nn::conv::{col2im, im2col, ConvGeom};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const LEAKY_SLOPE: f64 = 0.2;
pub const NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "none",
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "-" | "none" | "linear" | "identity" => Activation::Identity,
            "relu" => Activation::Relu,
            "leaky" | "leakyrelu" => Activation::LeakyRelu,
            "tanh" => Activation::Tanh,
            "sigmoid" => Activation::Sigmoid,
            _ => return None,
        })
    }

    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Identity => v,
            Activation::Relu => v.max(T::zero()),
            Activation::LeakyRelu => {
                if v > T::zero() {
                    v
                } else {
                    v * T::of(LEAKY_SLOPE)
                }
            }
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => {
                if v >= T::zero() {
                    T::one() / (T::one() + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (T::one() + e)
                }
            }
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::of(LEAKY_SLOPE)
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

/// Which axes a normalisation layer pools statistics over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormGroup {
    /// Per channel over batch and space.
    Batch,
    /// Per channel and sample over space.
    Instance,
}

enum Op<T> {
    Leaf,
    Conv {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        geom: ConvGeom,
        cols: Option<Vec<T>>,
    },
    ConvTranspose {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        geom: ConvGeom,
    },
    Dense {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
    },
    Act {
        x: NodeId,
        kind: Activation,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Shift {
        x: NodeId,
    },
    Concat {
        parts: Vec<NodeId>,
        sizes: Vec<usize>,
    },
    Flatten {
        x: NodeId,
        chw: (usize, usize, usize),
    },
    Unflatten {
        x: NodeId,
    },
    Norm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        group: NormGroup,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        frozen: bool,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Batch statistics produced by a training-mode batch normalisation, used to
/// update running averages.
#[derive(Clone, Debug)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var_unbiased: Vec<T>,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn needs_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn any_grad(&self, ids: &[Option<NodeId>]) -> bool {
        ids.iter().flatten().any(|&i| self.nodes[i.0].needs_grad)
    }

    /// A leaf holding data. `needs_grad` marks parameters and any input whose
    /// gradient the caller wants back.
    pub fn leaf(&mut self, value: Tensor<T>, needs_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, needs_grad)
    }

    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        stride: usize,
        pad: usize,
        dilation: usize,
    ) -> Result<NodeId> {
        let [cin, n, h, wd] = self.value(x).shape();
        let [cout, wcin, k, k2] = self.value(w).shape();
        if wcin != cin || k != k2 {
            return Err(Error::shape([cout, cin, k, k], self.value(w).shape()));
        }
        let oh = ConvGeom::conv_out(h, k, stride, pad, dilation)
            .ok_or_else(|| Error::invalid(format!("kernel {k} too large for {h}x{wd}")))?;
        let ow = ConvGeom::conv_out(wd, k, stride, pad, dilation)
            .ok_or_else(|| Error::invalid(format!("kernel {k} too large for {h}x{wd}")))?;
        let geom = ConvGeom {
            kernel: k,
            stride,
            pad,
            dilation,
            large: (h, wd),
            small: (oh, ow),
        };
        let cols = im2col(self.value(x).data(), cin, n, &geom);
        let ncols = n * oh * ow;
        let rows = geom.rows(cin);
        let mut out = vec![T::zero(); cout * ncols];
        if let Some(b) = b {
            let bias = self.value(b).data();
            for (co, chunk) in out.chunks_mut(ncols).enumerate() {
                chunk.fill(bias[co]);
            }
        }
        T::gemm(
            cout,
            rows,
            ncols,
            T::one(),
            self.value(w).data(),
            rows as isize,
            1,
            &cols,
            ncols as isize,
            1,
            T::one(),
            &mut out,
            ncols as isize,
            1,
        );
        let needs = self.any_grad(&[Some(x), Some(w), b]);
        let keep = self.nodes[w.0].needs_grad;
        let value = Tensor::from_vec([cout, n, oh, ow], out)?;
        Ok(self.push(
            value,
            Op::Conv {
                x,
                w,
                b,
                geom,
                cols: keep.then_some(cols),
            },
            needs,
        ))
    }

    /// Transposed convolution. Weights are `[in, out, k, k]`.
    #[allow(clippy::too_many_arguments)]
    pub fn conv_transpose2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        stride: usize,
        pad: usize,
        dilation: usize,
        out_pad: usize,
    ) -> Result<NodeId> {
        let [cin, n, h, wd] = self.value(x).shape();
        let [wcin, cout, k, k2] = self.value(w).shape();
        if wcin != cin || k != k2 {
            return Err(Error::shape([cin, cout, k, k], self.value(w).shape()));
        }
        let oh = ConvGeom::conv_t_out(h, k, stride, pad, dilation, out_pad)
            .ok_or_else(|| Error::invalid("transposed convolution output is empty"))?;
        let ow = ConvGeom::conv_t_out(wd, k, stride, pad, dilation, out_pad)
            .ok_or_else(|| Error::invalid("transposed convolution output is empty"))?;
        let geom = ConvGeom {
            kernel: k,
            stride,
            pad,
            dilation,
            large: (oh, ow),
            small: (h, wd),
        };
        let ncols = n * h * wd;
        let rows = geom.rows(cout);
        // cols[cout*k*k, n*h*w] = W^T x
        let mut cols = vec![T::zero(); rows * ncols];
        T::gemm(
            rows,
            cin,
            ncols,
            T::one(),
            self.value(w).data(),
            1,
            rows as isize,
            self.value(x).data(),
            ncols as isize,
            1,
            T::zero(),
            &mut cols,
            ncols as isize,
            1,
        );
        let mut out = col2im(&cols, cout, n, &geom);
        if let Some(b) = b {
            let bias = self.value(b).data();
            let plane = n * oh * ow;
            for (co, chunk) in out.chunks_mut(plane).enumerate() {
                for v in chunk {
                    *v = *v + bias[co];
                }
            }
        }
        let needs = self.any_grad(&[Some(x), Some(w), b]);
        let value = Tensor::from_vec([cout, n, oh, ow], out)?;
        Ok(self.push(value, Op::ConvTranspose { x, w, b, geom }, needs))
    }

    /// Fully connected layer on `[features, n, 1, 1]` inputs. Weights are
    /// `[out, features, 1, 1]`.
    pub fn dense(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let [f, n, h, wd] = self.value(x).shape();
        let [out_f, wf, _, _] = self.value(w).shape();
        if h != 1 || wd != 1 || wf != f {
            return Err(Error::shape([out_f, f, 1, 1], self.value(w).shape()));
        }
        let mut out = vec![T::zero(); out_f * n];
        if let Some(b) = b {
            let bias = self.value(b).data();
            for (o, chunk) in out.chunks_mut(n).enumerate() {
                chunk.fill(bias[o]);
            }
        }
        T::gemm(
            out_f,
            f,
            n,
            T::one(),
            self.value(w).data(),
            f as isize,
            1,
            self.value(x).data(),
            n as isize,
            1,
            T::one(),
            &mut out,
            n as isize,
            1,
        );
        let needs = self.any_grad(&[Some(x), Some(w), b]);
        let value = Tensor::from_vec([out_f, n, 1, 1], out)?;
        Ok(self.push(value, Op::Dense { x, w, b }, needs))
    }

    pub fn activation(&mut self, x: NodeId, kind: Activation) -> NodeId {
        if kind == Activation::Identity {
            return x;
        }
        let value = self.value(x).map(|v| kind.apply(v));
        let needs = self.nodes[x.0].needs_grad;
        self.push(value, Op::Act { x, kind }, needs)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(self.value(a).shape(), self.value(b).shape()));
        }
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        let needs = self.any_grad(&[Some(a), Some(b)]);
        Ok(self.push(value, Op::Add { a, b }, needs))
    }

    /// Adds a constant tensor (e.g. input noise). Gradient passes through.
    pub fn shift(&mut self, x: NodeId, offset: &Tensor<T>) -> Result<NodeId> {
        if self.value(x).shape() != offset.shape() {
            return Err(Error::shape(self.value(x).shape(), offset.shape()));
        }
        let mut value = self.value(x).clone();
        value.add_assign(offset);
        let needs = self.nodes[x.0].needs_grad;
        Ok(self.push(value, Op::Shift { x }, needs))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let refs: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Tensor::concat_channels(&refs)?;
        let sizes = refs.iter().map(|t| t.channels()).collect();
        let ids: Vec<Option<NodeId>> = parts.iter().map(|&p| Some(p)).collect();
        let needs = self.any_grad(&ids);
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
                sizes,
            },
            needs,
        ))
    }

    pub fn flatten(&mut self, x: NodeId) -> NodeId {
        let [c, _, h, w] = self.value(x).shape();
        let value = self.value(x).flatten_samples();
        let needs = self.nodes[x.0].needs_grad;
        self.push(value, Op::Flatten { x, chw: (c, h, w) }, needs)
    }

    pub fn unflatten(&mut self, x: NodeId, c: usize, h: usize, w: usize) -> Result<NodeId> {
        let value = self.value(x).unflatten_samples(c, h, w)?;
        let needs = self.nodes[x.0].needs_grad;
        Ok(self.push(value, Op::Unflatten { x }, needs))
    }

    /// Normalisation with learned per-channel scale and shift.
    ///
    /// With `running = Some((mean, var))` the given statistics are used
    /// (batch-norm inference); otherwise statistics are computed from the
    /// input. Returns the batch statistics when they were computed over a
    /// [`NormGroup::Batch`] grouping.
    pub fn normalize(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        group: NormGroup,
        running: Option<(&[T], &[T])>,
    ) -> Result<(NodeId, Option<BatchStats<T>>)> {
        let [c, n, h, w] = self.value(x).shape();
        if self.value(gamma).len() != c || self.value(beta).len() != c {
            return Err(Error::shape(c, self.value(gamma).len()));
        }
        let eps = T::of(NORM_EPS);
        let (groups, glen) = match group {
            NormGroup::Batch => (c, n * h * w),
            NormGroup::Instance => (c * n, h * w),
        };
        let xs = self.value(x).data();
        let mut xhat = vec![T::zero(); xs.len()];
        let mut inv_std = vec![T::zero(); groups];
        let mut stats = None;
        let frozen = running.is_some();
        if let Some((rm, rv)) = running {
            for g in 0..groups {
                let is = T::one() / (rv[g] + eps).sqrt();
                inv_std[g] = is;
                for i in g * glen..(g + 1) * glen {
                    xhat[i] = (xs[i] - rm[g]) * is;
                }
            }
        } else {
            let len = T::from_usize(glen).unwrap();
            let mut means = Vec::with_capacity(groups);
            let mut vars = Vec::with_capacity(groups);
            for g in 0..groups {
                let run = &xs[g * glen..(g + 1) * glen];
                let mean = run.iter().copied().sum::<T>() / len;
                let var = run.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / len;
                let is = T::one() / (var + eps).sqrt();
                inv_std[g] = is;
                for (o, &v) in xhat[g * glen..(g + 1) * glen].iter_mut().zip(run) {
                    *o = (v - mean) * is;
                }
                means.push(mean);
                let unbiased = if glen > 1 {
                    var * len / T::from_usize(glen - 1).unwrap()
                } else {
                    var
                };
                vars.push(unbiased);
            }
            if group == NormGroup::Batch {
                stats = Some(BatchStats {
                    mean: means,
                    var_unbiased: vars,
                });
            }
        }
        let gm = self.value(gamma).data();
        let bt = self.value(beta).data();
        let mut out = vec![T::zero(); xs.len()];
        for g in 0..groups {
            let ch = match group {
                NormGroup::Batch => g,
                NormGroup::Instance => g / n,
            };
            for i in g * glen..(g + 1) * glen {
                out[i] = gm[ch] * xhat[i] + bt[ch];
            }
        }
        let needs = self.any_grad(&[Some(x), Some(gamma), Some(beta)]);
        let value = Tensor::from_vec([c, n, h, w], out)?;
        let id = self.push(
            value,
            Op::Norm {
                x,
                gamma,
                beta,
                group,
                xhat,
                inv_std,
                frozen,
            },
            needs,
        );
        Ok((id, stats))
    }

    /// Reverse pass. `seeds` are gradients of the scalar objective with
    /// respect to the given nodes (summed when a node appears twice).
    pub fn backward(&self, seeds: Vec<(NodeId, Tensor<T>)>) -> Result<Gradients<T>> {
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (id, g) in seeds {
            if g.shape() != self.value(id).shape() {
                return Err(Error::shape(self.value(id).shape(), g.shape()));
            }
            accumulate(&mut grads, id, g);
        }
        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(gout) = grads[i].take() else {
                continue;
            };
            self.propagate(node, &gout, &mut grads)?;
            grads[i] = Some(gout);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn propagate(&self, node: &Node<T>, gout: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Conv { x, w, b, geom, cols } => {
                let [cin, n, _, _] = self.value(*x).shape();
                let cout = gout.channels();
                let ncols = n * geom.small_len();
                let rows = geom.rows(cin);
                let gd = gout.data();
                if let Some(b) = b {
                    if self.wants(*b) {
                        accumulate(grads, *b, channel_sums(gout));
                    }
                }
                if self.wants(*w) {
                    let cols = cols.as_ref().expect("columns kept for weight gradient");
                    let mut gw = vec![T::zero(); cout * rows];
                    T::gemm(
                        cout, ncols, rows, T::one(), gd, ncols as isize, 1, cols, 1, ncols as isize,
                        T::zero(), &mut gw, rows as isize, 1,
                    );
                    accumulate(grads, *w, Tensor::from_vec(self.value(*w).shape(), gw)?);
                }
                if self.wants(*x) {
                    let mut gcols = vec![T::zero(); rows * ncols];
                    T::gemm(
                        rows,
                        cout,
                        ncols,
                        T::one(),
                        self.value(*w).data(),
                        1,
                        rows as isize,
                        gd,
                        ncols as isize,
                        1,
                        T::zero(),
                        &mut gcols,
                        ncols as isize,
                        1,
                    );
                    let gx = col2im(&gcols, cin, n, geom);
                    accumulate(grads, *x, Tensor::from_vec(self.value(*x).shape(), gx)?);
                }
            }
            Op::ConvTranspose { x, w, b, geom } => {
                let [cin, n, _, _] = self.value(*x).shape();
                let cout = gout.channels();
                let ncols = n * geom.small_len();
                let rows = geom.rows(cout);
                if let Some(b) = b {
                    if self.wants(*b) {
                        accumulate(grads, *b, channel_sums(gout));
                    }
                }
                let gcols = im2col(gout.data(), cout, n, geom);
                if self.wants(*w) {
                    // gW[cin, rows] = x[cin, ncols] * gcols^T
                    let mut gw = vec![T::zero(); cin * rows];
                    T::gemm(
                        cin,
                        ncols,
                        rows,
                        T::one(),
                        self.value(*x).data(),
                        ncols as isize,
                        1,
                        &gcols,
                        1,
                        ncols as isize,
                        T::zero(),
                        &mut gw,
                        rows as isize,
                        1,
                    );
                    accumulate(grads, *w, Tensor::from_vec(self.value(*w).shape(), gw)?);
                }
                if self.wants(*x) {
                    let mut gx = vec![T::zero(); cin * ncols];
                    T::gemm(
                        cin,
                        rows,
                        ncols,
                        T::one(),
                        self.value(*w).data(),
                        rows as isize,
                        1,
                        &gcols,
                        ncols as isize,
                        1,
                        T::zero(),
                        &mut gx,
                        ncols as isize,
                        1,
                    );
                    accumulate(grads, *x, Tensor::from_vec(self.value(*x).shape(), gx)?);
                }
            }
            Op::Dense { x, w, b } => {
                let [f, n, _, _] = self.value(*x).shape();
                let out_f = gout.channels();
                let gd = gout.data();
                if let Some(b) = b {
                    if self.wants(*b) {
                        accumulate(grads, *b, channel_sums(gout));
                    }
                }
                if self.wants(*w) {
                    let mut gw = vec![T::zero(); out_f * f];
                    T::gemm(
                        out_f,
                        n,
                        f,
                        T::one(),
                        gd,
                        n as isize,
                        1,
                        self.value(*x).data(),
                        1,
                        n as isize,
                        T::zero(),
                        &mut gw,
                        f as isize,
                        1,
                    );
                    accumulate(grads, *w, Tensor::from_vec(self.value(*w).shape(), gw)?);
                }
                if self.wants(*x) {
                    let mut gx = vec![T::zero(); f * n];
                    T::gemm(
                        f,
                        out_f,
                        n,
                        T::one(),
                        self.value(*w).data(),
                        1,
                        f as isize,
                        gd,
                        n as isize,
                        1,
                        T::zero(),
                        &mut gx,
                        n as isize,
                        1,
                    );
                    accumulate(grads, *x, Tensor::from_vec(self.value(*x).shape(), gx)?);
                }
            }
            Op::Act { x, kind } => {
                let xs = self.value(*x).data();
                let ys = node.value.data();
                let gx: Vec<T> = gout
                    .data()
                    .iter()
                    .zip(xs.iter().zip(ys))
                    .map(|(&g, (&xv, &yv))| g * kind.derivative(xv, yv))
                    .collect();
                accumulate(grads, *x, Tensor::from_vec(gout.shape(), gx)?);
            }
            Op::Add { a, b } => {
                if self.wants(*a) {
                    accumulate(grads, *a, gout.clone());
                }
                if self.wants(*b) {
                    accumulate(grads, *b, gout.clone());
                }
            }
            Op::Shift { x } => accumulate(grads, *x, gout.clone()),
            Op::Concat { parts, sizes } => {
                let pieces = gout.split_channels(sizes)?;
                for (p, g) in parts.iter().zip(pieces) {
                    if self.wants(*p) {
                        accumulate(grads, *p, g);
                    }
                }
            }
            Op::Flatten { x, chw } => {
                accumulate(grads, *x, gout.unflatten_samples(chw.0, chw.1, chw.2)?);
            }
            Op::Unflatten { x } => accumulate(grads, *x, gout.flatten_samples()),
            Op::Norm {
                x,
                gamma,
                beta,
                group,
                xhat,
                inv_std,
                frozen,
            } => {
                let [c, n, h, w] = gout.shape();
                let (groups, glen) = match group {
                    NormGroup::Batch => (c, n * h * w),
                    NormGroup::Instance => (c * n, h * w),
                };
                let chan = |g: usize| match group {
                    NormGroup::Batch => g,
                    NormGroup::Instance => g / n,
                };
                let gd = gout.data();
                let gm = self.value(*gamma).data();
                let mut ggamma = vec![T::zero(); c];
                let mut gbeta = vec![T::zero(); c];
                let mut gsum = vec![T::zero(); groups];
                let mut gdot = vec![T::zero(); groups];
                for g in 0..groups {
                    let mut s = T::zero();
                    let mut d = T::zero();
                    for i in g * glen..(g + 1) * glen {
                        s = s + gd[i];
                        d = d + gd[i] * xhat[i];
                    }
                    gsum[g] = s;
                    gdot[g] = d;
                    ggamma[chan(g)] = ggamma[chan(g)] + d;
                    gbeta[chan(g)] = gbeta[chan(g)] + s;
                }
                if self.wants(*gamma) {
                    accumulate(grads, *gamma, Tensor::from_vec(self.value(*gamma).shape(), ggamma)?);
                }
                if self.wants(*beta) {
                    accumulate(grads, *beta, Tensor::from_vec(self.value(*beta).shape(), gbeta)?);
                }
                if self.wants(*x) {
                    let mut gx = vec![T::zero(); gd.len()];
                    let len = T::from_usize(glen).unwrap();
                    for g in 0..groups {
                        let scale = gm[chan(g)] * inv_std[g];
                        for i in g * glen..(g + 1) * glen {
                            gx[i] = if *frozen {
                                scale * gd[i]
                            } else {
                                scale * (gd[i] - gsum[g] / len - xhat[i] * gdot[g] / len)
                            };
                        }
                    }
                    accumulate(grads, *x, Tensor::from_vec(gout.shape(), gx)?);
                }
            }
        }
        Ok(())
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], id: NodeId, g: Tensor<T>) {
    match &mut grads[id.0] {
        Some(acc) => acc.add_assign(&g),
        slot => *slot = Some(g),
    }
}

fn channel_sums<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let c = t.channels();
    let plane = t.len() / c.max(1);
    let sums = t.data().chunks(plane).map(|ch| ch.iter().copied().sum()).collect();
    Tensor::from_vec([c, 1, 1, 1], sums).expect("bias shape")
}

/// Result of [`Tape::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads[id.0].as_ref()
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor<T>> {
        self.grads[id.0].take()
    }
}
