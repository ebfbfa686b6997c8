use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::kernels::{self, ConvGeom};
use super::tensor::{Scalar, Tensor};
use super::NamedTensor;
use crate::error::{Error, Result};

/// Shape and sampling pattern of one convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// 3 or 1.
    pub kernel: usize,
    pub padding: usize,
    pub dilation: usize,
    /// Per-channel 3x3 followed by a 1x1 pointwise mix.
    pub depthwise_separable: bool,
}

impl ConvSpec {
    /// 3x3 convolution whose padding equals its dilation, which keeps the
    /// spatial size unchanged.
    pub fn same3x3(in_channels: usize, out_channels: usize, dilation: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: 3,
            padding: dilation,
            dilation,
            depthwise_separable: false,
        }
    }

    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: 1,
            padding: 0,
            dilation: 1,
            depthwise_separable: false,
        }
    }

    pub fn separable3x3(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec {
            depthwise_separable: true,
            ..Self::same3x3(in_channels, out_channels, 1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel != 1 && self.kernel != 3 {
            return Err(Error::Shape(format!("unsupported kernel {}", self.kernel)));
        }
        if self.depthwise_separable && self.kernel != 3 {
            return Err(Error::Shape("depthwise-separable convolutions are 3x3".into()));
        }
        if self.dilation == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Shape(format!("degenerate conv spec {self:?}")));
        }
        Ok(())
    }

    fn geom(&self, input: (usize, usize, usize)) -> Result<ConvGeom> {
        if input.0 != self.in_channels {
            return Err(Error::Shape(format!(
                "layer expects {} input channels, got {}",
                self.in_channels, input.0
            )));
        }
        ConvGeom::new(input, self.out_channels, self.kernel, self.padding, self.dilation)
    }
}

/// Plain dense convolution with optional bias of `[out]`.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    spec.validate()?;
    let g = spec.geom(input.chw()?)?;
    if spec.depthwise_separable {
        return Err(Error::Usage(
            "conv2d_forward is dense; use a separable Layer for depthwise-separable specs".into(),
        ));
    }
    let k = spec.kernel;
    if weight.dims() != [spec.out_channels, spec.in_channels, k, k] {
        return Err(Error::Shape(format!("weight dims {:?} do not match {spec:?}", weight.dims())));
    }
    let zero = vec![T::zero(); spec.out_channels];
    let bias = bias.map(|b| b.data()).unwrap_or(&zero);
    Tensor::from_vec(
        &[spec.out_channels, g.h_out, g.w_out],
        kernels::conv_forward(input.data(), weight.data(), bias, &g),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T: Scalar = f32> {
    Conv {
        name: String,
        spec: ConvSpec,
        weight: Tensor<T>,
        bias: Tensor<T>,
    },
    Separable {
        name: String,
        spec: ConvSpec,
        depthwise: Tensor<T>,
        depthwise_bias: Tensor<T>,
        pointwise: Tensor<T>,
        pointwise_bias: Tensor<T>,
    },
    Relu,
    GlobalMaxPool,
}

impl<T: Scalar> Layer<T> {
    /// He-normal weights, zero biases.
    pub fn conv(name: &str, spec: ConvSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let k = spec.kernel;
        if spec.depthwise_separable {
            let (c, o) = (spec.in_channels, spec.out_channels);
            Ok(Layer::Separable {
                name: name.to_string(),
                spec,
                depthwise: he_normal(&[c, 1, 3, 3], 9, rng),
                depthwise_bias: Tensor::zeros(&[c]),
                pointwise: he_normal(&[o, c, 1, 1], c, rng),
                pointwise_bias: Tensor::zeros(&[o]),
            })
        } else {
            Ok(Layer::Conv {
                name: name.to_string(),
                spec,
                weight: he_normal(&[spec.out_channels, spec.in_channels, k, k], spec.in_channels * k * k, rng),
                bias: Tensor::zeros(&[spec.out_channels]),
            })
        }
    }

    pub fn spec(&self) -> Option<&ConvSpec> {
        match self {
            Layer::Conv { spec, .. } | Layer::Separable { spec, .. } => Some(spec),
            _ => None,
        }
    }

    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        match self {
            Layer::Conv { name, weight, bias, .. } => {
                vec![(format!("{name}.weight"), weight), (format!("{name}.bias"), bias)]
            }
            Layer::Separable {
                name,
                depthwise,
                depthwise_bias,
                pointwise,
                pointwise_bias,
                ..
            } => vec![
                (format!("{name}.depthwise.weight"), depthwise),
                (format!("{name}.depthwise.bias"), depthwise_bias),
                (format!("{name}.pointwise.weight"), pointwise),
                (format!("{name}.pointwise.bias"), pointwise_bias),
            ],
            Layer::Relu | Layer::GlobalMaxPool => vec![],
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv { weight, bias, .. } => vec![weight, bias],
            Layer::Separable {
                depthwise,
                depthwise_bias,
                pointwise,
                pointwise_bias,
                ..
            } => vec![depthwise, depthwise_bias, pointwise, pointwise_bias],
            Layer::Relu | Layer::GlobalMaxPool => vec![],
        }
    }

    fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Record<T>)> {
        match self {
            Layer::Conv { spec, weight, bias, .. } => {
                let g = spec.geom(x.chw()?)?;
                let out = kernels::conv_forward(x.data(), weight.data(), bias.data(), &g);
                Ok((Tensor::from_vec(&[g.out_c, g.h_out, g.w_out], out)?, Record::Conv(g)))
            }
            Layer::Separable {
                spec,
                depthwise,
                depthwise_bias,
                pointwise,
                pointwise_bias,
                ..
            } => {
                let (c, h, w) = x.chw()?;
                if c != spec.in_channels {
                    return Err(Error::Shape(format!(
                        "layer expects {} input channels, got {c}",
                        spec.in_channels
                    )));
                }
                let gd = ConvGeom::new((c, h, w), c, 3, spec.padding, spec.dilation)?;
                let mid = kernels::depthwise_forward(x.data(), depthwise.data(), depthwise_bias.data(), &gd);
                let gp = ConvGeom::new((c, gd.h_out, gd.w_out), spec.out_channels, 1, 0, 1)?;
                let out = kernels::conv_forward(&mid, pointwise.data(), pointwise_bias.data(), &gp);
                Ok((
                    Tensor::from_vec(&[gp.out_c, gp.h_out, gp.w_out], out)?,
                    Record::Separable { gd, gp, mid },
                ))
            }
            Layer::Relu => Ok((kernels::relu(x), Record::Relu)),
            Layer::GlobalMaxPool => {
                let (out, idx) = kernels::global_maxpool(x)?;
                Ok((out, Record::MaxPool(idx)))
            }
        }
    }

    fn backward(&self, x: &Tensor<T>, rec: &Record<T>, grad_out: &Tensor<T>, grads: &mut [Tensor<T>]) -> Result<Tensor<T>> {
        match (self, rec) {
            (Layer::Conv { weight, .. }, Record::Conv(g)) => {
                let (gw, gb) = grads.split_at_mut(1);
                let gi = kernels::conv_backward(
                    x.data(),
                    weight.data(),
                    grad_out.data(),
                    g,
                    gw[0].data_mut(),
                    gb[0].data_mut(),
                );
                Tensor::from_vec(x.dims(), gi)
            }
            (
                Layer::Separable {
                    depthwise, pointwise, ..
                },
                Record::Separable { gd, gp, mid },
            ) => {
                let (gdw, rest) = grads.split_at_mut(1);
                let (gdb, rest) = rest.split_at_mut(1);
                let (gpw, gpb) = rest.split_at_mut(1);
                let g_mid = kernels::conv_backward(
                    mid,
                    pointwise.data(),
                    grad_out.data(),
                    gp,
                    gpw[0].data_mut(),
                    gpb[0].data_mut(),
                );
                let gi = kernels::depthwise_backward(
                    x.data(),
                    depthwise.data(),
                    &g_mid,
                    gd,
                    gdw[0].data_mut(),
                    gdb[0].data_mut(),
                );
                Tensor::from_vec(x.dims(), gi)
            }
            (Layer::Relu, Record::Relu) => {
                Tensor::from_vec(x.dims(), kernels::relu_backward(x.data(), grad_out.data()))
            }
            (Layer::GlobalMaxPool, Record::MaxPool(idx)) => {
                let (c, h, w) = x.chw()?;
                let mut gi = Tensor::zeros(&[c, h, w]);
                let data = gi.data_mut();
                for (ch, &at) in idx.iter().enumerate() {
                    data[ch * h * w + at] = grad_out.data()[ch];
                }
                Ok(gi)
            }
            _ => Err(Error::Usage("forward record does not match layer".into())),
        }
    }

    fn cast<U: Scalar>(&self) -> Layer<U> {
        match self {
            Layer::Conv { name, spec, weight, bias } => Layer::Conv {
                name: name.clone(),
                spec: *spec,
                weight: weight.cast(),
                bias: bias.cast(),
            },
            Layer::Separable {
                name,
                spec,
                depthwise,
                depthwise_bias,
                pointwise,
                pointwise_bias,
            } => Layer::Separable {
                name: name.clone(),
                spec: *spec,
                depthwise: depthwise.cast(),
                depthwise_bias: depthwise_bias.cast(),
                pointwise: pointwise.cast(),
                pointwise_bias: pointwise_bias.cast(),
            },
            Layer::Relu => Layer::Relu,
            Layer::GlobalMaxPool => Layer::GlobalMaxPool,
        }
    }
}

fn he_normal<T: Scalar>(dims: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| T::from_f64(normal.sample(rng))).collect();
    Tensor::from_vec(dims, data).expect("dims match")
}

#[derive(Debug, Clone)]
enum Record<T> {
    Conv(ConvGeom),
    Separable { gd: ConvGeom, gp: ConvGeom, mid: Vec<T> },
    Relu,
    MaxPool(Vec<usize>),
}

#[derive(Debug, Clone)]
struct Tape<T: Scalar> {
    inputs: Vec<Tensor<T>>,
    records: Vec<Record<T>>,
}

/// Parameter gradients, one tensor per entry of [`Network::params`].
pub type Gradients<T = f32> = Vec<Tensor<T>>;

/// A feed-forward stack of layers with a single recorded forward pass.
#[derive(Debug, Clone)]
pub struct Network<T: Scalar = f32> {
    layers: Vec<Layer<T>>,
    tape: Option<Tape<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Network { layers, tape: None }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur)?.0;
        }
        Ok(cur)
    }

    /// Forward pass that keeps every intermediate for a following
    /// [`Network::backward`]. Replaces any earlier record.
    pub fn forward_record(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut records = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (next, rec) = layer.forward(&cur)?;
            inputs.push(cur);
            records.push(rec);
            cur = next;
        }
        self.tape = Some(Tape { inputs, records });
        Ok(cur)
    }

    /// Reverse-mode pass over the recorded forward. Parameter gradients are
    /// added into `grads`; the gradient with respect to the network input is
    /// returned. Consumes the record.
    pub fn backward(&mut self, grad_out: &Tensor<T>, grads: &mut Gradients<T>) -> Result<Tensor<T>> {
        let tape = self
            .tape
            .take()
            .ok_or_else(|| Error::Usage("backward called without a recorded forward pass".into()))?;
        if grads.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} gradient tensors, got {}",
                self.param_count(),
                grads.len()
            )));
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for layer in &self.layers {
            offsets.push(off);
            off += layer.params().len();
        }
        let mut g = grad_out.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let n = layer.params().len();
            let slot = &mut grads[offsets[l]..offsets[l] + n];
            g = layer.backward(&tape.inputs[l], &tape.records[l], &g, slot)?;
        }
        Ok(g)
    }

    pub fn has_record(&self) -> bool {
        self.tape.is_some()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params().len()).sum()
    }

    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        self.params().iter().map(|(_, t)| Tensor::zeros(t.dims())).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self.layers.iter().map(|l| l.cast()).collect(),
            tape: None,
        }
    }

    pub fn named_tensors(&self) -> Vec<NamedTensor> {
        self.params()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                name,
                tensor: t.cast(),
            })
            .collect()
    }

    /// Replaces parameters by name; every parameter must be present with
    /// matching dims.
    pub fn load_named(&mut self, tensors: &[NamedTensor]) -> Result<()> {
        let names: Vec<String> = self.params().into_iter().map(|(n, _)| n).collect();
        let mut params = self.params_mut();
        for (name, slot) in names.iter().zip(params.iter_mut()) {
            let src = tensors
                .iter()
                .find(|t| &t.name == name)
                .ok_or_else(|| Error::Format(format!("weights lack tensor `{name}`")))?;
            if src.tensor.dims() != slot.dims() {
                return Err(Error::Format(format!(
                    "tensor `{name}` has dims {:?}, network expects {:?}",
                    src.tensor.dims(),
                    slot.dims()
                )));
            }
            **slot = src.tensor.cast();
        }
        Ok(())
    }
}
