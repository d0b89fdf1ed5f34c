use rand::Rng as _;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d { out_channels: usize, kernel_size: usize, stride: usize },
    Relu,
    MaxPool1d { window: usize },
    Flatten,
    Dense { out_dim: usize },
    Dropout { rate: f64 },
    SigmoidDense { out_dim: usize },
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv1d { .. } | LayerSpec::Dense { .. } | LayerSpec::SigmoidDense { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool1d { .. } => "maxpool1d",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::SigmoidDense { .. } => "sigmoid_dense",
        }
    }

    /// Output shape for an input of `shape`, checking the layer can accept it.
    pub fn output_shape(&self, shape: &[usize]) -> Result<Vec<usize>> {
        let flat: usize = shape.iter().product();
        match *self {
            LayerSpec::Conv1d { out_channels, kernel_size, stride } => {
                let [_, len] = two_d(self, shape)?;
                if out_channels == 0 || kernel_size == 0 || stride == 0 {
                    return Err(Error::config("conv1d sizes must be positive"));
                }
                if kernel_size > len {
                    return Err(Error::shape(format!(
                        "conv1d kernel {kernel_size} exceeds input length {len}"
                    )));
                }
                Ok(vec![out_channels, (len - kernel_size) / stride + 1])
            }
            LayerSpec::MaxPool1d { window } => {
                let [c, len] = two_d(self, shape)?;
                if window == 0 || window > len {
                    return Err(Error::shape(format!("pool window {window} vs length {len}")));
                }
                Ok(vec![c, len / window])
            }
            LayerSpec::Relu => Ok(shape.to_vec()),
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
                }
                Ok(shape.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![flat]),
            LayerSpec::Dense { out_dim } | LayerSpec::SigmoidDense { out_dim } => {
                if out_dim == 0 || flat == 0 {
                    return Err(Error::config("dense layer with zero width"));
                }
                Ok(vec![out_dim])
            }
        }
    }
}

fn two_d(spec: &LayerSpec, shape: &[usize]) -> Result<[usize; 2]> {
    match shape {
        [c, l] => Ok([*c, *l]),
        _ => Err(Error::shape(format!(
            "{} expects a channels x length input, got {shape:?}",
            spec.name()
        ))),
    }
}

/// Valid cross-correlation of `input` (`C x L`) with `kernel` (`O x C x K`).
pub fn conv1d(input: &Tensor, kernel: &Tensor, bias: &[f64], stride: usize) -> Result<Tensor> {
    let (&[c, len], &[o, kc, k]) = (input.shape.as_slice(), kernel.shape.as_slice()) else {
        return Err(Error::shape("conv1d expects C x L input and O x C x K kernel"));
    };
    if kc != c || bias.len() != o || stride == 0 || k == 0 || k > len {
        return Err(Error::shape(format!(
            "conv1d mismatch: input {:?}, kernel {:?}, bias {}, stride {stride}",
            input.shape,
            kernel.shape,
            bias.len()
        )));
    }
    let out_len = (len - k) / stride + 1;
    let mut out = vec![0.0; o * out_len];
    conv_forward(&input.data, c, len, &kernel.data, bias, o, k, stride, &mut out);
    Tensor::new(vec![o, out_len], out)
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(
    x: &[f64],
    c: usize,
    len: usize,
    w: &[f64],
    b: &[f64],
    o: usize,
    k: usize,
    stride: usize,
    out: &mut [f64],
) {
    let out_len = out.len() / o;
    for oc in 0..o {
        let row = &mut out[oc * out_len..(oc + 1) * out_len];
        row.fill(b[oc]);
        for ic in 0..c {
            let wk = &w[(oc * c + ic) * k..(oc * c + ic + 1) * k];
            let xs = &x[ic * len..(ic + 1) * len];
            for (t, r) in row.iter_mut().enumerate() {
                let seg = &xs[t * stride..t * stride + k];
                *r += wk.iter().zip(seg).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-sample forward state a layer needs for its backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Aux {
    None,
    Argmax(Vec<usize>),
    Mask(Vec<f64>),
}

/// A layer with its parameters (weights first, then biases).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    pub params: Vec<f64>,
}

impl Layer {
    pub fn new(spec: LayerSpec, in_shape: &[usize], rng: &mut Rng) -> Result<Self> {
        let out_shape = spec.output_shape(in_shape)?;
        let fan_in: usize = match spec {
            LayerSpec::Conv1d { kernel_size, .. } => in_shape[0] * kernel_size,
            _ => in_shape.iter().product(),
        };
        let (n_w, n_b) = param_counts(&spec, in_shape);
        let mut params = vec![0.0; n_w + n_b];
        if n_w > 0 {
            // He-uniform for rectified layers, Glorot-uniform for the sigmoid head
            let bound = match spec {
                LayerSpec::SigmoidDense { out_dim } => (6.0 / (fan_in + out_dim) as f64).sqrt(),
                _ => (6.0 / fan_in as f64).sqrt(),
            };
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for p in &mut params[..n_w] {
                *p = dist.sample(rng);
            }
        }
        Ok(Layer { spec, in_shape: in_shape.to_vec(), out_shape, params })
    }

    pub fn n_weights(&self) -> usize {
        param_counts(&self.spec, &self.in_shape).0
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.n_weights()]
    }

    pub fn bias(&self) -> &[f64] {
        &self.params[self.n_weights()..]
    }

    pub(crate) fn forward(&self, x: &[f64], rng: Option<&mut Rng>) -> (Vec<f64>, Aux) {
        match self.spec {
            LayerSpec::Conv1d { out_channels, kernel_size, stride } => {
                let [c, len] = [self.in_shape[0], self.in_shape[1]];
                let mut out = vec![0.0; out_channels * self.out_shape[1]];
                let (w, b) = self.params.split_at(self.n_weights());
                conv_forward(x, c, len, w, b, out_channels, kernel_size, stride, &mut out);
                (out, Aux::None)
            }
            LayerSpec::Relu => (x.iter().map(|v| v.max(0.0)).collect(), Aux::None),
            LayerSpec::MaxPool1d { window } => {
                let [c, len] = [self.in_shape[0], self.in_shape[1]];
                let out_len = self.out_shape[1];
                let mut out = Vec::with_capacity(c * out_len);
                let mut arg = Vec::with_capacity(c * out_len);
                for ch in 0..c {
                    for t in 0..out_len {
                        let start = ch * len + t * window;
                        let mut best = start;
                        for i in start + 1..start + window {
                            if x[i] > x[best] {
                                best = i;
                            }
                        }
                        out.push(x[best]);
                        arg.push(best);
                    }
                }
                (out, Aux::Argmax(arg))
            }
            LayerSpec::Flatten => (x.to_vec(), Aux::None),
            LayerSpec::Dense { out_dim } | LayerSpec::SigmoidDense { out_dim } => {
                let n_in = x.len();
                let (w, b) = self.params.split_at(out_dim * n_in);
                let mut out: Vec<f64> = (0..out_dim)
                    .map(|j| b[j] + w[j * n_in..(j + 1) * n_in].iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
                    .collect();
                if matches!(self.spec, LayerSpec::SigmoidDense { .. }) {
                    out.iter_mut().for_each(|v| *v = sigmoid(*v));
                }
                (out, Aux::None)
            }
            LayerSpec::Dropout { rate } => match rng {
                Some(rng) if rate > 0.0 => {
                    let keep = 1.0 / (1.0 - rate);
                    let mask: Vec<f64> =
                        x.iter().map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
                    (x.iter().zip(&mask).map(|(a, m)| a * m).collect(), Aux::Mask(mask))
                }
                _ => (x.to_vec(), Aux::None),
            },
        }
    }

    /// Gradient with respect to the input and to the parameters.
    pub(crate) fn backward(&self, x: &[f64], y: &[f64], aux: &Aux, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.spec {
            LayerSpec::Conv1d { out_channels, kernel_size: k, stride } => {
                let [c, len] = [self.in_shape[0], self.in_shape[1]];
                let out_len = self.out_shape[1];
                let n_w = self.n_weights();
                let w = &self.params[..n_w];
                let mut gp = vec![0.0; self.params.len()];
                let mut gx = vec![0.0; x.len()];
                for oc in 0..out_channels {
                    let go = &g[oc * out_len..(oc + 1) * out_len];
                    gp[n_w + oc] = go.iter().sum();
                    for ic in 0..c {
                        let base = (oc * c + ic) * k;
                        let xs = &x[ic * len..(ic + 1) * len];
                        let gxs = &mut gx[ic * len..(ic + 1) * len];
                        for (t, &gt) in go.iter().enumerate() {
                            if gt == 0.0 {
                                continue;
                            }
                            let s = t * stride;
                            for j in 0..k {
                                gp[base + j] += gt * xs[s + j];
                                gxs[s + j] += gt * w[base + j];
                            }
                        }
                    }
                }
                (gx, gp)
            }
            LayerSpec::Relu => (x.iter().zip(g).map(|(v, d)| if *v > 0.0 { *d } else { 0.0 }).collect(), Vec::new()),
            LayerSpec::MaxPool1d { .. } => {
                let mut gx = vec![0.0; x.len()];
                if let Aux::Argmax(arg) = aux {
                    for (i, d) in arg.iter().zip(g) {
                        gx[*i] += d;
                    }
                }
                (gx, Vec::new())
            }
            LayerSpec::Flatten => (g.to_vec(), Vec::new()),
            LayerSpec::Dropout { .. } => match aux {
                Aux::Mask(mask) => (g.iter().zip(mask).map(|(d, m)| d * m).collect(), Vec::new()),
                _ => (g.to_vec(), Vec::new()),
            },
            LayerSpec::Dense { out_dim } | LayerSpec::SigmoidDense { out_dim } => {
                let delta: Vec<f64> = if matches!(self.spec, LayerSpec::SigmoidDense { .. }) {
                    g.iter().zip(y).map(|(d, p)| d * p * (1.0 - p)).collect()
                } else {
                    g.to_vec()
                };
                let n_in = x.len();
                let n_w = out_dim * n_in;
                let w = &self.params[..n_w];
                let mut gp = vec![0.0; self.params.len()];
                let mut gx = vec![0.0; n_in];
                for (j, &dj) in delta.iter().enumerate() {
                    gp[n_w + j] = dj;
                    if dj == 0.0 {
                        continue;
                    }
                    let row = &w[j * n_in..(j + 1) * n_in];
                    let grow = &mut gp[j * n_in..(j + 1) * n_in];
                    for i in 0..n_in {
                        grow[i] = dj * x[i];
                        gx[i] += dj * row[i];
                    }
                }
                (gx, gp)
            }
        }
    }
}

fn param_counts(spec: &LayerSpec, in_shape: &[usize]) -> (usize, usize) {
    match *spec {
        LayerSpec::Conv1d { out_channels, kernel_size, .. } => {
            (out_channels * in_shape[0] * kernel_size, out_channels)
        }
        LayerSpec::Dense { out_dim } | LayerSpec::SigmoidDense { out_dim } => {
            (out_dim * in_shape.iter().product::<usize>(), out_dim)
        }
        _ => (0, 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::StandardNormal;

    fn naive_conv(x: &[f64], c: usize, len: usize, w: &[f64], o: usize, k: usize, stride: usize) -> Vec<f64> {
        let out_len = (len - k) / stride + 1;
        let mut out = vec![0.0; o * out_len];
        for oc in 0..o {
            for t in 0..out_len {
                for ic in 0..c {
                    for j in 0..k {
                        out[oc * out_len + t] += w[oc * c * k + ic * k + j] * x[ic * len + t * stride + j];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_small_examples() {
        let x = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let k = Tensor::new(vec![1, 1, 3], vec![1.0, 0.0, -1.0]).unwrap();
        assert_eq!(conv1d(&x, &k, &[0.0], 1).unwrap().data, vec![-2.0]);

        let x = Tensor::new(vec![1, 5], vec![4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let k = Tensor::new(vec![1, 1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(conv1d(&x, &k, &[0.0], 1).unwrap().data, vec![5.0, 6.0, 7.0]);
    }

    #[test]
    fn conv_matches_naive_loops() {
        let mut rng = seeded(3);
        let x: Vec<f64> = (0..4 * 32).map(|_| rng.sample(StandardNormal)).collect();
        let w: Vec<f64> = (0..8 * 4 * 5).map(|_| rng.sample(StandardNormal)).collect();
        for stride in [1, 2, 3] {
            let got = conv1d(
                &Tensor::new(vec![4, 32], x.clone()).unwrap(),
                &Tensor::new(vec![8, 4, 5], w.clone()).unwrap(),
                &[0.0; 8],
                stride,
            )
            .unwrap();
            let want = naive_conv(&x, 4, 32, &w, 8, 5, stride);
            assert_eq!(got.shape, vec![8, (32 - 5) / stride + 1]);
            for (a, b) in got.data.iter().zip(&want) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn conv_shape_mismatch() {
        let x = Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap();
        let k = Tensor::new(vec![1, 1, 3], vec![0.0; 3]).unwrap();
        assert!(matches!(conv1d(&x, &k, &[0.0], 1), Err(Error::Shape(_))));
        let k = Tensor::new(vec![1, 2, 4], vec![0.0; 8]).unwrap();
        assert!(matches!(conv1d(&x, &k, &[0.0], 1), Err(Error::Shape(_))));
    }

    #[test]
    fn relu_zeroes_negatives() {
        let layer = Layer::new(LayerSpec::Relu, &[1, 4], &mut seeded(0)).unwrap();
        let (y, _) = layer.forward(&[-1.0, -0.5, -3.0, -1e-9], None);
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut rng = seeded(0);
        assert!(Layer::new(LayerSpec::Dropout { rate: 1.0 }, &[4], &mut rng).is_err());
        let conv = LayerSpec::Conv1d { out_channels: 2, kernel_size: 6, stride: 1 };
        assert!(matches!(Layer::new(conv, &[1, 5], &mut rng), Err(Error::Shape(_))));
    }

    #[test]
    fn dropout_inverted_scaling() {
        let layer = Layer::new(LayerSpec::Dropout { rate: 0.25 }, &[1000], &mut seeded(0)).unwrap();
        let x = vec![1.0; 1000];
        let (y, _) = layer.forward(&x, Some(&mut seeded(1)));
        assert!(y.iter().all(|v| *v == 0.0 || (*v - 1.0 / 0.75).abs() < 1e-15));
        let (y, _) = layer.forward(&x, None);
        assert_eq!(y, x);
    }

    proptest::proptest! {
        #[test]
        fn conv_output_length(len in 1usize..60, k in 1usize..10, stride in 1usize..5) {
            proptest::prop_assume!(k <= len);
            let spec = LayerSpec::Conv1d { out_channels: 2, kernel_size: k, stride };
            let shape = spec.output_shape(&[3, len]).unwrap();
            proptest::prop_assert_eq!(shape, vec![2, (len - k) / stride + 1]);
            let layer = Layer::new(spec, &[3, len], &mut seeded(len as u64)).unwrap();
            let (y, _) = layer.forward(&vec![1.0; 3 * len], None);
            proptest::prop_assert_eq!(y.len(), 2 * ((len - k) / stride + 1));
        }
    }
}
