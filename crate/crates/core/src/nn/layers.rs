use rand_chacha::ChaCha8Rng;

use super::params::{bias_uniform, kaiming_uniform, ParamStore};
use super::tape::{ConvGeom, Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

pub const LEAKY_SLOPE: f64 = 0.01;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// A forward pass in progress: the tape, the parameters it reads (and whose
/// batch-norm buffers it updates in training mode) and the mode flag.
pub struct Session<'a> {
    pub tape: Tape,
    pub store: &'a mut ParamStore,
    pub train: bool,
}

impl<'a> Session<'a> {
    pub fn new(store: &'a mut ParamStore, train: bool) -> Self {
        Self { tape: Tape::new(), store, train }
    }

    pub fn param(&mut self, id: usize) -> Var {
        self.tape.param(self.store, id)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.tape.leaf(t)
    }
}

/// Fully connected layer `x W (+ b)`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: usize,
    pub bias: Option<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, fan_in: usize, fan_out: usize, bias: bool) -> Self {
        let weight = store.add(format!("{name}.weight"), kaiming_uniform(rng, fan_in, fan_out, fan_in), true);
        let bias = bias.then(|| store.add(format!("{name}.bias"), bias_uniform(rng, fan_out, fan_in), true));
        Self { weight, bias, fan_in, fan_out }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let w = s.param(self.weight);
        let y = s.tape.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = s.param(b);
                s.tape.add_row(y, b)
            }
            None => Ok(y),
        }
    }
}

/// Biasless same-padded convolution with an odd `kh × kw` kernel.
#[derive(Clone, Debug)]
pub struct Conv {
    pub weight: usize,
    pub cin: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, cin: usize, cout: usize, kh: usize, kw: usize) -> Self {
        let fan_in = kh * kw * cin;
        let weight = store.add(format!("{name}.weight"), kaiming_uniform(rng, fan_in, cout, fan_in), true);
        Self { weight, cin, cout, kh, kw }
    }

    /// `x` holds `batch` grids of `height × width` rows (NHWC).
    pub fn forward(&self, s: &mut Session, x: Var, batch: usize, height: usize, width: usize) -> Result<Var> {
        let w = s.param(self.weight);
        let geom = ConvGeom { batch, height, width, cin: self.cin, cout: self.cout, kh: self.kh, kw: self.kw };
        s.tape.conv(x, w, geom)
    }
}

/// Batch normalization over rows with learnable scale/shift and running
/// statistics (updated only in training mode).
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: usize,
    pub beta: usize,
    pub running_mean: usize,
    pub running_var: usize,
    pub channels: usize,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), Tensor::filled(vec![1, channels], 1.0), true),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(vec![1, channels]), true),
            running_mean: store.add(format!("{name}.running_mean"), Tensor::zeros(vec![1, channels]), false),
            running_var: store.add(format!("{name}.running_var"), Tensor::filled(vec![1, channels], 1.0), false),
            channels,
        }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let gamma = s.param(self.gamma);
        let beta = s.param(self.beta);
        if s.train {
            let (y, stats) = s.tape.batch_norm_train(x, gamma, beta, BN_EPS)?;
            let rm = &mut s.store.value_mut(self.running_mean).data;
            rm.iter_mut().zip(&stats.mean).for_each(|(r, m)| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m);
            let rv = &mut s.store.value_mut(self.running_var).data;
            rv.iter_mut().zip(&stats.var_unbiased).for_each(|(r, v)| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v);
            Ok(y)
        } else {
            let mean = s.store.value(self.running_mean).data.clone();
            let var = s.store.value(self.running_var).data.clone();
            s.tape.batch_norm_eval(x, gamma, beta, &mean, &var, BN_EPS)
        }
    }
}

/// `LeakyReLU(BN(x W))`: the biasless FC block used throughout the encoder.
#[derive(Clone, Debug)]
pub struct FcBlock {
    pub fc: Linear,
    pub bn: BatchNorm,
}

impl FcBlock {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, fan_in: usize, fan_out: usize) -> Self {
        Self { fc: Linear::new(store, rng, &format!("{name}.fc"), fan_in, fan_out, false), bn: BatchNorm::new(store, &format!("{name}.bn"), fan_out) }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let y = self.fc.forward(s, x)?;
        let y = self.bn.forward(s, y)?;
        Ok(s.tape.leaky_relu(y, LEAKY_SLOPE))
    }
}

/// `LeakyReLU(BN(conv(x)))`.
#[derive(Clone, Debug)]
pub struct ConvBlock {
    pub conv: Conv,
    pub bn: BatchNorm,
}

impl ConvBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, cin: usize, cout: usize, kh: usize, kw: usize) -> Self {
        Self {
            conv: Conv::new(store, rng, &format!("{name}.conv"), cin, cout, kh, kw),
            bn: BatchNorm::new(store, &format!("{name}.bn"), cout),
        }
    }

    pub fn forward(&self, s: &mut Session, x: Var, batch: usize, height: usize, width: usize) -> Result<Var> {
        let y = self.conv.forward(s, x, batch, height, width)?;
        let y = self.bn.forward(s, y)?;
        Ok(s.tape.leaky_relu(y, LEAKY_SLOPE))
    }
}
