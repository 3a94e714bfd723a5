//! Network assembly: a small three-block convolutional net for desk-scale
//! work and a pre-activation wide residual net as the heavyweight option.

use super::layers::{BatchNorm2d, Conv2d, Dense, GlobalAvgPool, MaxPool2, Param, Relu};
use crate::error::{Error, Result};
use crate::image::Dims;
use ndarray::{Array1, Array2, Array4};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Architecture descriptor. `small_conv` is the desk-scale default;
/// `wide_residual` follows the WRN-(depth, k) naming, so depth must
/// satisfy (depth - 4) % 6 == 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    SmallConv,
    WideResidual { depth: usize, width_factor: usize },
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if let Architecture::WideResidual {
            depth,
            width_factor,
        } = self
        {
            if *width_factor < 1 {
                return Err(Error::InvalidClassifierConfig(
                    "width_factor must be at least 1".into(),
                ));
            }
            if *depth < 10 || (depth - 4) % 6 != 0 {
                return Err(Error::InvalidClassifierConfig(format!(
                    "wide_residual depth must be 6b + 4 for b >= 1, got {depth}"
                )));
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::SmallConv => f.write_str("small_conv"),
            Architecture::WideResidual {
                depth,
                width_factor,
            } => {
                write!(f, "wide_residual({depth},{width_factor})")
            }
        }
    }
}

/// Three conv/pool blocks into a linear head. Cheap enough to train on a
/// single core in seconds at 32x32.
#[derive(Debug, Clone)]
pub struct SmallConv {
    conv1: Conv2d,
    relu1: Relu,
    pool1: MaxPool2,
    conv2: Conv2d,
    relu2: Relu,
    pool2: MaxPool2,
    conv3: Conv2d,
    relu3: Relu,
    pool3: MaxPool2,
    gap: GlobalAvgPool,
    head: Dense,
}

impl SmallConv {
    fn new(input: Dims, n_classes: usize, rng: &mut ChaCha8Rng) -> Self {
        SmallConv {
            conv1: Conv2d::new(input.channels, 8, 3, 1, 1, true, rng),
            relu1: Relu::new(),
            pool1: MaxPool2::new(),
            conv2: Conv2d::new(8, 16, 3, 1, 1, true, rng),
            relu2: Relu::new(),
            pool2: MaxPool2::new(),
            conv3: Conv2d::new(16, 32, 3, 1, 1, true, rng),
            relu3: Relu::new(),
            pool3: MaxPool2::new(),
            gap: GlobalAvgPool::new(),
            head: Dense::new(32, n_classes, rng),
        }
    }

    fn forward_train(&mut self, x: &Array4<f64>) -> Array2<f64> {
        let mut t = self.conv1.forward_train(x);
        t = self.relu1.forward_train(&t);
        t = self.pool1.forward_train(&t);
        t = self.conv2.forward_train(&t);
        t = self.relu2.forward_train(&t);
        t = self.pool2.forward_train(&t);
        t = self.conv3.forward_train(&t);
        t = self.relu3.forward_train(&t);
        t = self.pool3.forward_train(&t);
        let flat = self.gap.forward_train(&t);
        self.head.forward_train(&flat)
    }

    fn infer(&self, x: &Array4<f64>) -> Array2<f64> {
        let mut t = self.conv1.infer(x);
        t = self.relu1.infer(&t);
        t = self.pool1.infer(&t);
        t = self.conv2.infer(&t);
        t = self.relu2.infer(&t);
        t = self.pool2.infer(&t);
        t = self.conv3.infer(&t);
        t = self.relu3.infer(&t);
        t = self.pool3.infer(&t);
        let flat = self.gap.infer(&t);
        self.head.infer(&flat)
    }

    fn backward(&mut self, dlogits: &Array2<f64>) {
        let d = self.head.backward(dlogits);
        let d = self.gap.backward(&d);
        let d = self.pool3.backward(&d);
        let d = self.relu3.backward(&d);
        let d = self.conv3.backward(&d);
        let d = self.pool2.backward(&d);
        let d = self.relu2.backward(&d);
        let d = self.conv2.backward(&d);
        let d = self.pool1.backward(&d);
        let d = self.relu1.backward(&d);
        let _ = self.conv1.backward(&d);
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![&mut self.conv1.weight];
        if let Some(b) = &mut self.conv1.bias {
            out.push(b);
        }
        out.push(&mut self.conv2.weight);
        if let Some(b) = &mut self.conv2.bias {
            out.push(b);
        }
        out.push(&mut self.conv3.weight);
        if let Some(b) = &mut self.conv3.bias {
            out.push(b);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }
}

/// One pre-activation residual block: BN-ReLU-conv3x3(s)-BN-ReLU-conv3x3,
/// with a 1x1 projection shortcut when the shape changes.
#[derive(Debug, Clone)]
struct WrnBlock {
    bn1: BatchNorm2d,
    relu1: Relu,
    conv1: Conv2d,
    bn2: BatchNorm2d,
    relu2: Relu,
    conv2: Conv2d,
    shortcut: Option<Conv2d>,
}

impl WrnBlock {
    fn new(in_c: usize, out_c: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        let projecting = in_c != out_c || stride != 1;
        WrnBlock {
            bn1: BatchNorm2d::new(in_c),
            relu1: Relu::new(),
            conv1: Conv2d::new(in_c, out_c, 3, stride, 1, false, rng),
            bn2: BatchNorm2d::new(out_c),
            relu2: Relu::new(),
            conv2: Conv2d::new(out_c, out_c, 3, 1, 1, false, rng),
            shortcut: projecting.then(|| Conv2d::new(in_c, out_c, 1, stride, 0, false, rng)),
        }
    }

    fn forward_train(&mut self, x: &Array4<f64>) -> Array4<f64> {
        let o = self.relu1.forward_train(&self.bn1.forward_train(x));
        let mut y = self.conv1.forward_train(&o);
        y = self.relu2.forward_train(&self.bn2.forward_train(&y));
        y = self.conv2.forward_train(&y);
        match &mut self.shortcut {
            Some(sc) => y + sc.forward_train(&o),
            None => y + x,
        }
    }

    fn infer(&self, x: &Array4<f64>) -> Array4<f64> {
        let o = self.relu1.infer(&self.bn1.infer(x));
        let mut y = self.conv1.infer(&o);
        y = self.relu2.infer(&self.bn2.infer(&y));
        y = self.conv2.infer(&y);
        match &self.shortcut {
            Some(sc) => y + sc.infer(&o),
            None => y + x,
        }
    }

    fn backward(&mut self, dout: &Array4<f64>) -> Array4<f64> {
        let d_main = self.conv2.backward(dout);
        let d_main = self.bn2.backward(&self.relu2.backward(&d_main));
        let d_o_main = self.conv1.backward(&d_main);
        match &mut self.shortcut {
            Some(sc) => {
                // both branches consume o; their gradients sum before bn1
                let d_o = d_o_main + sc.backward(dout);
                self.bn1.backward(&self.relu1.backward(&d_o))
            }
            None => {
                // identity shortcut feeds dout straight through to x
                self.bn1.backward(&self.relu1.backward(&d_o_main)) + dout
            }
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![
            &mut self.bn1.gamma,
            &mut self.bn1.beta,
            &mut self.conv1.weight,
            &mut self.bn2.gamma,
            &mut self.bn2.beta,
            &mut self.conv2.weight,
        ];
        if let Some(sc) = &mut self.shortcut {
            out.push(&mut sc.weight);
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut Array1<f64>> {
        vec![
            &mut self.bn1.running_mean,
            &mut self.bn1.running_var,
            &mut self.bn2.running_mean,
            &mut self.bn2.running_var,
        ]
    }
}

/// Pre-activation WRN-(depth, k): stem conv, three groups of (depth-4)/6
/// blocks at widths 16k/32k/64k with strides 1/2/2, then BN-ReLU, global
/// average pooling, and a linear head. No dropout.
#[derive(Debug, Clone)]
pub struct Wrn {
    stem: Conv2d,
    blocks: Vec<WrnBlock>,
    bn: BatchNorm2d,
    relu: Relu,
    gap: GlobalAvgPool,
    head: Dense,
}

impl Wrn {
    fn new(
        depth: usize,
        width_factor: usize,
        input: Dims,
        n_classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let per_group = (depth - 4) / 6;
        let widths = [16 * width_factor, 32 * width_factor, 64 * width_factor];
        let stem = Conv2d::new(input.channels, 16, 3, 1, 1, false, rng);
        let mut blocks = Vec::with_capacity(3 * per_group);
        let mut in_c = 16;
        for (gi, &out_c) in widths.iter().enumerate() {
            for bi in 0..per_group {
                let stride = if gi > 0 && bi == 0 { 2 } else { 1 };
                blocks.push(WrnBlock::new(in_c, out_c, stride, rng));
                in_c = out_c;
            }
        }
        Wrn {
            stem,
            blocks,
            bn: BatchNorm2d::new(in_c),
            relu: Relu::new(),
            gap: GlobalAvgPool::new(),
            head: Dense::new(in_c, n_classes, rng),
        }
    }

    fn forward_train(&mut self, x: &Array4<f64>) -> Array2<f64> {
        let mut t = self.stem.forward_train(x);
        for block in &mut self.blocks {
            t = block.forward_train(&t);
        }
        t = self.relu.forward_train(&self.bn.forward_train(&t));
        let flat = self.gap.forward_train(&t);
        self.head.forward_train(&flat)
    }

    fn infer(&self, x: &Array4<f64>) -> Array2<f64> {
        let mut t = self.stem.infer(x);
        for block in &self.blocks {
            t = block.infer(&t);
        }
        t = self.relu.infer(&self.bn.infer(&t));
        let flat = self.gap.infer(&t);
        self.head.infer(&flat)
    }

    fn backward(&mut self, dlogits: &Array2<f64>) {
        let d = self.head.backward(dlogits);
        let d = self.gap.backward(&d);
        let mut d = self.bn.backward(&self.relu.backward(&d));
        for block in self.blocks.iter_mut().rev() {
            d = block.backward(&d);
        }
        let _ = self.stem.backward(&d);
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![&mut self.stem.weight];
        for block in &mut self.blocks {
            out.extend(block.params_mut());
        }
        out.push(&mut self.bn.gamma);
        out.push(&mut self.bn.beta);
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut Array1<f64>> {
        let mut out = Vec::new();
        for block in &mut self.blocks {
            out.extend(block.buffers_mut());
        }
        out.push(&mut self.bn.running_mean);
        out.push(&mut self.bn.running_var);
        out
    }
}

/// A built network of either architecture.
#[derive(Debug, Clone)]
pub enum Network {
    SmallConv(SmallConv),
    Wrn(Wrn),
}

impl Network {
    /// Builds and initializes a network, consuming randomness from `rng`
    /// in a fixed layer order (this is what makes seeded training
    /// deterministic).
    pub fn build(
        arch: Architecture,
        input: Dims,
        n_classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        arch.validate()?;
        input.validate()?;
        if input.height < 8 || input.width < 8 {
            return Err(Error::InvalidClassifierConfig(format!(
                "input must be at least 8x8 pixels, got {input}"
            )));
        }
        Ok(match arch {
            Architecture::SmallConv => Network::SmallConv(SmallConv::new(input, n_classes, rng)),
            Architecture::WideResidual {
                depth,
                width_factor,
            } => Network::Wrn(Wrn::new(depth, width_factor, input, n_classes, rng)),
        })
    }

    pub fn forward_train(&mut self, x: &Array4<f64>) -> Array2<f64> {
        match self {
            Network::SmallConv(n) => n.forward_train(x),
            Network::Wrn(n) => n.forward_train(x),
        }
    }

    /// Cache-free forward pass on a frozen network (running batch-norm
    /// statistics, no side effects).
    pub fn infer(&self, x: &Array4<f64>) -> Array2<f64> {
        match self {
            Network::SmallConv(n) => n.infer(x),
            Network::Wrn(n) => n.infer(x),
        }
    }

    pub fn backward(&mut self, dlogits: &Array2<f64>) {
        match self {
            Network::SmallConv(n) => n.backward(dlogits),
            Network::Wrn(n) => n.backward(dlogits),
        }
    }

    /// Learnable parameters in a fixed traversal order.
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Network::SmallConv(n) => n.params_mut(),
            Network::Wrn(n) => n.params_mut(),
        }
    }

    /// Non-learnable state (batch-norm running statistics), fixed order.
    pub fn buffers_mut(&mut self) -> Vec<&mut Array1<f64>> {
        match self {
            Network::SmallConv(_) => Vec::new(),
            Network::Wrn(n) => n.buffers_mut(),
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn param_count(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.len()).sum()
    }
}
