use crate::error::{Error, Result};
use crate::tensor::{Array, Bound, Float, Init, ParamStore, Var};
use crate::vil::{VilSettings, XlstmBlock};

pub const IN_EPS: f64 = 1e-5;
pub const LEAKY_SLOPE: f64 = 0.01;

/// Convolution with bias. Weight layout `[Cout, Cin, k…]`.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub prefix: String,
    pub rank: usize,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvLayer {
    pub fn new(prefix: impl Into<String>, rank: usize, cin: usize, cout: usize, kernel: usize, stride: usize) -> Self {
        Self {
            prefix: prefix.into(),
            rank,
            cin,
            cout,
            kernel,
            stride,
        }
    }

    fn weight_shape(&self) -> Vec<usize> {
        let mut s = vec![self.cout, self.cin];
        s.extend(std::iter::repeat_n(self.kernel, self.rank));
        s
    }

    pub fn num_params(&self) -> usize {
        self.cout * self.cin * self.kernel.pow(self.rank as u32) + self.cout
    }

    pub fn init<T: Float>(&self, store: &mut ParamStore<T>, init: &mut Init) -> Result<()> {
        let fan_in = self.cin * self.kernel.pow(self.rank as u32);
        store.insert(format!("{}.weight", self.prefix), init.fan_in(&self.weight_shape(), fan_in))?;
        store.insert(format!("{}.bias", self.prefix), Array::zeros(&[self.cout]))
    }

    pub fn forward<T: Float>(&self, p: &Bound<'_, T>, x: Var) -> Result<Var> {
        let stride = vec![self.stride; self.rank];
        let pad = vec![self.kernel / 2; self.rank];
        p.graph().conv_nd(
            x,
            p.var(&format!("{}.weight", self.prefix))?,
            p.var(&format!("{}.bias", self.prefix))?,
            &stride,
            &pad,
        )
    }
}

/// Instance norm with learned per-channel affine.
#[derive(Clone, Debug)]
pub struct NormLayer {
    pub prefix: String,
    pub channels: usize,
}

impl NormLayer {
    pub fn init<T: Float>(&self, store: &mut ParamStore<T>) -> Result<()> {
        store.insert(format!("{}.gamma", self.prefix), Array::full(&[self.channels], T::one()))?;
        store.insert(format!("{}.beta", self.prefix), Array::zeros(&[self.channels]))
    }

    pub fn forward<T: Float>(&self, p: &Bound<'_, T>, x: Var) -> Result<Var> {
        p.graph().instance_norm(
            x,
            p.var(&format!("{}.gamma", self.prefix))?,
            p.var(&format!("{}.beta", self.prefix))?,
            IN_EPS,
        )
    }
}

/// Conv (k3) → IN → LeakyReLU, used for the stem.
#[derive(Clone, Debug)]
pub struct ConvNormAct {
    pub conv: ConvLayer,
    pub norm: NormLayer,
}

impl ConvNormAct {
    pub fn new(prefix: &str, rank: usize, cin: usize, cout: usize, stride: usize) -> Self {
        Self {
            conv: ConvLayer::new(format!("{prefix}.conv"), rank, cin, cout, 3, stride),
            norm: NormLayer {
                prefix: format!("{prefix}.norm"),
                channels: cout,
            },
        }
    }

    pub fn init<T: Float>(&self, store: &mut ParamStore<T>, init: &mut Init) -> Result<()> {
        self.conv.init(store, init)?;
        self.norm.init(store)
    }

    pub fn num_params(&self) -> usize {
        self.conv.num_params() + 2 * self.norm.channels
    }

    pub fn forward<T: Float>(&self, p: &Bound<'_, T>, x: Var) -> Result<Var> {
        let y = self.conv.forward(p, x)?;
        let y = self.norm.forward(p, y)?;
        p.graph().leaky_relu(y, LEAKY_SLOPE)
    }
}

/// `y = act(IN(conv3(x))) + proj(x)`; `proj` is the identity when input and
/// output shapes agree, otherwise a strided 1×1 conv.
#[derive(Clone, Debug)]
pub struct ResidualBlock {
    pub prefix: String,
    pub body: ConvNormAct,
    pub proj: Option<ConvLayer>,
}

impl ResidualBlock {
    pub fn new(prefix: impl Into<String>, rank: usize, cin: usize, cout: usize, stride: usize) -> Self {
        let prefix = prefix.into();
        let proj = (cin != cout || stride != 1)
            .then(|| ConvLayer::new(format!("{prefix}.proj"), rank, cin, cout, 1, stride));
        Self {
            body: ConvNormAct::new(&prefix, rank, cin, cout, stride),
            proj,
            prefix,
        }
    }

    pub fn cin(&self) -> usize {
        self.body.conv.cin
    }

    pub fn cout(&self) -> usize {
        self.body.conv.cout
    }

    pub fn init<T: Float>(&self, store: &mut ParamStore<T>, init: &mut Init) -> Result<()> {
        self.body.init(store, init)?;
        match &self.proj {
            Some(proj) => proj.init(store, init),
            None => Ok(()),
        }
    }

    pub fn num_params(&self) -> usize {
        self.body.num_params() + self.proj.as_ref().map_or(0, ConvLayer::num_params)
    }

    pub fn forward<T: Float>(&self, p: &Bound<'_, T>, x: Var) -> Result<Var> {
        let g = p.graph();
        let shape = g.shape(x);
        if shape.len() != self.body.conv.rank + 2 || shape[1] != self.cin() {
            return Err(Error::shape(
                "residual_block",
                format!("`{}` expects {} input channels, got {shape:?}", self.prefix, self.cin()),
            ));
        }
        let y = self.body.forward(p, x)?;
        let skip = match &self.proj {
            Some(proj) => proj.forward(p, x)?,
            None => x,
        };
        g.add(y, skip)
    }
}

/// Two residual blocks, the first carrying the stride, and an optional
/// xLSTM block.
#[derive(Clone, Debug)]
pub struct EncoderStage {
    pub prefix: String,
    pub blocks: [ResidualBlock; 2],
    pub xlstm: Option<XlstmBlock>,
}

impl EncoderStage {
    pub fn new(
        prefix: impl Into<String>,
        rank: usize,
        cin: usize,
        cout: usize,
        stride: usize,
        xlstm: Option<VilSettings>,
    ) -> Result<Self> {
        let prefix = prefix.into();
        Ok(Self {
            blocks: [
                ResidualBlock::new(format!("{prefix}.res0"), rank, cin, cout, stride),
                ResidualBlock::new(format!("{prefix}.res1"), rank, cout, cout, 1),
            ],
            xlstm: xlstm
                .map(|s| XlstmBlock::new(format!("{prefix}.xlstm"), cout, s))
                .transpose()?,
            prefix,
        })
    }

    pub fn init<T: Float>(&self, store: &mut ParamStore<T>, init: &mut Init) -> Result<()> {
        for b in &self.blocks {
            b.init(store, init)?;
        }
        if let Some(x) = &self.xlstm {
            x.init(store, init)?;
        }
        Ok(())
    }

    pub fn num_params(&self, settings: VilSettings) -> usize {
        self.blocks.iter().map(ResidualBlock::num_params).sum::<usize>()
            + self
                .xlstm
                .as_ref()
                .map_or(0, |x| XlstmBlock::num_params(x.channels, settings))
    }

    /// Output of the residual path only, before any xLSTM block.
    pub fn forward_residual<T: Float>(&self, p: &Bound<'_, T>, x: Var) -> Result<Var> {
        let y = self.blocks[0].forward(p, x)?;
        self.blocks[1].forward(p, y)
    }

    /// Returns `(features, skip)`; both are the stage output.
    pub fn forward<T: Float>(&self, p: &Bound<'_, T>, x: Var) -> Result<(Var, Var)> {
        let mut y = self.forward_residual(p, x)?;
        if let Some(xl) = &self.xlstm {
            y = xl.forward(p, y)?;
        }
        Ok((y, y))
    }
}

/// Transposed conv (k2, s2) → concat skip → two residual blocks.
#[derive(Clone, Debug)]
pub struct DecoderStage {
    pub prefix: String,
    pub rank: usize,
    pub cin: usize,
    pub up_channels: usize,
    pub skip_channels: usize,
    pub blocks: [ResidualBlock; 2],
}

impl DecoderStage {
    pub fn new(
        prefix: impl Into<String>,
        rank: usize,
        cin: usize,
        up_channels: usize,
        skip_channels: usize,
        cout: usize,
    ) -> Self {
        let prefix = prefix.into();
        Self {
            blocks: [
                ResidualBlock::new(format!("{prefix}.res0"), rank, up_channels + skip_channels, cout, 1),
                ResidualBlock::new(format!("{prefix}.res1"), rank, cout, cout, 1),
            ],
            prefix,
            rank,
            cin,
            up_channels,
            skip_channels,
        }
    }

    fn up_weight_shape(&self) -> Vec<usize> {
        let mut s = vec![self.cin, self.up_channels];
        s.extend(std::iter::repeat_n(2, self.rank));
        s
    }

    pub fn init<T: Float>(&self, store: &mut ParamStore<T>, init: &mut Init) -> Result<()> {
        let fan_in = self.cin * (1 << self.rank);
        store.insert(format!("{}.up.weight", self.prefix), init.fan_in(&self.up_weight_shape(), fan_in))?;
        store.insert(format!("{}.up.bias", self.prefix), Array::zeros(&[self.up_channels]))?;
        for b in &self.blocks {
            b.init(store, init)?;
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.cin * self.up_channels * (1 << self.rank)
            + self.up_channels
            + self.blocks.iter().map(ResidualBlock::num_params).sum::<usize>()
    }

    pub fn forward<T: Float>(&self, p: &Bound<'_, T>, x: Var, skip: Var) -> Result<Var> {
        let g = p.graph();
        let up = g.conv_transpose_nd(
            x,
            p.var(&format!("{}.up.weight", self.prefix))?,
            p.var(&format!("{}.up.bias", self.prefix))?,
            &vec![2; self.rank],
            &vec![0; self.rank],
        )?;
        let (us, ss) = (g.shape(up), g.shape(skip));
        if us.len() != ss.len() || us[0] != ss[0] || us[2..] != ss[2..] || ss[1] != self.skip_channels {
            return Err(Error::shape(
                "decoder_stage",
                format!(
                    "`{}`: upsampled {us:?} does not match skip {ss:?} (expected {} skip channels)",
                    self.prefix, self.skip_channels
                ),
            ));
        }
        let y = g.concat(&[up, skip], 1)?;
        let y = self.blocks[0].forward(p, y)?;
        self.blocks[1].forward(p, y)
    }
}
