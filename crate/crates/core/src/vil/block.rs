use super::mlstm::{Direction, MLstmCell};
use super::sequence::{sequence_to_volume, volume_to_sequence};
use crate::error::{Error, Result};
use crate::tensor::{Array, Bound, Float, Init, ParamStore, Var};

pub const LN_EPS: f64 = 1e-5;

/// Hyperparameters shared by every ViL block of a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VilSettings {
    pub heads: usize,
    pub expansion: usize,
    pub conv_width: usize,
}

impl Default for VilSettings {
    fn default() -> Self {
        Self {
            heads: 4,
            expansion: 2,
            conv_width: 4,
        }
    }
}

/// One ViL sub-block over a `[B, L, D]` sequence:
///
/// ```text
/// u      = LayerNorm(s)
/// a, z   = split(u · W_up)                 (each of width E)
/// a'     = SiLU(CausalConv1d(a))
/// h      = mLSTM(a') + skip ⊙ a'
/// y      = s + (h ⊙ SiLU(z)) · W_down
/// ```
///
/// A reverse block runs the same computation on the sequence flipped along
/// `L` and flips the result back.
#[derive(Clone, Debug)]
pub struct VilBlock {
    pub prefix: String,
    pub dim: usize,
    pub inner: usize,
    pub settings: VilSettings,
    pub direction: Direction,
    cell: MLstmCell,
}

impl VilBlock {
    pub fn new(prefix: impl Into<String>, dim: usize, settings: VilSettings, direction: Direction) -> Result<Self> {
        let prefix = prefix.into();
        let inner = settings.expansion * dim;
        if dim == 0 || settings.conv_width == 0 {
            return Err(Error::InvalidArgument(format!(
                "ViL block needs positive dim and conv width, got {dim} / {}",
                settings.conv_width
            )));
        }
        let cell = MLstmCell::new(format!("{prefix}.cell"), inner, settings.heads)?;
        Ok(Self {
            prefix,
            dim,
            inner,
            settings,
            direction,
            cell,
        })
    }

    fn name(&self, leaf: &str) -> String {
        format!("{}.{leaf}", self.prefix)
    }

    pub fn cell(&self) -> &MLstmCell {
        &self.cell
    }

    pub fn init<T: Float>(&self, store: &mut ParamStore<T>, init: &mut Init) -> Result<()> {
        let (d, e, w) = (self.dim, self.inner, self.settings.conv_width);
        store.insert(self.name("norm.gamma"), Array::full(&[d], T::one()))?;
        store.insert(self.name("norm.beta"), Array::zeros(&[d]))?;
        store.insert(self.name("up_proj"), init.fan_in(&[d, 2 * e], d))?;
        store.insert(self.name("conv.weight"), init.fan_in(&[e, w], w))?;
        store.insert(self.name("conv.bias"), Array::zeros(&[e]))?;
        self.cell.init(store, init)?;
        store.insert(self.name("skip_scale"), Array::full(&[e], T::one()))?;
        store.insert(self.name("down_proj"), init.fan_in(&[e, d], e))?;
        Ok(())
    }

    /// Parameter count as a function of `(D, E, heads, conv width)`.
    pub fn num_params(dim: usize, settings: VilSettings) -> usize {
        let e = settings.expansion * dim;
        2 * dim
            + dim * 2 * e
            + e * settings.conv_width
            + e
            + MLstmCell::num_params(e, settings.heads)
            + e
            + e * dim
    }

    pub fn forward<T: Float>(&self, p: &Bound<'_, T>, s: Var) -> Result<Var> {
        let g = p.graph();
        let shape = g.shape(s);
        if shape.len() != 3 || shape[2] != self.dim {
            return Err(Error::shape(
                "vil_block",
                format!("expected [B, L, {}], got {shape:?}", self.dim),
            ));
        }
        let s = match self.direction {
            Direction::Forward => s,
            Direction::Reverse => g.flip(s, 1)?,
        };
        let u = g.layer_norm(
            s,
            p.var(&self.name("norm.gamma"))?,
            p.var(&self.name("norm.beta"))?,
            LN_EPS,
        )?;
        let up = g.linear(u, p.var(&self.name("up_proj"))?, None)?;
        let a = g.slice_last(up, 0, self.inner)?;
        let z = g.slice_last(up, self.inner, self.inner)?;
        let a = g.causal_conv1d(a, p.var(&self.name("conv.weight"))?, p.var(&self.name("conv.bias"))?)?;
        let a = g.silu(a)?;
        let h = self.cell.forward(p, a, Direction::Forward)?;
        let skip = g.mul_last(a, p.var(&self.name("skip_scale"))?)?;
        let h = g.add(h, skip)?;
        let gate = g.silu(z)?;
        let gated = g.mul(h, gate)?;
        let down = g.linear(gated, p.var(&self.name("down_proj"))?, None)?;
        let y = g.add(s, down)?;
        match self.direction {
            Direction::Forward => Ok(y),
            Direction::Reverse => g.flip(y, 1),
        }
    }
}

/// The volume-level xLSTM block: flatten, LayerNorm, a forward and a reverse
/// ViL sub-block, restore the volume shape.
#[derive(Clone, Debug)]
pub struct XlstmBlock {
    pub prefix: String,
    pub channels: usize,
    pub first: VilBlock,
    pub second: VilBlock,
}

impl XlstmBlock {
    pub fn new(prefix: impl Into<String>, channels: usize, settings: VilSettings) -> Result<Self> {
        let prefix = prefix.into();
        Ok(Self {
            first: VilBlock::new(format!("{prefix}.fwd"), channels, settings, Direction::Forward)?,
            second: VilBlock::new(format!("{prefix}.rev"), channels, settings, Direction::Reverse)?,
            prefix,
            channels,
        })
    }

    fn name(&self, leaf: &str) -> String {
        format!("{}.{leaf}", self.prefix)
    }

    pub fn init<T: Float>(&self, store: &mut ParamStore<T>, init: &mut Init) -> Result<()> {
        store.insert(self.name("norm.gamma"), Array::full(&[self.channels], T::one()))?;
        store.insert(self.name("norm.beta"), Array::zeros(&[self.channels]))?;
        self.first.init(store, init)?;
        self.second.init(store, init)
    }

    pub fn num_params(channels: usize, settings: VilSettings) -> usize {
        2 * channels + 2 * VilBlock::num_params(channels, settings)
    }

    pub fn forward<T: Float>(&self, p: &Bound<'_, T>, x: Var) -> Result<Var> {
        let g = p.graph();
        let mut seq = volume_to_sequence(g, x)?;
        seq.data = g.layer_norm(
            seq.data,
            p.var(&self.name("norm.gamma"))?,
            p.var(&self.name("norm.beta"))?,
            LN_EPS,
        )?;
        seq.data = self.first.forward(p, seq.data)?;
        seq.data = self.second.forward(p, seq.data)?;
        sequence_to_volume(g, &seq)
    }
}
