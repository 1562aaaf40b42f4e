use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::blocks::{ConvLayer, ConvNormAct, DecoderStage, EncoderStage};
use super::config::{NetworkConfig, Variant};
use crate::error::{Error, Result};
use crate::tensor::{Array, Bound, Float, Graph, Init, ParamStore, Var};
use crate::vil::{VilSettings, XlstmBlock};

/// Module tree of the segmentation network. Holds no weights.
#[derive(Clone, Debug)]
pub struct UNet {
    pub config: NetworkConfig,
    pub settings: VilSettings,
    pub stem: ConvNormAct,
    pub stages: Vec<EncoderStage>,
    pub bottleneck: EncoderStage,
    pub decoder: Vec<DecoderStage>,
    pub head: ConvLayer,
}

impl UNet {
    pub fn new(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let rank = config.task.rank();
        let settings = VilSettings {
            heads: config.heads,
            expansion: config.expansion,
            ..VilSettings::default()
        };
        let s = config.num_stages;
        let ch = |i: usize| config.stage_channels(i);
        let stem = ConvNormAct::new("stem", rank, config.in_channels, ch(0), 2);
        let enc_xlstm = (config.variant == Variant::Enc).then_some(settings);
        let stages = (0..s)
            .map(|i| {
                let cin = if i == 0 { ch(0) } else { ch(i - 1) };
                let stride = if i == 0 { 1 } else { 2 };
                EncoderStage::new(format!("enc{i}"), rank, cin, ch(i), stride, enc_xlstm)
            })
            .collect::<Result<Vec<_>>>()?;
        let bottleneck = EncoderStage::new("bottleneck", rank, ch(s - 1), ch(s - 1), 1, Some(settings))?;
        let mut decoder = Vec::with_capacity(s);
        let mut cin = ch(s - 1);
        for (n, level) in (0..s - 1).rev().enumerate() {
            decoder.push(DecoderStage::new(format!("dec{n}"), rank, cin, ch(level), ch(level), ch(level)));
            cin = ch(level);
        }
        decoder.push(DecoderStage::new(
            format!("dec{}", s - 1),
            rank,
            cin,
            ch(0),
            config.in_channels,
            ch(0),
        ));
        let head = ConvLayer::new("head", rank, ch(0), config.num_classes, 1, 1);
        Ok(Self {
            config: config.clone(),
            settings,
            stem,
            stages,
            bottleneck,
            decoder,
            head,
        })
    }

    /// Seeded parameters in construction order.
    pub fn init_params<T: Float>(&self) -> Result<ParamStore<T>> {
        let mut store = ParamStore::new();
        let mut init = Init::new(ChaCha8Rng::seed_from_u64(self.config.seed));
        self.stem.init(&mut store, &mut init)?;
        for st in &self.stages {
            st.init(&mut store, &mut init)?;
        }
        self.bottleneck.init(&mut store, &mut init)?;
        for d in &self.decoder {
            d.init(&mut store, &mut init)?;
        }
        self.head.init(&mut store, &mut init)?;
        Ok(store)
    }

    pub fn num_params(&self) -> usize {
        self.stem.num_params()
            + self.stages.iter().map(|s| s.num_params(self.settings)).sum::<usize>()
            + self.bottleneck.num_params(self.settings)
            + self.decoder.iter().map(DecoderStage::num_params).sum::<usize>()
            + self.head.num_params()
    }

    /// Every xLSTM block in the tree, encoder first.
    pub fn xlstm_blocks(&self) -> Vec<&XlstmBlock> {
        self.stages
            .iter()
            .chain(std::iter::once(&self.bottleneck))
            .filter_map(|s| s.xlstm.as_ref())
            .collect()
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let c = &self.config;
        let ok = shape.len() == c.task.rank() + 2 && shape[1] == c.in_channels && shape[2..] == c.patch_size[..];
        if ok {
            Ok(())
        } else {
            Err(Error::shape(
                "forward_segment",
                format!(
                    "expected [B, {}, {:?}], got {shape:?}",
                    c.in_channels, c.patch_size
                ),
            ))
        }
    }

    /// Pre-softmax class scores `[B, K, *patch]`.
    pub fn forward_logits<T: Float>(&self, p: &Bound<'_, T>, x: Var) -> Result<Var> {
        let g = p.graph();
        self.check_input(&g.shape(x))?;
        let mut y = self.stem.forward(p, x)?;
        let mut skips = Vec::with_capacity(self.stages.len());
        for st in &self.stages {
            let (feat, skip) = st.forward(p, y)?;
            skips.push(skip);
            y = feat;
        }
        y = self.bottleneck.forward(p, y)?.0;
        // the deepest stage feeds the bottleneck directly; the remaining
        // skips pair with decoder stages, and the input image with the last
        skips.pop();
        for d in &self.decoder {
            let skip = skips.pop().unwrap_or(x);
            y = d.forward(p, y, skip)?;
        }
        self.head.forward(p, y)
    }

    /// Class probabilities `[B, K, *patch]`.
    pub fn forward<T: Float>(&self, p: &Bound<'_, T>, x: Var) -> Result<Var> {
        let logits = self.forward_logits(p, x)?;
        p.graph().softmax(logits, 1)
    }
}

/// Module tree plus weights.
#[derive(Clone, Debug)]
pub struct Network<T: Float = f32> {
    pub arch: UNet,
    pub params: ParamStore<T>,
}

impl<T: Float> Network<T> {
    pub fn config(&self) -> &NetworkConfig {
        &self.arch.config
    }

    pub fn cast<U: Float>(&self) -> Network<U> {
        Network {
            arch: self.arch.clone(),
            params: self.params.cast(),
        }
    }

    /// Replaces the weights after checking names and shapes line up.
    pub fn with_params(arch: UNet, params: ParamStore<T>) -> Result<Self> {
        let expected = arch.init_params::<T>()?;
        if expected.len() != params.len() {
            return Err(Error::InvalidArgument(format!(
                "network expects {} parameter tensors, got {}",
                expected.len(),
                params.len()
            )));
        }
        for (name, a) in expected.iter() {
            match params.get(name) {
                Some(b) if b.shape() == a.shape() => {}
                Some(b) => {
                    return Err(Error::shape(
                        "load_params",
                        format!("`{name}`: expected {:?}, got {:?}", a.shape(), b.shape()),
                    ))
                }
                None => return Err(Error::InvalidArgument(format!("missing parameter `{name}`"))),
            }
        }
        Ok(Self { arch, params })
    }
}

pub fn build_network(config: &NetworkConfig) -> Result<Network<f32>> {
    let arch = UNet::new(config)?;
    let params = arch.init_params()?;
    Ok(Network { arch, params })
}

/// Inference-only forward pass returning class probabilities.
pub fn forward_segment<T: Float>(net: &Network<T>, x: &Array<T>) -> Result<Array<T>> {
    let g = Graph::new();
    let p = net.params.bind_constant(&g);
    let xv = g.constant(x.clone());
    let y = net.arch.forward(&p, xv)?;
    let out = g.value(y).clone();
    Ok(out)
}
