//! Frozen encoder, imaginary-modality generators and skip-connected decoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Modality, ModelConfig};
use super::layers::{
    avg_pool2, avg_pool2_backward, relu, relu_backward, tanh, tanh_backward, upsample2, upsample2_backward, Conv2d,
    ConvCache, ConvGrad,
};
use super::loss::{focal_loss_with_grad, FocalParams};
use super::tensor::FeatureMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const ENCODER_STREAM: u64 = 0;
const DECODER_STREAM: u64 = 1;
const TIM_STREAM_BASE: u64 = 16;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Fixed, seeded 3x3 convolution + tanh standing in for a pretrained encoder.
/// Nothing in this crate ever updates its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenEncoder<T> {
    conv: Conv2d<T>,
}

impl<T: Scalar> FrozenEncoder<T> {
    pub fn new(config: &ModelConfig) -> Self {
        let conv = Conv2d::init(
            config.in_channels,
            config.base_channels,
            3,
            3.0,
            1.0,
            &mut rng(config.seed, ENCODER_STREAM),
        );
        Self { conv }
    }

    pub fn conv(&self) -> &Conv2d<T> {
        &self.conv
    }

    pub(crate) fn from_conv(conv: Conv2d<T>) -> Self {
        Self { conv }
    }

    pub fn encode(&self, input: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        if input.channels() != self.conv.in_ch {
            return Err(Error::Shape(format!(
                "encoder expects {} input channels, got {}",
                self.conv.in_ch,
                input.channels()
            )));
        }
        if input.height() == 0 || input.width() == 0 {
            return Err(Error::Shape("empty input window".into()));
        }
        Ok(tanh(self.conv.forward(input).0))
    }
}

/// Learned map from base features to the channels of one imaginary modality.
#[derive(Debug, Clone, PartialEq)]
pub struct TimGenerator<T> {
    pub modality: Modality,
    pub conv: Conv2d<T>,
}

impl<T: Scalar> TimGenerator<T> {
    /// Initialisation depends only on the seed and the modality, so toggling
    /// other modalities leaves this generator unchanged.
    pub fn new(modality: Modality, base_channels: usize, channels: usize, seed: u64) -> Self {
        let conv = Conv2d::init(
            base_channels,
            channels,
            1,
            1.0,
            0.0,
            &mut rng(seed, TIM_STREAM_BASE + modality.id()),
        );
        Self { modality, conv }
    }
}

/// Appends each generator's channels to `features`; no generators returns
/// the features unchanged.
pub fn tim_expand<T: Scalar>(features: &FeatureMap<T>, generators: &[TimGenerator<T>]) -> FeatureMap<T> {
    if generators.is_empty() {
        return features.clone();
    }
    let outs: Vec<FeatureMap<T>> = generators.iter().map(|g| tanh(g.conv.forward(features).0)).collect();
    let mut parts = vec![features];
    parts.extend(outs.iter());
    FeatureMap::concat(&parts).expect("generator outputs share spatial dims")
}

/// U-Net style decoder: `depth` pooling levels, nearest upsampling and
/// concatenated skip connections, then a 1x1 head producing one logit.
#[derive(Debug, Clone, PartialEq)]
pub struct UNetDecoder<T> {
    pub depth: usize,
    pub down: Vec<Conv2d<T>>,
    pub up: Vec<Conv2d<T>>,
    pub head: Conv2d<T>,
}

struct DecoderCache<T> {
    down: Vec<ConvCache<T>>,
    skips: Vec<FeatureMap<T>>,
    up: Vec<ConvCache<T>>,
    up_out: Vec<FeatureMap<T>>,
    head: ConvCache<T>,
}

impl<T: Scalar> UNetDecoder<T> {
    pub fn new(in_channels: usize, width: usize, depth: usize, seed: u64) -> Self {
        let mut r = rng(seed, DECODER_STREAM);
        let he = 6f64.sqrt();
        let down = (0..=depth)
            .map(|l| Conv2d::init(if l == 0 { in_channels } else { width }, width, 3, he, 0.0, &mut r))
            .collect();
        let up = (0..depth).map(|_| Conv2d::init(2 * width, width, 3, he, 0.0, &mut r)).collect();
        let head = Conv2d::init(width, 1, 1, 1.0, 0.0, &mut r);
        Self { depth, down, up, head }
    }

    pub fn in_channels(&self) -> usize {
        self.down[0].in_ch
    }

    fn check(&self, x: &FeatureMap<T>) -> Result<()> {
        let d = 1usize << self.depth;
        if x.height() % d != 0 || x.width() % d != 0 || x.height() == 0 || x.width() == 0 {
            return Err(Error::Shape(format!(
                "spatial dims {}x{} must be non-zero multiples of {d} (2^decoder_depth)",
                x.height(),
                x.width()
            )));
        }
        if x.channels() != self.in_channels() {
            return Err(Error::Shape(format!(
                "decoder expects {} channels, got {}",
                self.in_channels(),
                x.channels()
            )));
        }
        Ok(())
    }

    fn forward_cached(&self, x: &FeatureMap<T>) -> Result<(FeatureMap<T>, DecoderCache<T>)> {
        self.check(x)?;
        let mut down = Vec::with_capacity(self.depth + 1);
        let mut skips: Vec<FeatureMap<T>> = Vec::with_capacity(self.depth + 1);
        for (l, conv) in self.down.iter().enumerate() {
            let input = if l == 0 { x.clone() } else { avg_pool2(&skips[l - 1]) };
            let (y, c) = conv.forward(&input);
            down.push(c);
            skips.push(relu(y));
        }

        let mut up_cache: Vec<Option<ConvCache<T>>> = (0..self.depth).map(|_| None).collect();
        let mut up_out: Vec<Option<FeatureMap<T>>> = (0..self.depth).map(|_| None).collect();
        let mut current = skips[self.depth].clone();
        for k in (0..self.depth).rev() {
            let cat = FeatureMap::concat(&[&upsample2(&current), &skips[k]])?;
            let (y, c) = self.up[k].forward(&cat);
            let y = relu(y);
            up_cache[k] = Some(c);
            up_out[k] = Some(y.clone());
            current = y;
        }
        let (logits, head) = self.head.forward(&current);
        Ok((
            logits,
            DecoderCache {
                down,
                skips,
                up: up_cache.into_iter().map(Option::unwrap).collect(),
                up_out: up_out.into_iter().map(Option::unwrap).collect(),
                head,
            },
        ))
    }

    pub fn decode(&self, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        Ok(self.forward_cached(x)?.0)
    }

    fn backward(
        &self,
        cache: &DecoderCache<T>,
        grad_logits: &FeatureMap<T>,
        grads: &mut DecoderGrads<T>,
        want_input: bool,
    ) -> Option<FeatureMap<T>> {
        let w = self.head.in_ch;
        let mut g = self
            .head
            .backward(&cache.head, grad_logits, &mut grads.head, true)
            .unwrap();
        let mut skip_grads: Vec<Option<FeatureMap<T>>> = (0..=self.depth).map(|_| None).collect();
        let add = |slot: &mut Option<FeatureMap<T>>, g: FeatureMap<T>| match slot {
            Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, &b)| *a = *a + b),
            None => *slot = Some(g),
        };

        for k in 0..self.depth {
            let g_pre = relu_backward(&cache.up_out[k], g);
            let g_cat = self.up[k]
                .backward(&cache.up[k], &g_pre, &mut grads.up[k], true)
                .unwrap();
            add(&mut skip_grads[k], g_cat.slice_channels(w, w));
            g = upsample2_backward(&g_cat.slice_channels(0, w));
        }
        add(&mut skip_grads[self.depth], g);

        let mut input_grad = None;
        for l in (0..=self.depth).rev() {
            let gs = skip_grads[l].take().expect("every level receives a gradient");
            let g_pre = relu_backward(&cache.skips[l], gs);
            let need = l > 0 || want_input;
            let g_in = self.down[l].backward(&cache.down[l], &g_pre, &mut grads.down[l], need);
            if l > 0 {
                add(&mut skip_grads[l - 1], avg_pool2_backward(&g_in.unwrap()));
            } else {
                input_grad = g_in;
            }
        }
        input_grad
    }

    /// Upper bound on how far (in pixels) an input value can influence an
    /// output logit, including pooling-grid alignment effects.
    pub fn reach(&self) -> usize {
        let down: usize = (0..=self.depth).map(|l| 2 << l).sum();
        let up: usize = (0..self.depth).map(|k| 3 << k).sum();
        down + up
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderGrads<T> {
    pub down: Vec<ConvGrad<T>>,
    pub up: Vec<ConvGrad<T>>,
    pub head: ConvGrad<T>,
}

/// Everything that training updates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainableParams<T> {
    pub tim: Vec<TimGenerator<T>>,
    pub decoder: UNetDecoder<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads<T> {
    pub tim: Vec<ConvGrad<T>>,
    pub decoder: DecoderGrads<T>,
}

impl<T: Scalar> ParamGrads<T> {
    pub fn zeros_like(p: &TrainableParams<T>) -> Self {
        Self {
            tim: p.tim.iter().map(|g| ConvGrad::zeros_like(&g.conv)).collect(),
            decoder: DecoderGrads {
                down: p.decoder.down.iter().map(ConvGrad::zeros_like).collect(),
                up: p.decoder.up.iter().map(ConvGrad::zeros_like).collect(),
                head: ConvGrad::zeros_like(&p.decoder.head),
            },
        }
    }

    fn all_mut(&mut self) -> impl Iterator<Item = &mut ConvGrad<T>> {
        self.tim
            .iter_mut()
            .chain(self.decoder.down.iter_mut())
            .chain(self.decoder.up.iter_mut())
            .chain(std::iter::once(&mut self.decoder.head))
    }

    fn all(&self) -> impl Iterator<Item = &ConvGrad<T>> {
        self.tim
            .iter()
            .chain(self.decoder.down.iter())
            .chain(self.decoder.up.iter())
            .chain(std::iter::once(&self.decoder.head))
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.all_mut() {
            g.weight.iter_mut().chain(g.bias.iter_mut()).for_each(|v| *v = *v * factor);
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.all_mut().zip(other.all()) {
            a.add_assign(b);
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        self.all().flat_map(|g| g.weight.iter().chain(&g.bias).copied()).collect()
    }
}

impl<T: Scalar> TrainableParams<T> {
    pub fn new(config: &ModelConfig) -> Self {
        let tim = config
            .tim_modalities
            .iter()
            .map(|&m| TimGenerator::new(m, config.base_channels, config.tim_channels_per_modality, config.seed))
            .collect();
        let decoder = UNetDecoder::new(
            config.expanded_channels(),
            config.decoder_channels,
            config.decoder_depth,
            config.seed,
        );
        Self { tim, decoder }
    }

    fn convs_mut(&mut self) -> impl Iterator<Item = &mut Conv2d<T>> {
        self.tim
            .iter_mut()
            .map(|g| &mut g.conv)
            .chain(self.decoder.down.iter_mut())
            .chain(self.decoder.up.iter_mut())
            .chain(std::iter::once(&mut self.decoder.head))
    }

    pub fn convs(&self) -> impl Iterator<Item = &Conv2d<T>> {
        self.tim
            .iter()
            .map(|g| &g.conv)
            .chain(self.decoder.down.iter())
            .chain(self.decoder.up.iter())
            .chain(std::iter::once(&self.decoder.head))
    }

    pub fn flatten(&self) -> Vec<T> {
        self.convs().flat_map(|c| c.weight.iter().chain(&c.bias).copied()).collect()
    }

    /// Overwrites parameters from a flat vector in [`Self::flatten`] order.
    pub fn assign_flat(&mut self, values: &[T]) {
        let mut it = values.iter().copied();
        for c in self.convs_mut() {
            c.weight.iter_mut().chain(c.bias.iter_mut()).for_each(|v| *v = it.next().expect("length"));
        }
    }

    pub fn param_count(&self) -> usize {
        self.convs().map(Conv2d::param_count).sum()
    }

    pub fn logits(&self, features: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        self.decoder.decode(&tim_expand(features, &self.tim))
    }

    /// Loss on one encoded sample and gradients with respect to every
    /// trainable parameter, accumulated into `grads`.
    pub fn loss_and_grad(
        &self,
        features: &FeatureMap<T>,
        targets: &[bool],
        valid: Option<&[bool]>,
        focal: FocalParams<T>,
        grads: &mut ParamGrads<T>,
    ) -> Result<T> {
        let tim_out: Vec<(FeatureMap<T>, ConvCache<T>)> = self
            .tim
            .iter()
            .map(|g| {
                let (y, c) = g.conv.forward(features);
                (tanh(y), c)
            })
            .collect();
        let mut parts = vec![features];
        parts.extend(tim_out.iter().map(|(y, _)| y));
        let expanded = FeatureMap::concat(&parts)?;

        let (logits, cache) = self.decoder.forward_cached(&expanded)?;
        let (loss, dlogits) = focal_loss_with_grad(logits.data(), targets, valid, focal)?;
        let dlogits = FeatureMap::from_vec(1, logits.height(), logits.width(), dlogits)?;

        let g_expanded = self
            .decoder
            .backward(&cache, &dlogits, &mut grads.decoder, !self.tim.is_empty());
        if let Some(g) = g_expanded {
            let base = features.channels();
            for (k, (gen, (out, c))) in self.tim.iter().zip(&tim_out).enumerate() {
                let ch = gen.conv.out_ch;
                let g_slice = g.slice_channels(base + k * ch, ch);
                let g_pre = tanh_backward(out, g_slice);
                gen.conv.backward(c, &g_pre, &mut grads.tim[k], false);
            }
        }
        Ok(loss)
    }

    pub fn step(&mut self, grads: &ParamGrads<T>, lr: T) {
        for (conv, g) in self.convs_mut().zip(grads.all()) {
            conv.step(g, lr);
        }
    }
}

/// Encoder plus trainable head.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel<T> {
    config: ModelConfig,
    encoder: FrozenEncoder<T>,
    params: TrainableParams<T>,
}

impl<T: Scalar> ToyModel<T> {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            encoder: FrozenEncoder::new(&config),
            params: TrainableParams::new(&config),
            config,
        })
    }

    pub(crate) fn from_parts(config: ModelConfig, encoder: FrozenEncoder<T>, params: TrainableParams<T>) -> Self {
        Self { config, encoder, params }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn encoder(&self) -> &FrozenEncoder<T> {
        &self.encoder
    }

    pub fn params(&self) -> &TrainableParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut TrainableParams<T> {
        &mut self.params
    }

    pub fn set_params(&mut self, params: TrainableParams<T>) {
        self.params = params;
    }

    pub fn logits(&self, input: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        let features = self.encoder.encode(input)?;
        self.params.logits(&features)
    }

    /// Pixels beyond this distance from a window edge see no edge effects.
    pub fn receptive_radius(&self) -> usize {
        1 + self.params.decoder.reach()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_config() -> ModelConfig {
        ModelConfig {
            in_channels: 2,
            base_channels: 3,
            tim_modalities: vec![Modality::Dem, Modality::S2],
            tim_channels_per_modality: 2,
            decoder_depth: 2,
            decoder_channels: 3,
            seed: 42,
            ..ModelConfig::default()
        }
    }

    fn random_input(c: usize, h: usize, w: usize, seed: u64) -> FeatureMap<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        FeatureMap::from_vec(c, h, w, (0..c * h * w).map(|_| r.gen_range(0.0..1.0)).collect()).unwrap()
    }

    /// End-to-end gradient of the loss with respect to every trainable
    /// parameter against central differences.
    #[test]
    fn full_network_gradient_matches_finite_differences() {
        let cfg = small_config();
        let model = ToyModel::<f64>::new(cfg).unwrap();
        let x = random_input(2, 8, 8, 1);
        let features = model.encoder().encode(&x).unwrap();
        let targets: Vec<bool> = (0..64).map(|i| (i * 7) % 5 < 2).collect();
        let mut valid = vec![true; 64];
        valid[3] = false;
        let focal = FocalParams { gamma: 2.0, alpha: 0.25 };

        let params = model.params().clone();
        let mut grads = ParamGrads::zeros_like(&params);
        params
            .loss_and_grad(&features, &targets, Some(&valid), focal, &mut grads)
            .unwrap();
        let analytic = grads.flatten();
        let flat = params.flatten();
        assert_eq!(analytic.len(), flat.len());

        let loss_at = |v: &[f64]| {
            let mut p = params.clone();
            p.assign_flat(v);
            let logits = p.logits(&features).unwrap();
            crate::model::loss::focal_loss(logits.data(), &targets, Some(&valid), focal).unwrap()
        };
        let eps = 1e-5;
        let mut checked = 0;
        for i in (0..flat.len()).step_by(3) {
            let mut plus = flat.clone();
            plus[i] += eps;
            let mut minus = flat.clone();
            minus[i] -= eps;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * eps);
            let a = analytic[i];
            let denom = fd.abs().max(a.abs()).max(1e-7);
            assert!((fd - a).abs() / denom < 1e-4 || (fd - a).abs() < 1e-9, "param {i}: fd {fd} vs analytic {a}");
            checked += 1;
        }
        assert!(checked > 50);
    }

    #[test]
    fn encoder_is_deterministic_and_zero_input_gives_bias_response() {
        let cfg = small_config();
        let a = FrozenEncoder::<f64>::new(&cfg);
        let b = FrozenEncoder::<f64>::new(&cfg);
        let x = random_input(2, 8, 8, 3);
        assert_eq!(a.encode(&x).unwrap(), b.encode(&x).unwrap());

        let zero = FeatureMap::zeros(2, 8, 8);
        let out = a.encode(&zero).unwrap();
        for c in 0..3 {
            let expected = a.conv().bias[c].tanh();
            assert!(out.plane(c).iter().all(|&v| v == expected));
        }
    }

    #[test]
    fn encoder_channel_mismatch() {
        let enc = FrozenEncoder::<f64>::new(&small_config());
        assert!(matches!(enc.encode(&FeatureMap::zeros(3, 8, 8)).unwrap_err(), Error::Shape(_)));
    }

    #[test]
    fn decode_shapes() {
        let cfg = ModelConfig {
            base_channels: 4,
            decoder_depth: 3,
            decoder_channels: 4,
            ..ModelConfig::default()
        };
        let dec = UNetDecoder::<f32>::new(4, 4, 3, 0);
        let out = dec.decode(&FeatureMap::zeros(4, 64, 64)).unwrap();
        assert_eq!((out.channels(), out.height(), out.width()), (1, 64, 64));
        match dec.decode(&FeatureMap::zeros(4, 65, 65)).unwrap_err() {
            Error::Shape(msg) => assert!(msg.contains('8'), "{msg}"),
            other => panic!("{other}"),
        }
        assert_eq!(cfg.divisor(), 8);
    }

    #[test]
    fn tim_generators_independent_of_subset() {
        let a = TimGenerator::<f64>::new(Modality::Dem, 4, 8, 7);
        let b = TimGenerator::<f64>::new(Modality::Dem, 4, 8, 7);
        let c = TimGenerator::<f64>::new(Modality::Lulc, 4, 8, 7);
        assert_eq!(a, b);
        assert_ne!(a.conv.weight, c.conv.weight);
    }
}
