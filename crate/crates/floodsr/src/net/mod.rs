//! Residual dense super-resolution network: configuration, parameter
//! storage, initialization, and checkpointing.
//!
//! Parameters live in one flat list of tensors in a canonical order fixed
//! by the configuration. Initialization, the optimizer, checkpoints, and
//! the finite-difference checks all walk that same order, so they stay
//! consistent by construction.

pub mod ops;
pub mod tensor;

mod backward;
mod forward;

pub use backward::backward;
pub use forward::{forward, ForwardTrace};
pub use ops::{bilinear_upsample, channel_attention, subpixel_rearrange};
pub use tensor::Tensor;

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Upsampling factor from coarse fractions to fine probabilities.
    pub scale: usize,
    /// Feature channels outside the dense blocks.
    pub base_features: usize,
    /// Number of residual dense blocks.
    pub blocks: usize,
    /// Convolutions per block.
    pub layers_per_block: usize,
    /// Channels added by each in-block convolution.
    pub growth: usize,
    /// Spatial kernel size; odd so same-padding is symmetric.
    pub kernel: usize,
    /// Per-block channel attention gates.
    pub attention: bool,
    /// Bottleneck divisor for the attention gates.
    pub attention_reduction: usize,
    /// Per-stage sub-pixel factors; their product must equal `scale`.
    pub upsample_plan: Vec<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            scale: 10,
            base_features: 12,
            blocks: 8,
            layers_per_block: 8,
            growth: 12,
            kernel: 3,
            attention: false,
            attention_reduction: 16,
            upsample_plan: vec![2, 5],
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_features == 0
            || self.blocks == 0
            || self.layers_per_block == 0
            || self.growth == 0
        {
            return Err(Error::InvalidConfig("zero-sized architecture dimension".into()));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "kernel {} must be odd for symmetric padding",
                self.kernel
            )));
        }
        if self.upsample_plan.is_empty() || self.upsample_plan.iter().any(|&r| r < 2) {
            return Err(Error::InvalidConfig(
                "upsample plan needs factors of at least 2".into(),
            ));
        }
        let product: usize = self.upsample_plan.iter().product();
        if product != self.scale {
            return Err(Error::InvalidConfig(format!(
                "upsample plan multiplies to {product}, scale is {}",
                self.scale
            )));
        }
        if self.attention {
            if self.attention_reduction == 0 || self.base_features % self.attention_reduction != 0 {
                return Err(Error::InvalidConfig(format!(
                    "attention reduction {} must divide the {} feature channels",
                    self.attention_reduction, self.base_features
                )));
            }
        }
        Ok(())
    }
}

/// Shape and initialization metadata for one parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorSpec {
    pub len: usize,
    /// Inputs feeding one output unit; sets the init variance 2/fan_in.
    pub fan_in: usize,
    pub weight: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct BlockIdx {
    pub convs: Vec<usize>,
    pub fusion: usize,
    /// Base index of w1; b1, w2, b2 follow consecutively.
    pub attention: Option<usize>,
}

/// Named positions into the canonical tensor list. Every entry is the
/// weight tensor's index, with its bias immediately after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Idx {
    pub sfe1: usize,
    pub sfe2: usize,
    pub blocks: Vec<BlockIdx>,
    pub gff1: usize,
    pub gff2: usize,
    pub ups: Vec<usize>,
    pub hr: usize,
    pub head: usize,
}

fn push_conv(specs: &mut Vec<TensorSpec>, in_ch: usize, out_ch: usize, k: usize) -> usize {
    let at = specs.len();
    specs.push(TensorSpec {
        len: out_ch * in_ch * k * k,
        fan_in: in_ch * k * k,
        weight: true,
    });
    specs.push(TensorSpec {
        len: out_ch,
        fan_in: in_ch * k * k,
        weight: false,
    });
    at
}

fn push_dense(specs: &mut Vec<TensorSpec>, in_dim: usize, out_dim: usize) -> usize {
    let at = specs.len();
    specs.push(TensorSpec {
        len: out_dim * in_dim,
        fan_in: in_dim,
        weight: true,
    });
    specs.push(TensorSpec {
        len: out_dim,
        fan_in: in_dim,
        weight: false,
    });
    at
}

pub(crate) fn layout(config: &NetConfig) -> (Vec<TensorSpec>, Idx) {
    let g0 = config.base_features;
    let g = config.growth;
    let k = config.kernel;
    let mut specs = Vec::new();

    let sfe1 = push_conv(&mut specs, 1, g0, k);
    let sfe2 = push_conv(&mut specs, g0, g0, k);

    let mut blocks = Vec::with_capacity(config.blocks);
    for _ in 0..config.blocks {
        let mut convs = Vec::with_capacity(config.layers_per_block);
        for c in 0..config.layers_per_block {
            convs.push(push_conv(&mut specs, g0 + c * g, g, k));
        }
        let fusion = push_conv(&mut specs, g0 + config.layers_per_block * g, g0, 1);
        let attention = config.attention.then(|| {
            let hidden = g0 / config.attention_reduction;
            let at = push_dense(&mut specs, g0, hidden);
            push_dense(&mut specs, hidden, g0);
            at
        });
        blocks.push(BlockIdx {
            convs,
            fusion,
            attention,
        });
    }

    let gff1 = push_conv(&mut specs, config.blocks * g0, g0, 1);
    let gff2 = push_conv(&mut specs, g0, g0, k);

    let ups = config
        .upsample_plan
        .iter()
        .map(|&r| push_conv(&mut specs, g0, g0 * r * r, k))
        .collect();

    let hr = push_conv(&mut specs, g0, g0, k);
    let head = push_conv(&mut specs, g0, 1, k);

    (specs, Idx { sfe1, sfe2, blocks, gff1, gff2, ups, hr, head })
}

/// Parameters plus the configuration that shapes them. The seeds record how
/// the parameters came to be and travel with every checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: NetConfig,
    pub(crate) specs: Vec<TensorSpec>,
    pub(crate) idx: Idx,
    pub params: Vec<Vec<T>>,
    pub init_seed: u64,
    /// Seed of the training run that produced these values; `None` for a
    /// freshly initialized or hand-built network.
    pub train_seed: Option<u64>,
}

/// Per-tensor gradients in the same canonical order as [`Network::params`].
pub type Gradients<T> = Vec<Vec<T>>;

impl<T: Scalar> Network<T> {
    /// All-zero parameters. Every convolution then outputs zero, the head
    /// reduces to the bilinear skip, and the network computes
    /// logistic(bilinear upsample of the input).
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let (specs, idx) = layout(&config);
        let params = specs.iter().map(|s| vec![T::zero(); s.len]).collect();
        Ok(Self { config, specs, idx, params, init_seed: 0, train_seed: None })
    }

    pub fn param_count(&self) -> usize {
        self.specs.iter().map(|s| s.len).sum()
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        self.specs.iter().map(|s| vec![T::zero(); s.len]).collect()
    }

    pub(crate) fn w(&self, at: usize) -> &[T] {
        &self.params[at]
    }
    pub(crate) fn b(&self, at: usize) -> &[T] {
        &self.params[at + 1]
    }

    /// Serializes the configuration and every tensor (widened to f64) into
    /// one self-describing file.
    pub fn save(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            format_version: u32,
            config: &'a NetConfig,
            init_seed: u64,
            train_seed: Option<u64>,
            tensor_lens: Vec<usize>,
        }
        let header = serde_json::to_vec(&Header {
            format_version: 1,
            config: &self.config,
            init_seed: self.init_seed,
            train_seed: self.train_seed,
            tensor_lens: self.specs.iter().map(|s| s.len).collect(),
        })?;
        let mut file = fs::File::create(path)?;
        file.write_all(MAGIC)?;
        file.write_all(&(header.len() as u64).to_le_bytes())?;
        file.write_all(&header)?;
        let mut payload = Vec::with_capacity(self.param_count() * 8);
        for tensor in &self.params {
            for v in tensor {
                payload.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        file.write_all(&payload)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
            config: NetConfig,
            init_seed: u64,
            train_seed: Option<u64>,
            tensor_lens: Vec<usize>,
        }
        let mut file = fs::File::open(path)?;
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)
            .map_err(|_| Error::Checkpoint("file shorter than the magic header".into()))?;
        if magic != *MAGIC {
            return Err(Error::Checkpoint("not a network checkpoint".into()));
        }
        let mut len_bytes = [0u8; 8];
        file.read_exact(&mut len_bytes)
            .map_err(|_| Error::Checkpoint("truncated header length".into()))?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        file.read_exact(&mut header_bytes)
            .map_err(|_| Error::Checkpoint("truncated header".into()))?;
        let header: Header = serde_json::from_slice(&header_bytes)?;
        if header.format_version != 1 {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                header.format_version
            )));
        }
        header.config.validate()?;
        let (specs, idx) = layout(&header.config);
        let expected: Vec<usize> = specs.iter().map(|s| s.len).collect();
        if header.tensor_lens != expected {
            return Err(Error::Checkpoint(
                "tensor shapes do not match the stored configuration".into(),
            ));
        }
        let mut payload = Vec::new();
        file.read_to_end(&mut payload)?;
        let total: usize = expected.iter().sum();
        if payload.len() != total * 8 {
            return Err(Error::Checkpoint(format!(
                "parameter payload holds {} bytes, expected {}",
                payload.len(),
                total * 8
            )));
        }
        let mut params = Vec::with_capacity(specs.len());
        let mut offset = 0;
        for spec in &specs {
            let mut tensor = Vec::with_capacity(spec.len);
            for _ in 0..spec.len {
                let bits = u64::from_le_bytes(payload[offset..offset + 8].try_into().unwrap());
                tensor.push(T::from_f64(f64::from_bits(bits)));
                offset += 8;
            }
            params.push(tensor);
        }
        Ok(Self {
            config: header.config,
            specs,
            idx,
            params,
            init_seed: header.init_seed,
            train_seed: header.train_seed,
        })
    }
}

const MAGIC: &[u8; 8] = b"FSRNET1\n";

/// He-style initialization: weights drawn from N(0, 2/fan_in), biases zero,
/// with a fixed draw order so a seed pins every parameter bit.
pub fn init_params<T: Scalar>(config: &NetConfig, seed: u64) -> Result<Network<T>> {
    config.validate()?;
    let (specs, idx) = layout(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = specs
        .iter()
        .map(|spec| {
            if spec.weight {
                let std = (2.0 / spec.fan_in as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                (0..spec.len)
                    .map(|_| T::from_f64(normal.sample(&mut rng)))
                    .collect()
            } else {
                vec![T::zero(); spec.len]
            }
        })
        .collect();
    Ok(Network {
        config: config.clone(),
        specs,
        idx,
        params,
        init_seed: seed,
        train_seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_config() -> NetConfig {
        NetConfig {
            scale: 10,
            base_features: 4,
            blocks: 1,
            layers_per_block: 2,
            growth: 4,
            kernel: 3,
            attention: true,
            attention_reduction: 2,
            upsample_plan: vec![2, 5],
        }
    }

    #[test]
    fn default_config_is_valid() {
        assert!(NetConfig::default().validate().is_ok());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut c = NetConfig::default();
        c.kernel = 4;
        assert!(c.validate().is_err());
        let mut c = NetConfig::default();
        c.upsample_plan = vec![2, 4];
        assert!(c.validate().is_err());
        let mut c = NetConfig::default();
        c.upsample_plan = vec![];
        assert!(c.validate().is_err());
        let mut c = NetConfig::default();
        c.attention = true; // reduction 16 does not divide 12 features
        assert!(c.validate().is_err());
        let mut c = NetConfig::default();
        c.blocks = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn layout_orders_weights_then_biases() {
        let (specs, idx) = layout(&tiny_config());
        assert!(specs[idx.sfe1].weight);
        assert!(!specs[idx.sfe1 + 1].weight);
        assert_eq!(specs[idx.sfe1].len, 4 * 1 * 9);
        assert_eq!(specs[idx.blocks[0].convs[1]].fan_in, (4 + 4) * 9);
        assert_eq!(specs[idx.blocks[0].fusion].len, (4 + 2 * 4) * 4);
        let att = idx.blocks[0].attention.unwrap();
        assert_eq!(specs[att].len, 2 * 4); // w1: hidden 2 by 4 channels
        assert_eq!(specs[att + 2].len, 4 * 2); // w2
        assert_eq!(specs[idx.ups[0]].len, (4 * 2 * 2) * 4 * 9);
        assert_eq!(specs[idx.head].len, 4 * 9);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a: Network<f64> = init_params(&tiny_config(), 3).unwrap();
        let b: Network<f64> = init_params(&tiny_config(), 3).unwrap();
        assert_eq!(a, b);
        let c: Network<f64> = init_params(&tiny_config(), 4).unwrap();
        assert!(a.params[0] != c.params[0]);
    }

    #[test]
    fn init_variance_tracks_fan_in() {
        let config = NetConfig::default();
        let net: Network<f64> = init_params(&config, 11).unwrap();
        // Pick a tensor with at least 10k entries for a stable estimate.
        let (at, spec) = net
            .specs
            .iter()
            .enumerate()
            .find(|(_, s)| s.weight && s.len >= 10_000)
            .expect("default config has a large tensor");
        let tensor = &net.params[at];
        let mean: f64 = tensor.iter().sum::<f64>() / spec.len as f64;
        let var: f64 =
            tensor.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / spec.len as f64;
        let target = 2.0 / spec.fan_in as f64;
        assert!(
            (var - target).abs() / target < 0.2,
            "empirical {var:.3e} vs target {target:.3e}"
        );
        for spec_idx in 0..net.specs.len() {
            if !net.specs[spec_idx].weight {
                assert!(net.params[spec_idx].iter().all(|&b| b == 0.0));
            }
        }
    }

    #[test]
    fn checkpoint_roundtrips_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let mut net: Network<f64> = init_params(&tiny_config(), 9).unwrap();
        net.train_seed = Some(41);
        net.save(&path).unwrap();
        let loaded = Network::<f64>::load(&path).unwrap();
        assert_eq!(net, loaded);
        assert_eq!(loaded.init_seed, 9);
        assert_eq!(loaded.train_seed, Some(41));
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let net: Network<f64> = init_params(&tiny_config(), 9).unwrap();
        net.save(&path).unwrap();

        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(Network::<f64>::load(&path), Err(Error::Checkpoint(_))));

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        fs::write(&path, &wrong_magic).unwrap();
        assert!(matches!(Network::<f64>::load(&path), Err(Error::Checkpoint(_))));
    }
}
