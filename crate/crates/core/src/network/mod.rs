//! Fully connected tanh networks and the hard boundary-condition output layer.

mod checkpoint;

pub use checkpoint::{deserialize, deserialize_model, serialize, serialize_model};

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Dual2, MAX_DIM};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    LecunNormal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub n_input: usize,
    pub n_output: usize,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub init: Init,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(n_input: usize, n_output: usize, hidden_layers: Vec<usize>, seed: u64) -> Self {
        NetworkConfig {
            n_input,
            n_output,
            hidden_layers,
            activation: Activation::Tanh,
            init: Init::LecunNormal,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.n_input) {
            return Err(Error::InvalidConfig(format!(
                "n_input must be 1..={MAX_DIM}, got {}",
                self.n_input
            )));
        }
        if !(1..=MAX_DIM).contains(&self.n_output) {
            return Err(Error::InvalidConfig(format!(
                "n_output must be 1..={MAX_DIM}, got {}",
                self.n_output
            )));
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden_layers must be non-empty with positive widths".into(),
            ));
        }
        Ok(())
    }

    /// Widths of every layer, input and output included.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_layers.len() + 2);
        w.push(self.n_input);
        w.extend_from_slice(&self.hidden_layers);
        w.push(self.n_output);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }
}

/// One affine map `z = W a + b`; `weights` is `(fan_out, fan_in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }
}

/// Hidden layers use the configured activation; the output layer is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    layers: Vec<Layer>,
}

/// Draws LeCun-normal weights (variance `1 / fan_in`) and zero biases.
///
/// Layer `l` draws from its own ChaCha stream `l` under the configured seed,
/// so changing the depth leaves the earlier layers untouched.
pub fn init_network(cfg: &NetworkConfig) -> Result<Network> {
    cfg.validate()?;
    let widths = cfg.widths();
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(l, pair)| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(l as u64);
            let weights = match cfg.init {
                Init::LecunNormal => {
                    let normal = Normal::new(0.0, (1.0 / fan_in as f64).sqrt())
                        .expect("positive standard deviation");
                    Array2::from_shape_simple_fn((fan_out, fan_in), || normal.sample(&mut rng))
                }
            };
            Layer {
                weights,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(Network {
        config: cfg.clone(),
        layers,
    })
}

impl Network {
    /// Builds a network from explicit layers, checking that the shapes chain.
    pub fn from_layers(config: NetworkConfig, layers: Vec<Layer>) -> Result<Self> {
        config.validate()?;
        let widths = config.widths();
        if layers.len() + 1 != widths.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} layers, got {}",
                widths.len() - 1,
                layers.len()
            )));
        }
        for (layer, pair) in layers.iter().zip(widths.windows(2)) {
            if layer.weights.dim() != (pair[1], pair[0]) || layer.bias.len() != pair[1] {
                return Err(Error::InvalidConfig(format!(
                    "layer shape {:?} does not map width {} to {}",
                    layer.weights.dim(),
                    pair[0],
                    pair[1]
                )));
            }
        }
        Ok(Network { config, layers })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn n_input(&self) -> usize {
        self.config.n_input
    }

    pub fn n_output(&self) -> usize {
        self.config.n_output
    }

    pub fn param_count(&self) -> usize {
        self.config.param_count()
    }

    /// Parameters in canonical order: layer by layer, row-major weights
    /// followed by biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.write_params(&mut out);
        out
    }

    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.bias.iter());
        }
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut k = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut() {
                *w = params[k];
                k += 1;
            }
            for b in layer.bias.iter_mut() {
                *b = params[k];
                k += 1;
            }
        }
        Ok(())
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.n_input() {
            return Err(Error::DimensionMismatch {
                expected: self.n_input(),
                got,
            });
        }
        Ok(())
    }

    /// Raw network output at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.to_vec();
            for (i, zi) in z.iter_mut().enumerate() {
                for (j, aj) in a.iter().enumerate() {
                    *zi += layer.weights[[i, j]] * aj;
                }
            }
            if l < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            a = z;
        }
        Ok(a)
    }

    /// Raw network output propagated through second-order duals.
    pub fn eval_dual2(&self, x: &[Dual2]) -> Result<Vec<Dual2>> {
        self.check_input(x.len())?;
        let dim = x[0].dim();
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z: Vec<Dual2> = layer.bias.iter().map(|&b| Dual2::constant(b, dim)).collect();
            for (i, zi) in z.iter_mut().enumerate() {
                for (j, aj) in a.iter().enumerate() {
                    *zi = *zi + *aj * layer.weights[[i, j]];
                }
            }
            if l < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            a = z;
        }
        Ok(a)
    }
}

/// Output component `u_α` is replaced by `(x[axis] − anchor) · û_α`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Anchor {
    pub axis: usize,
    pub anchor: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HardBcTransform {
    pub components: Vec<Option<Anchor>>,
}

impl HardBcTransform {
    pub fn none(n: usize) -> Self {
        HardBcTransform {
            components: vec![None; n],
        }
    }

    /// Component `α` pinned to zero on the plane `x_α = 0`, for every `α`.
    pub fn symmetry_planes(n: usize) -> Self {
        HardBcTransform {
            components: (0..n)
                .map(|axis| Some(Anchor { axis, anchor: 0.0 }))
                .collect(),
        }
    }

    pub fn factor(&self, component: usize, x: &[f64]) -> Option<f64> {
        self.components
            .get(component)
            .copied()
            .flatten()
            .map(|a| x[a.axis] - a.anchor)
    }
}

/// `u_α = (x_axis − a)·û_α` where a transform is set, else `û_α`.
pub fn forward(net: &Network, bc: &HardBcTransform, x: &[f64]) -> Result<Vec<f64>> {
    let mut u = net.eval(x)?;
    if bc.components.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: bc.components.len(),
        });
    }
    for (alpha, v) in u.iter_mut().enumerate() {
        if let Some(s) = bc.factor(alpha, x) {
            *v *= s;
        }
    }
    Ok(u)
}

/// A displacement field built from one or more networks whose outputs are
/// concatenated in order, followed by the hard boundary-condition transform.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldModel {
    dim: usize,
    nets: Vec<Network>,
    bc: HardBcTransform,
}

impl FieldModel {
    pub fn new(dim: usize, nets: Vec<Network>, bc: HardBcTransform) -> Result<Self> {
        if nets.is_empty() {
            return Err(Error::InvalidConfig("a field model needs at least one network".into()));
        }
        for net in &nets {
            if net.n_input() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: net.n_input(),
                });
            }
        }
        let n_comp: usize = nets.iter().map(Network::n_output).sum();
        if n_comp > MAX_DIM || bc.components.len() != n_comp {
            return Err(Error::DimensionMismatch {
                expected: n_comp,
                got: bc.components.len(),
            });
        }
        for anchor in bc.components.iter().flatten() {
            if anchor.axis >= dim {
                return Err(Error::InvalidConfig(format!(
                    "hard-BC axis {} outside a {dim}-dimensional domain",
                    anchor.axis
                )));
            }
        }
        Ok(FieldModel { dim, nets, bc })
    }

    /// One freshly initialized network per config; each config's seed is used as given.
    pub fn from_configs(dim: usize, configs: &[NetworkConfig], bc: HardBcTransform) -> Result<Self> {
        let nets = configs.iter().map(init_network).collect::<Result<Vec<_>>>()?;
        Self::new(dim, nets, bc)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.bc.components.len()
    }

    pub fn nets(&self) -> &[Network] {
        &self.nets
    }

    pub fn nets_mut(&mut self) -> &mut [Network] {
        &mut self.nets
    }

    pub fn bc(&self) -> &HardBcTransform {
        &self.bc
    }

    pub fn param_count(&self) -> usize {
        self.nets.iter().map(Network::param_count).sum()
    }

    /// Network-major concatenation of each network's canonical parameters.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for net in &self.nets {
            net.write_params(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for net in &mut self.nets {
            let n = net.param_count();
            net.set_params(&params[offset..offset + n])?;
            offset += n;
        }
        Ok(())
    }

    /// Displacement at `x` with the hard-BC transform applied.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut u = Vec::with_capacity(self.n_components());
        for net in &self.nets {
            u.extend(net.eval(x)?);
        }
        for (alpha, v) in u.iter_mut().enumerate() {
            if let Some(s) = self.bc.factor(alpha, x) {
                *v *= s;
            }
        }
        Ok(u)
    }
}

/// Decorrelates per-network seeds derived from one run seed (SplitMix64).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rod_cfg(seed: u64) -> NetworkConfig {
        NetworkConfig::new(1, 1, vec![5, 5, 5], seed)
    }

    #[test]
    fn rod_parameter_count() {
        assert_eq!(rod_cfg(0).param_count(), 76);
        assert_eq!(init_network(&rod_cfg(0)).unwrap().params().len(), 76);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = init_network(&rod_cfg(7)).unwrap();
        let b = init_network(&rod_cfg(7)).unwrap();
        let c = init_network(&rod_cfg(8)).unwrap();
        let bits = |n: &Network| n.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn adding_layers_keeps_earlier_layers() {
        let short = init_network(&NetworkConfig::new(2, 1, vec![20, 20], 3)).unwrap();
        let long = init_network(&NetworkConfig::new(2, 1, vec![20, 20, 20], 3)).unwrap();
        assert_eq!(short.layers()[0], long.layers()[0]);
        assert_eq!(short.layers()[1], long.layers()[1]);
    }

    #[test]
    fn lecun_variance() {
        // 10^4 draws of a fan_in = 20 weight block.
        let net = init_network(&NetworkConfig::new(1, 1, vec![20, 500], 11)).unwrap();
        let w = &net.layers()[1].weights;
        assert_eq!(w.len(), 10_000);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        assert!((var - 0.05).abs() < 0.005, "variance {var}");
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(init_network(&NetworkConfig::new(1, 1, vec![], 0)).is_err());
        assert!(init_network(&NetworkConfig::new(1, 1, vec![3, 0], 0)).is_err());
        assert!(init_network(&NetworkConfig::new(4, 1, vec![3], 0)).is_err());
    }

    #[test]
    fn params_roundtrip_through_setter() {
        let mut net = init_network(&rod_cfg(1)).unwrap();
        let p: Vec<f64> = (0..76).map(|k| k as f64 * 0.01).collect();
        net.set_params(&p).unwrap();
        assert_eq!(net.params(), p);
        // weights come first, row-major, then biases
        assert_eq!(net.layers()[0].weights[[4, 0]], 0.04);
        assert_eq!(net.layers()[0].bias[0], 0.05);
        assert!(net.set_params(&p[1..]).is_err());
    }

    #[test]
    fn rod_transform_vanishes_at_anchor() {
        let net = init_network(&rod_cfg(2)).unwrap();
        let bc = HardBcTransform::symmetry_planes(1);
        assert_eq!(forward(&net, &bc, &[0.0]).unwrap(), vec![0.0]);
        assert!(forward(&net, &bc, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn zero_network_is_zero_map() {
        let mut net = init_network(&NetworkConfig::new(2, 1, vec![4, 4], 0)).unwrap();
        let zeros = vec![0.0; net.param_count()];
        net.set_params(&zeros).unwrap();
        let bc = HardBcTransform::none(1);
        assert_eq!(forward(&net, &bc, &[0.3, 0.9]).unwrap(), vec![0.0]);
    }

    #[test]
    fn plate_and_cube_transforms_hold_on_their_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for dim in [2usize, 3] {
            for trial in 0..5u64 {
                let cfgs: Vec<_> = (0..dim)
                    .map(|k| NetworkConfig::new(dim, 1, vec![20, 20, 20], derive_seed(trial, k as u64)))
                    .collect();
                let model =
                    FieldModel::from_configs(dim, &cfgs, HardBcTransform::symmetry_planes(dim)).unwrap();
                for _ in 0..100 {
                    let mut x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                    let axis = rng.random_range(0..dim);
                    x[axis] = 0.0;
                    let u = model.forward(&x).unwrap();
                    assert_eq!(u[axis], 0.0);
                }
            }
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..4).map(|k| derive_seed(0, k)).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(s[i], s[j]);
            }
        }
    }
}
