//! Plain-text checkpoints.
//!
//! ```text
//! elastic-pinn-network 1
//! n_input 1
//! n_output 1
//! hidden 5 5 5
//! activation tanh
//! init lecun_normal
//! seed 0
//! params 76
//! <one parameter per line, canonical order>
//! end
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so reading a
//! checkpoint back reproduces every parameter bit for bit. A model file wraps
//! one or more network blocks behind a header giving the spatial dimension
//! and the hard-BC anchor of each output component (`axis:anchor` or `-`).

use super::{Activation, Anchor, FieldModel, HardBcTransform, Init, Network, NetworkConfig};
use crate::error::{Error, Result};

const NETWORK_TAG: &str = "elastic-pinn-network";
const MODEL_TAG: &str = "elastic-pinn-model";
const VERSION: u32 = 1;

pub fn serialize(net: &Network) -> Vec<u8> {
    let mut s = String::new();
    write_network(net, &mut s);
    s.into_bytes()
}

pub fn deserialize(bytes: &[u8]) -> Result<Network> {
    let mut lines = Lines::new(bytes)?;
    let net = read_network(&mut lines)?;
    lines.expect_eof()?;
    Ok(net)
}

pub fn serialize_model(model: &FieldModel) -> Vec<u8> {
    let mut s = format!("{MODEL_TAG} {VERSION}\ndim {}\nbc", model.dim());
    for c in &model.bc().components {
        match c {
            Some(a) => s.push_str(&format!(" {}:{:?}", a.axis, a.anchor)),
            None => s.push_str(" -"),
        }
    }
    s.push_str(&format!("\nnets {}\n", model.nets().len()));
    for net in model.nets() {
        write_network(net, &mut s);
    }
    s.into_bytes()
}

pub fn deserialize_model(bytes: &[u8]) -> Result<FieldModel> {
    let mut lines = Lines::new(bytes)?;
    let (n, header) = lines.next_required()?;
    check_header(n, header, MODEL_TAG)?;
    let dim = lines.keyed_usize("dim")?;
    let (n, bc_line) = lines.next_required()?;
    let mut words = bc_line.split_whitespace();
    if words.next() != Some("bc") {
        return Err(Error::parse(n, "expected `bc`"));
    }
    let components = words
        .map(|w| parse_anchor(n, w))
        .collect::<Result<Vec<_>>>()?;
    let count = lines.keyed_usize("nets")?;
    let nets = (0..count)
        .map(|_| read_network(&mut lines))
        .collect::<Result<Vec<_>>>()?;
    lines.expect_eof()?;
    FieldModel::new(dim, nets, HardBcTransform { components })
}

fn parse_anchor(line: usize, word: &str) -> Result<Option<Anchor>> {
    if word == "-" {
        return Ok(None);
    }
    let (axis, anchor) = word
        .split_once(':')
        .ok_or_else(|| Error::parse(line, format!("bad anchor `{word}`")))?;
    Ok(Some(Anchor {
        axis: axis
            .parse()
            .map_err(|_| Error::parse(line, format!("bad axis `{axis}`")))?,
        anchor: anchor
            .parse()
            .map_err(|_| Error::parse(line, format!("bad anchor value `{anchor}`")))?,
    }))
}

fn write_network(net: &Network, s: &mut String) {
    let cfg = net.config();
    let hidden: Vec<String> = cfg.hidden_layers.iter().map(usize::to_string).collect();
    s.push_str(&format!(
        "{NETWORK_TAG} {VERSION}\nn_input {}\nn_output {}\nhidden {}\nactivation {}\ninit {}\nseed {}\nparams {}\n",
        cfg.n_input,
        cfg.n_output,
        hidden.join(" "),
        match cfg.activation {
            Activation::Tanh => "tanh",
        },
        match cfg.init {
            Init::LecunNormal => "lecun_normal",
        },
        cfg.seed,
        net.param_count(),
    ));
    for p in net.params() {
        s.push_str(&format!("{p:?}\n"));
    }
    s.push_str("end\n");
}

fn read_network(lines: &mut Lines<'_>) -> Result<Network> {
    let (n, header) = lines.next_required()?;
    check_header(n, header, NETWORK_TAG)?;
    let n_input = lines.keyed_usize("n_input")?;
    let n_output = lines.keyed_usize("n_output")?;
    let (n, hidden) = lines.keyed("hidden")?;
    let hidden_layers = hidden
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| Error::parse(n, format!("bad width `{w}`"))))
        .collect::<Result<Vec<usize>>>()?;
    let (n, act) = lines.keyed("activation")?;
    let activation = match act {
        "tanh" => Activation::Tanh,
        other => return Err(Error::parse(n, format!("unknown activation `{other}`"))),
    };
    let (n, init) = lines.keyed("init")?;
    let init = match init {
        "lecun_normal" => Init::LecunNormal,
        other => return Err(Error::parse(n, format!("unknown init `{other}`"))),
    };
    let (n, seed) = lines.keyed("seed")?;
    let seed = seed
        .parse()
        .map_err(|_| Error::parse(n, format!("bad seed `{seed}`")))?;
    let config = NetworkConfig {
        n_input,
        n_output,
        hidden_layers,
        activation,
        init,
        seed,
    };
    config
        .validate()
        .map_err(|e| Error::parse(n, e.to_string()))?;
    let (n, count) = lines.keyed("params")?;
    let count: usize = count
        .parse()
        .map_err(|_| Error::parse(n, format!("bad parameter count `{count}`")))?;
    if count != config.param_count() {
        return Err(Error::parse(
            n,
            format!("{count} parameters declared, shape needs {}", config.param_count()),
        ));
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, v) = lines.next_required()?;
        params.push(
            v.parse::<f64>()
                .map_err(|_| Error::parse(n, format!("bad parameter `{v}`")))?,
        );
    }
    let (n, end) = lines.next_required()?;
    if end != "end" {
        return Err(Error::parse(n, "expected `end`"));
    }
    let mut net = super::init_network(&config)?;
    net.set_params(&params)?;
    Ok(net)
}

fn check_header(line: usize, header: &str, tag: &str) -> Result<()> {
    let mut words = header.split_whitespace();
    if words.next() != Some(tag) {
        return Err(Error::parse(line, format!("expected `{tag}` header")));
    }
    match words.next().and_then(|v| v.parse::<u32>().ok()) {
        Some(VERSION) => Ok(()),
        Some(v) => Err(Error::parse(line, format!("unsupported version {v}"))),
        None => Err(Error::parse(line, "missing version")),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(bytes: &'a [u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::parse(0, "not UTF-8"))?;
        Ok(Lines {
            inner: text.lines().enumerate(),
        })
    }

    fn next_required(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| Error::parse(0, "unexpected end of input"))
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next_required()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok((n, rest.trim())),
            _ if line == key => Ok((n, "")),
            _ => Err(Error::parse(n, format!("expected `{key}`"))),
        }
    }

    fn keyed_usize(&mut self, key: &str) -> Result<usize> {
        let (n, v) = self.keyed(key)?;
        v.parse()
            .map_err(|_| Error::parse(n, format!("bad value `{v}` for `{key}`")))
    }

    fn expect_eof(&mut self) -> Result<()> {
        match self.inner.find(|(_, l)| !l.trim().is_empty()) {
            None => Ok(()),
            Some((i, _)) => Err(Error::parse(i + 1, "trailing content")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{derive_seed, init_network};
    use proptest::prelude::*;

    fn rod() -> Network {
        init_network(&NetworkConfig::new(1, 1, vec![5, 5, 5], 4)).unwrap()
    }

    #[test]
    fn fresh_rod_network_roundtrips_bitwise() {
        let net = rod();
        let back = deserialize(&serialize(&net)).unwrap();
        let bits = |n: &Network| n.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&net), bits(&back));
        assert_eq!(net.config(), back.config());
    }

    #[test]
    fn truncated_stream_is_rejected() {
        let bytes = serialize(&rod());
        for cut in [0, 10, bytes.len() / 2, bytes.len() - 5] {
            assert!(matches!(deserialize(&bytes[..cut]), Err(Error::Parse { .. })), "cut {cut}");
        }
    }

    #[test]
    fn wrong_version_and_garbage_are_rejected() {
        let text = String::from_utf8(serialize(&rod())).unwrap();
        let v2 = text.replacen("elastic-pinn-network 1", "elastic-pinn-network 2", 1);
        assert!(deserialize(v2.as_bytes()).is_err());
        let bad = text.replacen("params 76", "params 75", 1);
        assert!(deserialize(bad.as_bytes()).is_err());
        let trailing = format!("{text}junk\n");
        assert!(deserialize(trailing.as_bytes()).is_err());
    }

    #[test]
    fn model_roundtrip() {
        let cfgs: Vec<_> = (0..2)
            .map(|k| NetworkConfig::new(2, 1, vec![20, 20, 20], derive_seed(0, k)))
            .collect();
        let model = FieldModel::from_configs(2, &cfgs, HardBcTransform::symmetry_planes(2)).unwrap();
        let back = deserialize_model(&serialize_model(&model)).unwrap();
        assert_eq!(model, back);
    }

    proptest! {
        #[test]
        fn arbitrary_parameters_roundtrip(params in proptest::collection::vec(
            proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 76)) {
            let mut net = rod();
            net.set_params(&params).unwrap();
            let back = deserialize(&serialize(&net)).unwrap();
            let a: Vec<u64> = net.params().iter().map(|p| p.to_bits()).collect();
            let b: Vec<u64> = back.params().iter().map(|p| p.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
