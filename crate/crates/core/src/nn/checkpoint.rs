//! Model checkpoint format.
//!
//! A checkpoint is a text header followed by raw little-endian f32 data:
//!
//! ```text
//! FEDSIM-NET 1
//! input 3 32 32
//! layers 4
//! conv2d in=3 out=8 kernel=3 stride=1 padding=1 bias=1
//! relu
//! flatten
//! dense in=8192 out=10 bias=1
//! params 82186
//! data
//! <params * 4 bytes, weights then bias per layer, declaration order>
//! ```
//!
//! Writing is canonical, so save -> load -> save is byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::count::count_params;
use crate::nn::layer::LayerSpec;
use crate::nn::network::{Layer, Network};
use crate::tensor::Tensor;

const MAGIC: &str = "FEDSIM-NET";
const VERSION: u32 = 1;

/// Serialize into any writer.
pub fn save<W: Write>(net: &Network<f32>, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC} {VERSION}")?;
    let dims: Vec<String> = net.input_shape().iter().map(|d| d.to_string()).collect();
    writeln!(w, "input {}", dims.join(" "))?;
    writeln!(w, "layers {}", net.layers().len())?;
    for layer in net.layers() {
        writeln!(w, "{}", spec_line(&layer.spec))?;
    }
    writeln!(w, "params {}", count_params(net))?;
    writeln!(w, "data")?;
    for param in net.params() {
        for v in param.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Serialize to a file at `path`.
pub fn save_to_path(net: &Network<f32>, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    save(net, BufWriter::new(file))
}

/// Serialized size in bytes without touching the filesystem.
pub fn serialized_size(net: &Network<f32>) -> u64 {
    let mut buf = Vec::new();
    save(net, &mut buf).expect("in-memory serialization cannot fail");
    buf.len() as u64
}

/// Deserialize from any reader.
pub fn load<R: Read>(r: R) -> Result<Network<f32>> {
    let mut r = BufReader::new(r);
    let mut text = Vec::new();
    // Read the header byte-wise up to and including the "data\n" marker.
    loop {
        let mut byte = [0u8; 1];
        if r.read(&mut byte)? == 0 {
            return Err(Error::Checkpoint("unexpected EOF in header".into()));
        }
        text.push(byte[0]);
        if text.ends_with(b"\ndata\n") {
            break;
        }
        if text.len() > 1 << 20 {
            return Err(Error::Checkpoint("header exceeds 1 MiB".into()));
        }
    }
    let header = std::str::from_utf8(&text)
        .map_err(|e| Error::Checkpoint(format!("header is not UTF-8: {e}")))?;
    let mut lines = header.lines();

    let magic = lines.next().unwrap_or_default();
    let mut magic_parts = magic.split_whitespace();
    if magic_parts.next() != Some(MAGIC) {
        return Err(Error::Checkpoint(format!("bad magic line {magic:?}")));
    }
    let version: u32 = magic_parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Checkpoint("missing format version".into()))?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }

    let input_line = lines.next().unwrap_or_default();
    let input_shape = parse_prefixed_usizes(input_line, "input")?;

    let layers_line = lines.next().unwrap_or_default();
    let layer_count = *parse_prefixed_usizes(layers_line, "layers")?
        .first()
        .ok_or_else(|| Error::Checkpoint("missing layer count".into()))?;

    let mut specs = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let line = lines
            .next()
            .ok_or_else(|| Error::Checkpoint("truncated layer list".into()))?;
        specs.push(parse_spec_line(line)?);
    }

    let params_line = lines.next().unwrap_or_default();
    let declared_params = *parse_prefixed_usizes(params_line, "params")?
        .first()
        .ok_or_else(|| Error::Checkpoint("missing param count".into()))?;

    let mut read_tensor = |shape: Vec<usize>| -> Result<Tensor<f32>> {
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::Checkpoint(format!("truncated parameter data: {e}")))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Tensor::new(shape, data)
    };

    let mut layers = Vec::with_capacity(layer_count);
    for spec in specs {
        let (weight, bias) = match spec {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, bias, .. } => (
                Some(read_tensor(vec![out_channels, in_channels, kernel, kernel])?),
                if bias { Some(read_tensor(vec![out_channels])?) } else { None },
            ),
            LayerSpec::Dense { in_features, out_features, bias } => (
                Some(read_tensor(vec![out_features, in_features])?),
                if bias { Some(read_tensor(vec![out_features])?) } else { None },
            ),
            _ => (None, None),
        };
        layers.push(Layer { spec, weight, bias });
    }
    let net = Network::from_parts(input_shape, layers)?;
    let actual = count_params(&net) as usize;
    if actual != declared_params {
        return Err(Error::Checkpoint(format!(
            "declared {declared_params} params, layer specs imply {actual}"
        )));
    }
    Ok(net)
}

pub fn load_from_path(path: &Path) -> Result<Network<f32>> {
    load(File::open(path)?)
}

fn spec_line(spec: &LayerSpec) -> String {
    match *spec {
        LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding, bias } => format!(
            "conv2d in={in_channels} out={out_channels} kernel={kernel} stride={stride} \
             padding={padding} bias={}",
            bias as u8
        ),
        LayerSpec::Dense { in_features, out_features, bias } => {
            format!("dense in={in_features} out={out_features} bias={}", bias as u8)
        }
        LayerSpec::Relu => "relu".into(),
        LayerSpec::MaxPool2d { kernel, stride } => {
            format!("maxpool2d kernel={kernel} stride={stride}")
        }
        LayerSpec::GlobalAvgPool => "global-avg-pool".into(),
        LayerSpec::Flatten => "flatten".into(),
        LayerSpec::ResidualAdd { source } => format!("residual-add source={source}"),
    }
}

fn parse_spec_line(line: &str) -> Result<LayerSpec> {
    let mut parts = line.split_whitespace();
    let kind = parts.next().unwrap_or_default();
    let mut fields = std::collections::BTreeMap::new();
    for part in parts {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad field {part:?} in {line:?}")))?;
        let v: usize = v
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad value {v:?} in {line:?}")))?;
        fields.insert(k.to_string(), v);
    }
    let get = |k: &str| -> Result<usize> {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::Checkpoint(format!("missing field {k} in {line:?}")))
    };
    Ok(match kind {
        "conv2d" => LayerSpec::Conv2d {
            in_channels: get("in")?,
            out_channels: get("out")?,
            kernel: get("kernel")?,
            stride: get("stride")?,
            padding: get("padding")?,
            bias: get("bias")? != 0,
        },
        "dense" => LayerSpec::Dense {
            in_features: get("in")?,
            out_features: get("out")?,
            bias: get("bias")? != 0,
        },
        "relu" => LayerSpec::Relu,
        "maxpool2d" => LayerSpec::MaxPool2d { kernel: get("kernel")?, stride: get("stride")? },
        "global-avg-pool" => LayerSpec::GlobalAvgPool,
        "flatten" => LayerSpec::Flatten,
        "residual-add" => LayerSpec::ResidualAdd { source: get("source")? },
        other => return Err(Error::Checkpoint(format!("unknown layer kind {other:?}"))),
    })
}

fn parse_prefixed_usizes(line: &str, prefix: &str) -> Result<Vec<usize>> {
    let rest = line
        .strip_prefix(prefix)
        .ok_or_else(|| Error::Checkpoint(format!("expected {prefix:?} line, got {line:?}")))?;
    rest.split_whitespace()
        .map(|v| {
            v.parse()
                .map_err(|_| Error::Checkpoint(format!("bad number {v:?} in {line:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::NetworkBuilder;

    fn sample_net() -> Network<f32> {
        NetworkBuilder::new(&[2, 6, 6])
            .conv2d(4, 3, 1, 1, true)
            .relu()
            .conv2d(4, 3, 1, 1, false)
            .residual_add(1)
            .maxpool2d(2, 2)
            .global_avg_pool()
            .dense(3, true)
            .build_seeded(5)
            .unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let net = sample_net();
        let mut first = Vec::new();
        save(&net, &mut first).unwrap();
        let loaded = load(first.as_slice()).unwrap();
        let mut second = Vec::new();
        save(&loaded, &mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(net, loaded);
    }

    #[test]
    fn binary_payload_is_exactly_four_bytes_per_param() {
        let net = sample_net();
        let mut bytes = Vec::new();
        save(&net, &mut bytes).unwrap();
        let marker = b"\ndata\n";
        let header_end = bytes
            .windows(marker.len())
            .position(|w| w == marker)
            .unwrap()
            + marker.len();
        assert_eq!((bytes.len() - header_end) as u64, 4 * count_params(&net));
    }

    #[test]
    fn truncated_data_is_detected() {
        let net = sample_net();
        let mut bytes = Vec::new();
        save(&net, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(load(bytes.as_slice()).is_err());
    }

    #[test]
    fn bad_magic_is_detected() {
        assert!(load(&b"NOT-A-NET 1\ndata\n"[..]).is_err());
    }

    #[test]
    fn declared_param_count_is_checked() {
        let net = sample_net();
        let mut bytes = Vec::new();
        save(&net, &mut bytes).unwrap();
        let text = String::from_utf8_lossy(&bytes[..200]).to_string();
        let params = count_params(&net);
        let tampered =
            String::from_utf8_lossy(&bytes).replacen(&format!("params {params}"), "params 1", 1);
        assert!(text.contains("FEDSIM-NET"));
        assert!(load(tampered.as_bytes()).is_err());
    }
}
