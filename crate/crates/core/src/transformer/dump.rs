//! Binary trace files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"HSTRACE1"
//! u32 layers_run, u32 logits_start, u32 n_tokens, u32 token_id * n_tokens
//! u32 n_tensors, then per tensor:
//!     u32 name_len, name (UTF-8), u32 ndim, u64 dim * ndim, f32 * prod(dims)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use thiserror::Error;

use super::{ForwardTrace, NeuronHandle, ResidualCheckpoints};

const MAGIC: &[u8; 8] = b"HSTRACE1";

#[derive(Debug, Error)]
pub enum TraceDumpError {
    #[error("i/o error on trace file: {0}")]
    Io(#[from] io::Error),
    #[error("malformed trace file: {0}")]
    Malformed(String),
}

fn named_tensors(trace: &ForwardTrace) -> Vec<(String, ArrayD<f32>)> {
    let mut out = Vec::new();
    if let Some(heads) = &trace.head_contributions {
        for (l, a) in heads.iter().enumerate() {
            out.push((format!("heads.{l}"), a.clone().into_dyn()));
        }
    }
    if let Some(acts) = &trace.mlp_activations {
        for (l, a) in acts.iter().enumerate() {
            out.push((format!("mlp.{l}"), a.clone().into_dyn()));
        }
    }
    for (h, a) in &trace.selected_activations {
        out.push((
            format!("neuron.{}.{}", h.layer, h.neuron),
            a.clone().into_dyn(),
        ));
    }
    if let Some(logits) = &trace.logits {
        out.push(("logits".into(), logits.clone().into_dyn()));
    }
    if let Some(r) = &trace.residuals {
        out.push((
            "residual.embeddings".into(),
            r.embeddings.clone().into_dyn(),
        ));
        for (kind, list) in [
            ("block_input", &r.block_input),
            ("post_attention", &r.post_attention),
            ("mlp_output", &r.mlp_output),
        ] {
            for (l, a) in list.iter().enumerate() {
                out.push((format!("residual.{kind}.{l}"), a.clone().into_dyn()));
            }
        }
        out.push(("residual.final".into(), r.final_residual.clone().into_dyn()));
    }
    out
}

/// Write `trace` to `path`.
pub fn write_trace(path: &Path, trace: &ForwardTrace) -> Result<(), TraceDumpError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    let u32le = |buf: &mut Vec<u8>, v: usize| buf.extend_from_slice(&(v as u32).to_le_bytes());
    u32le(&mut buf, trace.layers_run);
    u32le(&mut buf, trace.logits_start);
    u32le(&mut buf, trace.token_ids.len());
    for &t in &trace.token_ids {
        buf.extend_from_slice(&t.to_le_bytes());
    }
    let tensors = named_tensors(trace);
    u32le(&mut buf, tensors.len());
    for (name, a) in tensors {
        u32le(&mut buf, name.len());
        buf.extend_from_slice(name.as_bytes());
        u32le(&mut buf, a.ndim());
        for &dim in a.shape() {
            buf.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for v in a.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], TraceDumpError> {
        if self.0.len() < n {
            return Err(TraceDumpError::Malformed("unexpected end of file".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, TraceDumpError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, TraceDumpError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Read a trace written by [`write_trace`].
pub fn read_trace(path: &Path) -> Result<ForwardTrace, TraceDumpError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = Cursor(&bytes);
    if cur.take(8)? != MAGIC {
        return Err(TraceDumpError::Malformed("bad magic".into()));
    }
    let layers_run = cur.u32()? as usize;
    let logits_start = cur.u32()? as usize;
    let n_tokens = cur.u32()? as usize;
    let token_ids = (0..n_tokens)
        .map(|_| cur.u32())
        .collect::<Result<Vec<_>, _>>()?;

    let mut tensors = BTreeMap::new();
    for _ in 0..cur.u32()? {
        let len = cur.u32()? as usize;
        let name = String::from_utf8(cur.take(len)?.to_vec())
            .map_err(|_| TraceDumpError::Malformed("tensor name is not UTF-8".into()))?;
        let ndim = cur.u32()? as usize;
        let shape = (0..ndim)
            .map(|_| cur.u64().map(|v| v as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let count: usize = shape.iter().product();
        let data = cur.take(
            count
                .checked_mul(4)
                .ok_or_else(|| TraceDumpError::Malformed("tensor too large".into()))?,
        )?;
        let values = data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let array = ArrayD::from_shape_vec(IxDyn(&shape), values).expect("length matches shape");
        tensors.insert(name, array);
    }
    if !cur.0.is_empty() {
        return Err(TraceDumpError::Malformed("trailing bytes".into()));
    }

    let malformed =
        |name: &str| TraceDumpError::Malformed(format!("tensor {name} has the wrong rank"));
    let mut take_list = |prefix: &str| {
        let mut list = Vec::new();
        while let Some(a) = tensors.remove(&format!("{prefix}.{}", list.len())) {
            list.push(a);
        }
        list
    };
    let heads = take_list("heads");
    let mlp = take_list("mlp");
    let block_input = take_list("residual.block_input");
    let post_attention = take_list("residual.post_attention");
    let mlp_output = take_list("residual.mlp_output");

    let head_contributions = (!heads.is_empty())
        .then(|| {
            heads
                .into_iter()
                .map(|a| a.into_dimensionality().map_err(|_| malformed("heads")))
                .collect()
        })
        .transpose()?;
    let mlp_activations = (!mlp.is_empty())
        .then(|| {
            mlp.into_iter()
                .map(|a| a.into_dimensionality().map_err(|_| malformed("mlp")))
                .collect()
        })
        .transpose()?;
    let to2 = |list: Vec<ArrayD<f32>>, name: &str| {
        list.into_iter()
            .map(|a| a.into_dimensionality().map_err(|_| malformed(name)))
            .collect::<Result<Vec<_>, _>>()
    };
    let residuals = match (
        tensors.remove("residual.embeddings"),
        tensors.remove("residual.final"),
    ) {
        (Some(e), Some(f)) => Some(ResidualCheckpoints {
            embeddings: e
                .into_dimensionality()
                .map_err(|_| malformed("residual.embeddings"))?,
            block_input: to2(block_input, "residual.block_input")?,
            post_attention: to2(post_attention, "residual.post_attention")?,
            mlp_output: to2(mlp_output, "residual.mlp_output")?,
            final_residual: f
                .into_dimensionality()
                .map_err(|_| malformed("residual.final"))?,
        }),
        _ => None,
    };
    let logits = tensors
        .remove("logits")
        .map(|a| a.into_dimensionality().map_err(|_| malformed("logits")))
        .transpose()?;

    let mut selected_activations = BTreeMap::new();
    for (name, a) in tensors {
        let handle = name
            .strip_prefix("neuron.")
            .and_then(|rest| rest.split_once('.'))
            .and_then(|(l, j)| Some(NeuronHandle::new(l.parse().ok()?, j.parse().ok()?)))
            .ok_or_else(|| TraceDumpError::Malformed(format!("unknown tensor {name}")))?;
        selected_activations.insert(
            handle,
            a.into_dimensionality().map_err(|_| malformed(&name))?,
        );
    }

    Ok(ForwardTrace {
        token_ids,
        layers_run,
        head_contributions,
        mlp_activations,
        selected_activations,
        logits,
        logits_start,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::synthetic::{random_gpt2, SyntheticScales};
    use crate::model_io::ModelConfig;
    use crate::transformer::{forward, ForwardOptions, NeuronCapture};

    #[test]
    fn trace_round_trip() {
        let config = ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 8,
            d_head: 4,
            d_mlp: 16,
            vocab_size: 20,
            max_positions: 8,
            layer_norm_eps: 1e-5,
        };
        let model = random_gpt2(&config, 3, &SyntheticScales::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");

        let full = forward(&model, &[1, 2, 3], &ForwardOptions::full()).unwrap();
        write_trace(&path, &full).unwrap();
        assert_eq!(read_trace(&path).unwrap(), full);

        let opts = ForwardOptions {
            capture_neurons: NeuronCapture::Only([NeuronHandle::new(1, 3)].into()),
            ..ForwardOptions::default()
        };
        let sparse = forward(&model, &[4, 5], &opts).unwrap();
        write_trace(&path, &sparse).unwrap();
        assert_eq!(read_trace(&path).unwrap(), sparse);

        fs::write(&path, b"HSTRACE1\x01").unwrap();
        assert!(matches!(
            read_trace(&path),
            Err(TraceDumpError::Malformed(_))
        ));
    }
}
