//! Parameter checkpoints: `<stem>.params` holds one parameter per line in
//! shortest round-trip decimal form, `<stem>.json` records the layout.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{param_count, Mlp, NeuralNetError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
    pub param_count: usize,
    pub activation: String,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut name = stem.as_os_str().to_owned();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> NeuralNetError + '_ {
    move |source| NeuralNetError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn save_checkpoint(stem: &Path, net: &Mlp, seed: u64) -> Result<(), NeuralNetError> {
    let params_path = with_ext(stem, "params");
    let file = fs::File::create(&params_path).map_err(io_err(&params_path))?;
    let mut out = BufWriter::new(file);
    for p in net.params() {
        writeln!(out, "{p:e}").map_err(io_err(&params_path))?;
    }
    out.flush().map_err(io_err(&params_path))?;

    let meta = CheckpointMeta {
        layer_sizes: net.layer_sizes().to_vec(),
        seed,
        param_count: net.params().len(),
        activation: "tanh".to_string(),
    };
    let meta_path = with_ext(stem, "json");
    let text = serde_json::to_string_pretty(&meta).expect("plain struct serializes");
    fs::write(&meta_path, text + "\n").map_err(io_err(&meta_path))?;
    Ok(())
}

pub fn load_checkpoint(stem: &Path) -> Result<(Mlp, CheckpointMeta), NeuralNetError> {
    let meta_path = with_ext(stem, "json");
    let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: CheckpointMeta =
        serde_json::from_str(&text).map_err(|e| NeuralNetError::Checkpoint {
            path: meta_path.display().to_string(),
            message: e.to_string(),
        })?;
    if meta.param_count != param_count(&meta.layer_sizes) {
        return Err(NeuralNetError::Checkpoint {
            path: meta_path.display().to_string(),
            message: "param_count does not match layer_sizes".to_string(),
        });
    }

    let params_path = with_ext(stem, "params");
    let file = fs::File::open(&params_path).map_err(io_err(&params_path))?;
    let mut params = Vec::with_capacity(meta.param_count);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&params_path))?;
        let value: f64 = line.trim().parse().map_err(|_| NeuralNetError::Checkpoint {
            path: params_path.display().to_string(),
            message: format!("line {}: not a number", i + 1),
        })?;
        if !value.is_finite() {
            return Err(NeuralNetError::Checkpoint {
                path: params_path.display().to_string(),
                message: format!("line {}: non-finite parameter", i + 1),
            });
        }
        params.push(value);
    }
    let net = Mlp::from_params(&meta.layer_sizes, params)?;
    Ok((net, meta))
}
