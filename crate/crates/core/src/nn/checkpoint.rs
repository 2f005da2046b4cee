//! Parameter checkpoints: a flat little-endian f64 binary next to a JSON
//! sidecar describing the architecture and head size.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, Mlp, NnError};

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    arch: Architecture,
    class_count: usize,
    seed: u64,
    param_count: usize,
}

/// Write `<path>.bin` (raw f64 little-endian parameters in flatten order)
/// and `<path>.json` (architecture sidecar).
pub fn save(model: &Mlp<f64>, path: &Path) -> Result<(), NnError> {
    let flat = model.flatten();
    let sidecar = Sidecar {
        arch: model.arch.clone(),
        class_count: model.class_count(),
        seed: model.seed(),
        param_count: flat.len(),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| NnError::Checkpoint(e.to_string()))?;
    fs::write(path.with_extension("json"), json)?;
    let mut bin = fs::File::create(path.with_extension("bin"))?;
    for v in flat {
        bin.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Mlp<f64>, NnError> {
    let json = fs::read_to_string(path.with_extension("json"))?;
    let sidecar: Sidecar =
        serde_json::from_str(&json).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let mut model = Mlp::with_seed(sidecar.arch, sidecar.seed);
    model.expand_head(sidecar.class_count);
    if model.param_count() != sidecar.param_count {
        return Err(NnError::Checkpoint(format!(
            "parameter count mismatch: sidecar says {}, architecture gives {}",
            sidecar.param_count,
            model.param_count()
        )));
    }
    let mut bin = fs::File::open(path.with_extension("bin"))?;
    let mut bytes = Vec::new();
    bin.read_to_end(&mut bytes)?;
    if bytes.len() != sidecar.param_count * 8 {
        return Err(NnError::Checkpoint("binary size mismatch".into()));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    model.assign_flat(&flat);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::HeadKind;

    #[test]
    fn round_trip_is_bit_exact() {
        for head in [HeadKind::Standard, HeadKind::CosineNorm] {
            let arch = Architecture {
                input_dim: 5,
                hidden: vec![7, 3],
                head,
            };
            let mut m = Mlp::new(arch, 21);
            m.expand_head(4);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("model");
            save(&m, &path).unwrap();
            let loaded = load(&path).unwrap();
            assert_eq!(m, loaded);
        }
    }
}
