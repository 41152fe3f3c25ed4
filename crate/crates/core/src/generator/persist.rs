use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::network::{Activation, GeneratorParams};
use super::train::{KnockoffGenerator, Standardizer};
use super::TrainingConfig;
use crate::decorrelation::SdpSolution;
use crate::error::{Error, Result};

const FORMAT: &str = "softrank-knockoff-generator";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDocument {
    /// Row-major, `inputs x outputs`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// JSON layout of a saved generator. Floats are written in shortest
/// round-trip form, so loading reproduces every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub standardizer: Standardizer,
    pub seed: u64,
    pub config: TrainingConfig,
    pub s_star: SdpSolution,
    pub layers: Vec<LayerDocument>,
}

impl ModelDocument {
    pub fn from_model(model: &KnockoffGenerator) -> Self {
        let p = &model.params;
        Self {
            format: FORMAT.into(),
            version: VERSION,
            layer_dims: p.layer_dims.clone(),
            activation: p.activation,
            standardizer: model.standardizer.clone(),
            seed: model.config.seed,
            config: model.config.clone(),
            s_star: model.s_star.clone(),
            layers: p
                .weights
                .iter()
                .zip(&p.biases)
                .map(|(w, b)| LayerDocument {
                    weights: w.rows().into_iter().map(|r| r.to_vec()).collect(),
                    biases: b.to_vec(),
                })
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<KnockoffGenerator> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Parse(format!(
                "unsupported model document {} v{}",
                self.format, self.version
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, layer) in self.layers.into_iter().enumerate() {
            let rows = layer.weights.len();
            let cols = layer.weights.first().map_or(0, Vec::len);
            if layer.weights.iter().any(|r| r.len() != cols) {
                return Err(Error::Parse(format!("layer {l} has ragged weights")));
            }
            let flat = layer.weights.into_iter().flatten().collect();
            weights.push(Array2::from_shape_vec((rows, cols), flat).map_err(|e| Error::Parse(e.to_string()))?);
            biases.push(Array1::from(layer.biases));
        }
        let params = GeneratorParams {
            layer_dims: self.layer_dims,
            weights,
            biases,
            activation: self.activation,
        };
        params.validate().map_err(|e| Error::Parse(e.to_string()))?;
        let d = params.dim();
        if self.standardizer.mean.len() != d || self.standardizer.scale.len() != d || self.s_star.s.len() != d {
            return Err(Error::Parse("standardizer or s* does not match the network width".into()));
        }
        Ok(KnockoffGenerator {
            params,
            standardizer: self.standardizer,
            config: self.config,
            s_star: self.s_star,
        })
    }
}

pub fn save_model(model: &KnockoffGenerator, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&ModelDocument::from_model(model))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<KnockoffGenerator> {
    let text = fs::read_to_string(path)?;
    let doc: ModelDocument = serde_json::from_str(&text)?;
    doc.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::architecture;
    use crate::rng::seeded;

    fn model() -> KnockoffGenerator {
        let params = GeneratorParams::init(&architecture(3, 2, 2), Activation::default(), &mut seeded(1)).unwrap();
        KnockoffGenerator {
            params,
            standardizer: Standardizer {
                mean: vec![0.1, -1.0 / 3.0, 2.0],
                scale: vec![1.0, 0.7, std::f64::consts::PI],
            },
            config: TrainingConfig::default(),
            s_star: SdpSolution {
                s: vec![0.5, 0.25, 1.0 / 7.0],
                feasibility_gap: 1e-9,
                objective: 0.3,
                objective_trace: vec![0.1, 0.3],
            },
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m = model();
        let dir = std::env::temp_dir().join(format!("softrank-persist-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        fs::remove_dir_all(&dir).ok();
        assert_eq!(back, m);
        for (a, b) in back.params.weights[0].iter().zip(m.params.weights[0].iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_wrong_format_and_shapes() {
        let mut doc = ModelDocument::from_model(&model());
        doc.format = "other".into();
        assert!(matches!(doc.into_model(), Err(Error::Parse(_))));
        let mut doc = ModelDocument::from_model(&model());
        doc.layers[0].biases.pop();
        assert!(matches!(doc.into_model(), Err(Error::Parse(_))));
        let text = serde_json::to_string(&ModelDocument::from_model(&model())).unwrap();
        let extra = text.replacen('{', "{\"surprise\":1,", 1);
        assert!(serde_json::from_str::<ModelDocument>(&extra).is_err());
    }
}
