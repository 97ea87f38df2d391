//! File-based model archive: named row-major tensors, an optional feature
//! scaler and free-form metadata, stored as one JSON document.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Dense, DqnParams, NUM_ACTIONS, STATE_DIM};
use crate::forecaster::{LstmLayer, LstmParams, Scaler, HIDDEN_1, HIDDEN_2, INPUT_SIZE};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("shape mismatch in tensor {name}: {detail}")]
    ShapeMismatch { name: String, detail: String },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u64),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Dqn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    fn new(shape: &[usize], data: &[f64]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: data.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArchive {
    pub format_version: u32,
    pub kind: ModelKind,
    pub tensors: BTreeMap<String, Tensor>,
    pub scaler: Option<Scaler>,
    pub metadata: BTreeMap<String, String>,
}

const LSTM_TENSORS: [&str; 8] = [
    "l1.w_ih", "l1.w_hh", "l1.b", "l2.w_ih", "l2.w_hh", "l2.b", "head.w", "head.b",
];
const DQN_LAYERS: [&str; 4] = ["fc1", "fc2", "value", "advantage"];

fn lstm_shapes() -> BTreeMap<String, Vec<usize>> {
    let g1 = 4 * HIDDEN_1;
    let g2 = 4 * HIDDEN_2;
    let shapes = [
        vec![g1, INPUT_SIZE],
        vec![g1, HIDDEN_1],
        vec![g1],
        vec![g2, HIDDEN_1],
        vec![g2, HIDDEN_2],
        vec![g2],
        vec![HIDDEN_2],
        vec![1],
    ];
    LSTM_TENSORS
        .iter()
        .map(|s| s.to_string())
        .zip(shapes)
        .collect()
}

fn dqn_shapes(hidden: usize) -> BTreeMap<String, Vec<usize>> {
    let dims = [
        (STATE_DIM, hidden),
        (hidden, hidden),
        (hidden, 1),
        (hidden, NUM_ACTIONS),
    ];
    let mut out = BTreeMap::new();
    for (name, (i, o)) in DQN_LAYERS.iter().zip(dims) {
        out.insert(format!("{name}.w"), vec![o, i]);
        out.insert(format!("{name}.b"), vec![o]);
    }
    out
}

impl ModelArchive {
    pub fn from_lstm(params: &LstmParams, scaler: &Scaler) -> Self {
        let data = params.tensors();
        let shapes = lstm_shapes();
        let tensors = LSTM_TENSORS
            .iter()
            .zip(data)
            .map(|(name, d)| (name.to_string(), Tensor::new(&shapes[*name], d)))
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            kind: ModelKind::Lstm,
            tensors,
            scaler: Some(*scaler),
            metadata: BTreeMap::new(),
        }
    }

    pub fn from_dqn(params: &DqnParams) -> Self {
        let mut tensors = BTreeMap::new();
        for (name, d) in params.layers() {
            tensors.insert(
                format!("{name}.w"),
                Tensor::new(&[d.outputs, d.inputs], &d.w),
            );
            tensors.insert(format!("{name}.b"), Tensor::new(&[d.outputs], &d.b));
        }
        Self {
            format_version: FORMAT_VERSION,
            kind: ModelKind::Dqn,
            tensors,
            scaler: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    fn expected_shapes(&self) -> Result<BTreeMap<String, Vec<usize>>, StoreError> {
        match self.kind {
            ModelKind::Lstm => Ok(lstm_shapes()),
            ModelKind::Dqn => {
                let fc1 = self
                    .tensors
                    .get("fc1.b")
                    .ok_or_else(|| StoreError::SchemaMismatch("missing tensor fc1.b".into()))?;
                let hidden = fc1.shape.first().copied().unwrap_or(0);
                Ok(dqn_shapes(hidden))
            }
        }
    }

    /// Checks version, tensor names and shapes.
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.format_version != FORMAT_VERSION {
            return Err(StoreError::UnsupportedVersion(self.format_version as u64));
        }
        let expected = self.expected_shapes()?;
        for name in expected.keys() {
            if !self.tensors.contains_key(name) {
                return Err(StoreError::SchemaMismatch(format!("missing tensor {name}")));
            }
        }
        for (name, t) in &self.tensors {
            let Some(shape) = expected.get(name) else {
                return Err(StoreError::SchemaMismatch(format!("unknown tensor {name}")));
            };
            let n: usize = t.shape.iter().product();
            if n != t.data.len() {
                return Err(StoreError::ShapeMismatch {
                    name: name.clone(),
                    detail: format!(
                        "shape {:?} holds {n} values, data has {}",
                        t.shape,
                        t.data.len()
                    ),
                });
            }
            if &t.shape != shape {
                return Err(StoreError::ShapeMismatch {
                    name: name.clone(),
                    detail: format!("expected {shape:?}, found {:?}", t.shape),
                });
            }
        }
        match (self.kind, self.scaler.is_some()) {
            (ModelKind::Lstm, false) => Err(StoreError::SchemaMismatch(
                "lstm archive without scaler".into(),
            )),
            _ => Ok(()),
        }
    }

    fn tensor(&self, name: &str) -> Result<&Tensor, StoreError> {
        self.tensors
            .get(name)
            .ok_or_else(|| StoreError::SchemaMismatch(format!("missing tensor {name}")))
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<(), StoreError> {
        if self.kind != kind {
            return Err(StoreError::SchemaMismatch(format!(
                "expected a {kind:?} archive, found {:?}",
                self.kind
            )));
        }
        self.validate()
    }

    pub fn to_dqn(&self) -> Result<DqnParams, StoreError> {
        self.expect_kind(ModelKind::Dqn)?;
        let layer = |name: &str| -> Result<Dense, StoreError> {
            let w = self.tensor(&format!("{name}.w"))?;
            let b = self.tensor(&format!("{name}.b"))?;
            Ok(Dense {
                inputs: w.shape[1],
                outputs: w.shape[0],
                w: w.data.clone(),
                b: b.data.clone(),
            })
        };
        Ok(DqnParams {
            fc1: layer("fc1")?,
            fc2: layer("fc2")?,
            value: layer("value")?,
            advantage: layer("advantage")?,
        })
    }

    pub fn to_lstm(&self) -> Result<(LstmParams, Scaler), StoreError> {
        self.expect_kind(ModelKind::Lstm)?;
        let layer = |prefix: &str, input: usize, hidden: usize| -> Result<LstmLayer, StoreError> {
            Ok(LstmLayer {
                input,
                hidden,
                w_ih: self.tensor(&format!("{prefix}.w_ih"))?.data.clone(),
                w_hh: self.tensor(&format!("{prefix}.w_hh"))?.data.clone(),
                b: self.tensor(&format!("{prefix}.b"))?.data.clone(),
            })
        };
        let params = LstmParams {
            layer1: layer("l1", INPUT_SIZE, HIDDEN_1)?,
            layer2: layer("l2", HIDDEN_1, HIDDEN_2)?,
            head_w: self.tensor("head.w")?.data.clone(),
            head_b: self.tensor("head.b")?.data[0],
        };
        let scaler = self
            .scaler
            .ok_or_else(|| StoreError::SchemaMismatch("lstm archive without scaler".into()))?;
        Ok((params, scaler))
    }
}

/// Writes the archive as pretty-printed JSON. Floats use shortest
/// round-trip formatting, so a reload is bit-exact.
pub fn save(archive: &ModelArchive, path: &Path) -> Result<(), StoreError> {
    archive.validate()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(archive)
        .map_err(|e| StoreError::SchemaMismatch(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelArchive, StoreError> {
    let text = fs::read_to_string(path)?;
    from_json(&text)
}

/// Parses and validates an archive document.
pub fn from_json(text: &str) -> Result<ModelArchive, StoreError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| StoreError::SchemaMismatch(e.to_string()))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(StoreError::UnsupportedVersion(v)),
        None => return Err(StoreError::SchemaMismatch("missing format_version".into())),
    }
    let archive: ModelArchive =
        serde_json::from_value(value).map_err(|e| StoreError::SchemaMismatch(e.to_string()))?;
    archive.validate()?;
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dqn() -> DqnParams {
        DqnParams::init(64, &mut ChaCha8Rng::seed_from_u64(3))
    }

    #[test]
    fn dqn_names_and_shapes() {
        let a = ModelArchive::from_dqn(&dqn());
        let names: Vec<_> = a.tensors.keys().cloned().collect();
        assert_eq!(
            names,
            [
                "advantage.b",
                "advantage.w",
                "fc1.b",
                "fc1.w",
                "fc2.b",
                "fc2.w",
                "value.b",
                "value.w"
            ]
        );
        assert_eq!(a.tensors["fc1.w"].shape, vec![64, 4]);
        assert_eq!(a.tensors["advantage.w"].shape, vec![3, 64]);
        assert!(a.validate().is_ok());
        assert_eq!(a.to_dqn().unwrap(), dqn());
    }

    #[test]
    fn lstm_round_trips_in_memory() {
        let p = LstmParams::init(&mut ChaCha8Rng::seed_from_u64(1));
        let s = Scaler {
            mean: [500.0, 2.0],
            std: [120.5, 0.75],
        };
        let a = ModelArchive::from_lstm(&p, &s);
        assert_eq!(a.tensors["l1.w_ih"].shape, vec![128, 2]);
        assert_eq!(a.tensors["l2.w_hh"].shape, vec![64, 16]);
        let back = from_json(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back.to_lstm().unwrap(), (p, s));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let a = ModelArchive::from_dqn(&dqn());
        assert!(matches!(a.to_lstm(), Err(StoreError::SchemaMismatch(_))));
    }

    #[test]
    fn extra_and_missing_tensors() {
        let mut a = ModelArchive::from_dqn(&dqn());
        a.tensors.insert("fc3.w".into(), Tensor::new(&[1], &[0.0]));
        assert!(matches!(a.validate(), Err(StoreError::SchemaMismatch(_))));
        let mut a = ModelArchive::from_dqn(&dqn());
        a.tensors.remove("value.b");
        assert!(matches!(a.validate(), Err(StoreError::SchemaMismatch(_))));
    }

    #[test]
    fn version_and_shape_checks() {
        let mut a = ModelArchive::from_dqn(&dqn());
        a.format_version = 2;
        let text = serde_json::to_string(&a).unwrap();
        assert!(matches!(
            from_json(&text),
            Err(StoreError::UnsupportedVersion(2))
        ));

        let mut a = ModelArchive::from_dqn(&dqn());
        a.tensors.get_mut("fc2.w").unwrap().shape = vec![64, 63];
        assert!(matches!(
            a.validate(),
            Err(StoreError::ShapeMismatch { .. })
        ));
    }
}
