use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{Deserializer, Error as _};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netspec::{LayerSpec, NetworkSpec};

/// Parameters of one edge. KAN edges hold the residual weight and the basis
/// coefficients; MLP connections hold a single weight in `w_b` and no
/// coefficients. Serialized as a flat array `[w_b, c_0, c_1, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    pub w_b: f64,
    pub coeffs: Vec<f64>,
}

impl Serialize for EdgeWeights {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(1 + self.coeffs.len()))?;
        seq.serialize_element(&self.w_b)?;
        for c in &self.coeffs {
            seq.serialize_element(c)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for EdgeWeights {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let flat = Vec::<f64>::deserialize(d)?;
        let (&w_b, coeffs) = flat
            .split_first()
            .ok_or_else(|| D::Error::invalid_length(0, &"at least one weight"))?;
        Ok(Self {
            w_b,
            coeffs: coeffs.to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerWeights {
    /// Row-major by output: edge `(q, p)` is at `q * n_in + p`.
    pub edges: Vec<EdgeWeights>,
    /// Per-output bias, MLP layers only. Missing means zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkWeights {
    pub layers: Vec<LayerWeights>,
}

impl NetworkWeights {
    /// Deterministic weights for `spec`. Values are uniform in
    /// `[-1, 1] / sqrt(n_in)` so hidden activations stay O(1).
    pub fn random(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layers()
            .iter()
            .map(|layer| {
                let scale = 1.0 / (layer.n_in as f64).sqrt();
                let mut draw = || rng.random_range(-1.0..1.0) * scale;
                let coeffs = layer.family.coeff_len();
                let edges = (0..layer.edge_count())
                    .map(|_| EdgeWeights {
                        w_b: draw(),
                        coeffs: (0..coeffs).map(|_| draw()).collect(),
                    })
                    .collect();
                let bias = (!layer.family.is_kan()).then(|| (0..layer.n_out).map(|_| draw()).collect());
                LayerWeights { edges, bias }
            })
            .collect();
        Self { layers }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }

    /// Checks that every layer matches the spec's shapes.
    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        if self.layers.len() != spec.layers().len() {
            return Err(Error::Shape(format!(
                "{} weight layers for a {}-layer network",
                self.layers.len(),
                spec.layers().len()
            )));
        }
        for (l, (w, layer)) in self.layers.iter().zip(spec.layers()).enumerate() {
            check_layer(l, w, layer)?;
        }
        Ok(())
    }
}

fn check_layer(l: usize, w: &LayerWeights, layer: &LayerSpec) -> Result<()> {
    if w.edges.len() != layer.edge_count() {
        return Err(Error::Shape(format!(
            "layer {l}: {} edges, expected {} ({} x {})",
            w.edges.len(),
            layer.edge_count(),
            layer.n_out,
            layer.n_in
        )));
    }
    let want = layer.family.coeff_len();
    if let Some(i) = w.edges.iter().position(|e| e.coeffs.len() != want) {
        return Err(Error::Shape(format!(
            "layer {l}, edge ({}, {}): {} coefficients, expected {want} for {}",
            i / layer.n_in,
            i % layer.n_in,
            w.edges[i].coeffs.len(),
            layer.family
        )));
    }
    match (&w.bias, layer.family.is_kan()) {
        (Some(_), true) => Err(Error::Shape(format!("layer {l}: bias is only supported on mlp layers"))),
        (Some(b), false) if b.len() != layer.n_out => Err(Error::Shape(format!(
            "layer {l}: {} biases, expected {}",
            b.len(),
            layer.n_out
        ))),
        _ => Ok(()),
    }
}
