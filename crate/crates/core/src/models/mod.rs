//! The model zoo used by the experiments: polynomial least squares and a
//! dense feedforward network, behind one `ModelSpec`/`TrainedModel` pair so
//! resampling code does not care which family it is training.

mod net;
mod poly;

pub use net::{
    adam_step, glorot_normal_init, net_forward, net_gradients, train_net, Activation, AdamState,
    NetSpec,
};
pub use poly::{poly_features, PolySpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum ModelSpec {
    Poly(PolySpec),
    Net(NetSpec),
}

impl ModelSpec {
    /// Train on the given rows; every fit is a pure function of the spec and
    /// the data.
    pub fn fit(&self, x: &[Vec<f64>], y: &[f64]) -> Result<TrainedModel> {
        let input_dim = x.first().map_or(0, Vec::len);
        match self {
            ModelSpec::Poly(spec) => {
                let coeffs = poly::solve_poly(x, y, spec)?;
                Ok(TrainedModel {
                    spec: self.clone(),
                    input_dim,
                    parameters: coeffs,
                    training_loss_history: Vec::new(),
                })
            }
            ModelSpec::Net(spec) => {
                if spec.input_width() != input_dim {
                    return Err(Error::DimensionMismatch {
                        expected: spec.input_width(),
                        actual: input_dim,
                    });
                }
                let (params, history) = net::train_net(x, y, spec)?;
                Ok(TrainedModel {
                    spec: self.clone(),
                    input_dim,
                    parameters: params,
                    training_loss_history: history,
                })
            }
        }
    }

    /// Number of free parameters for data of width `input_dim`.
    pub fn param_count(&self, input_dim: usize) -> usize {
        match self {
            ModelSpec::Poly(spec) => spec.basis_size(input_dim),
            ModelSpec::Net(spec) => spec.param_count(),
        }
    }

    /// Short identifier used in file names and sidecars.
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Poly(spec) => spec.label(),
            ModelSpec::Net(spec) => spec.label(),
        }
    }
}

/// A fitted model: the spec that produced it plus its flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub input_dim: usize,
    pub parameters: Vec<f64>,
    pub training_loss_history: Vec<f64>,
}

/// Format version of the serialized model document.
const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

impl TrainedModel {
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: row.len(),
            });
        }
        match &self.spec {
            ModelSpec::Poly(spec) => Ok(poly::predict_poly(
                row,
                &self.parameters,
                spec,
                self.input_dim,
            )),
            ModelSpec::Net(spec) => Ok(net::net_forward(spec, &self.parameters, row)?[0]),
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        match &self.spec {
            ModelSpec::Poly(spec) => {
                if let Some(row) = x.iter().find(|r| r.len() != self.input_dim) {
                    return Err(Error::DimensionMismatch {
                        expected: self.input_dim,
                        actual: row.len(),
                    });
                }
                Ok(poly::predict_poly_batch(
                    x,
                    &self.parameters,
                    spec,
                    self.input_dim,
                ))
            }
            ModelSpec::Net(_) => x.iter().map(|row| self.predict_row(row)).collect(),
        }
    }

    /// Residual sum of squares on the given data.
    pub fn rss(&self, x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
        let preds = self.predict(x)?;
        Ok(preds
            .iter()
            .zip(y)
            .map(|(p, t)| (t - p) * (t - p))
            .sum())
    }

    /// Restrict a trained network to the kept input features without
    /// retraining (polynomial bases change shape under deletion, so
    /// polynomial models must be refit on the reduced data instead).
    pub fn keep_features(&self, kept: &[usize]) -> Result<TrainedModel> {
        match &self.spec {
            ModelSpec::Net(spec) => {
                let new_spec = spec.keep_features(kept)?;
                let new_params = net::keep_feature_params(spec, &self.parameters, kept)?;
                Ok(TrainedModel {
                    spec: ModelSpec::Net(new_spec),
                    input_dim: kept.len(),
                    parameters: new_params,
                    training_loss_history: self.training_loss_history.clone(),
                })
            }
            ModelSpec::Poly(_) => Err(Error::Unsupported(
                "feature deletion on a fitted polynomial; refit on the reduced dataset",
            )),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format version {}",
                doc.version
            )));
        }
        let expect = doc.model.spec.param_count(doc.model.input_dim);
        if doc.model.parameters.len() != expect {
            return Err(Error::Parse(format!(
                "parameter vector has {} entries, spec requires {expect}",
                doc.model.parameters.len()
            )));
        }
        Ok(doc.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid_data() -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                let a = i as f64 * 0.3 - 1.0;
                let b = j as f64 * 0.25 - 0.9;
                x.push(vec![a, b]);
                y.push(1.0 + a + b + a * a + a * b + b * b);
            }
        }
        (x, y)
    }

    #[test]
    fn nested_polynomials_do_not_fit_worse_in_sample() {
        let (x, y) = grid_data();
        let rss: Vec<f64> = (1..=3)
            .map(|deg| {
                ModelSpec::Poly(PolySpec::new(deg))
                    .fit(&x, &y)
                    .unwrap()
                    .rss(&x, &y)
                    .unwrap()
            })
            .collect();
        assert!(rss[1] <= rss[0] + 1e-9);
        assert!(rss[2] <= rss[1] + 1e-9);
        // Degree 2 is the true model here.
        assert!(rss[1] <= 1e-12);
    }

    #[test]
    fn model_json_round_trip() {
        let (x, y) = grid_data();
        let model = ModelSpec::Poly(PolySpec::new(2)).fit(&x, &y).unwrap();
        let text = model.to_json().unwrap();
        assert!(text.contains("\"version\": 1"));
        let back = TrainedModel::from_json(&text).unwrap();
        assert_eq!(back.parameters, model.parameters);
        for row in x.iter().take(5) {
            assert_abs_diff_eq!(
                back.predict_row(row).unwrap(),
                model.predict_row(row).unwrap(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn corrupt_model_documents_are_rejected() {
        let (x, y) = grid_data();
        let model = ModelSpec::Poly(PolySpec::new(1)).fit(&x, &y).unwrap();
        let text = model.to_json().unwrap();
        let wrong_version = text.replace("\"version\": 1", "\"version\": 9");
        assert!(TrainedModel::from_json(&wrong_version).is_err());
        let truncated = text.replace("\"input_dim\": 2", "\"input_dim\": 3");
        assert!(TrainedModel::from_json(&truncated).is_err());
    }
}
