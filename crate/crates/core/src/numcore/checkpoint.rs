//! JSON parameter checkpoints.
//!
//! ```json
//! {"format":"srbrcnn-params","version":1,
//!  "params":[{"name":"w","shape":[2,2],"data":[1.0,0.0,0.0,1.0]}]}
//! ```
//!
//! Parameters appear in store order, so identical stores serialize to
//! identical bytes.

use serde::{Deserialize, Serialize};

use super::{NumError, ParamStore, Tensor};

pub const CHECKPOINT_FORMAT: &str = "srbrcnn-params";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCheckpoint {
    pub format: String,
    pub version: u32,
    pub params: Vec<ParamRecord>,
}

impl ParamCheckpoint {
    pub fn from_store(store: &ParamStore) -> Self {
        ParamCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            params: store
                .ids()
                .map(|id| {
                    let v = store.value(id);
                    ParamRecord {
                        name: store.name(id).to_string(),
                        shape: v.shape().to_vec(),
                        data: v.data().to_vec(),
                    }
                })
                .collect(),
        }
    }

    fn check_header(&self) -> Result<(), NumError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(NumError::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(NumError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        Ok(())
    }

    /// Builds a fresh store holding exactly the recorded parameters.
    pub fn into_store(self) -> Result<ParamStore, NumError> {
        self.check_header()?;
        let mut store = ParamStore::new();
        for rec in self.params {
            store.add(rec.name, Tensor::new(rec.shape, rec.data)?)?;
        }
        Ok(store)
    }

    /// Overwrites values in an existing store; names and shapes must match.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<(), NumError> {
        self.check_header()?;
        if self.params.len() != store.len() {
            return Err(NumError::Checkpoint(format!(
                "checkpoint has {} parameters, model has {}",
                self.params.len(),
                store.len()
            )));
        }
        for rec in &self.params {
            let id = store
                .id(&rec.name)
                .ok_or_else(|| NumError::Checkpoint(format!("unknown parameter {:?}", rec.name)))?;
            store.set_value(id, Tensor::new(rec.shape.clone(), rec.data.clone())?)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NumError> {
        serde_json::from_str(text).map_err(|e| NumError::Checkpoint(e.to_string()))
    }
}
