use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MultiViewModel, ViewNetwork};
use crate::data::{MultiViewDataset, Normalization};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "mvtrust-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained networks plus everything needed to reproduce their inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub num_classes: usize,
    pub num_views: usize,
    pub view_dims: Vec<usize>,
    pub hidden: usize,
    /// Flat parameter vector per view, see [`ViewNetwork`] for the layout.
    pub params: Vec<Vec<f64>>,
    pub meta: CheckpointMeta,
}

/// How a checkpoint's model was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Label such as "phase-1" or "phase-2".
    pub phase: String,
    /// Statistics the training inputs were standardized with.
    pub normalization: Option<Normalization>,
    /// Real training rows per class, used for head/medium/tail reporting.
    pub train_class_counts: Vec<usize>,
    /// Pseudo-samples added per class before training.
    pub pseudo_counts: Vec<usize>,
    pub loss_history: Vec<f64>,
    pub config_hash: String,
    /// The resolved experiment configuration that produced this model.
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn from_model(model: &MultiViewModel, meta: CheckpointMeta) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            num_classes: model.num_classes(),
            num_views: model.num_views(),
            view_dims: model.view_dims(),
            hidden: model.nets()[0].hidden,
            params: model.nets().iter().map(|n| n.params().to_vec()).collect(),
            meta,
        }
    }

    pub fn model(&self) -> Result<MultiViewModel> {
        self.validate()?;
        let nets = self
            .view_dims
            .iter()
            .zip(&self.params)
            .enumerate()
            .map(|(v, (&d, p))| ViewNetwork::from_params(v, d, self.hidden, self.num_classes, p.clone()))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        MultiViewModel::new(nets, self.num_classes)
    }

    fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("not a checkpoint file (format {:?})", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if self.view_dims.len() != self.num_views || self.params.len() != self.num_views {
            return Err(Error::Checkpoint(format!(
                "checkpoint declares {} views but stores {} dims and {} parameter sets",
                self.num_views,
                self.view_dims.len(),
                self.params.len()
            )));
        }
        if self.meta.train_class_counts.len() != self.num_classes
            || self.meta.pseudo_counts.len() != self.num_classes
        {
            return Err(Error::Checkpoint("per-class counts do not match K".into()));
        }
        Ok(())
    }

    /// Rejects datasets whose class count or view shapes differ from the model's.
    pub fn check_dataset(&self, data: &MultiViewDataset) -> Result<()> {
        if data.num_classes() != self.num_classes || data.view_dims() != self.view_dims {
            return Err(Error::Checkpoint(format!(
                "checkpoint expects K = {} and view dims {:?}, dataset {:?} has K = {} and {:?}",
                self.num_classes,
                self.view_dims,
                data.name(),
                data.num_classes(),
                data.view_dims()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}
