//! A method fitted on a whole dataset, saved as a directory of JSON files
//! and reapplied to new chips.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::FeatureCache;
use super::method::{ClassifierKind, MethodSpec};
use super::run::{extract, Outcome, Transform};
use crate::classifiers::{src_classify, src_fit, svm_predict, svm_train, LinearSvmModel, SrcModel};
use crate::dataset::{ChipSet, VesselClass};
use crate::error::{Error, Result};
use crate::features::mpca::MpcaModel;

const PIPELINE_FORMAT: &str = "vessel-bench/pipeline";
const PIPELINE_VERSION: u32 = 1;
const PIPELINE_FILE: &str = "pipeline.json";
const MPCA_FILE: &str = "mpca.json";
const SVM_FILE: &str = "svm.json";
const SRC_FILE: &str = "src.json";

#[derive(Debug, Clone)]
pub enum TrainedClassifier {
    Svm(LinearSvmModel),
    Src(SrcModel),
}

#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub method: MethodSpec,
    transform: Transform,
    pub classifier: TrainedClassifier,
}

#[derive(Serialize, Deserialize)]
struct PipelineFile {
    format: String,
    version: u32,
    method: MethodSpec,
    side: usize,
    mean: Vec<f64>,
    inv_std: Option<Vec<f64>>,
    mpca: bool,
}

impl TrainedPipeline {
    /// Fits on every chip of `data`. SVMs use `method.svm.c`; there is no
    /// held-out set to choose from here.
    pub fn fit(method: &MethodSpec, data: &ChipSet, cache: &FeatureCache) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("cannot train on an empty dataset"));
        }
        let features = extract(method, data, cache)?;
        let all: Vec<usize> = (0..features.len()).collect();
        let refs: Vec<&[f64]> = features.iter().map(Vec::as_slice).collect();
        let transform = Transform::fit(method, &refs)?;
        let xs = transform.apply_all(&features, &all)?;
        let classifier = match method.classifier {
            ClassifierKind::Svm => TrainedClassifier::Svm(
                svm_train(&xs, &data.labels, VesselClass::COUNT, &method.svm)?.0,
            ),
            ClassifierKind::Src => {
                TrainedClassifier::Src(src_fit(&xs, &data.labels, VesselClass::COUNT, method.src)?)
            }
        };
        Ok(Self {
            method: method.clone(),
            transform,
            classifier,
        })
    }

    pub fn predict(&self, data: &ChipSet, cache: &FeatureCache) -> Result<Vec<usize>> {
        let features = extract(&self.method, data, cache)?;
        features
            .par_iter()
            .map(|f| {
                let x = self.transform.apply(f)?;
                match &self.classifier {
                    TrainedClassifier::Svm(m) => svm_predict(m, &x),
                    TrainedClassifier::Src(m) => Ok(src_classify(m, &x)?.class),
                }
            })
            .collect()
    }

    pub fn score(&self, data: &ChipSet, cache: &FeatureCache) -> Result<Outcome> {
        if data.is_empty() {
            return Err(Error::invalid("cannot evaluate on an empty dataset"));
        }
        let predicted = self.predict(data, cache)?;
        Ok(Outcome::from_predictions(
            &data.labels,
            &predicted,
            VesselClass::COUNT,
            None,
        ))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        let file = PipelineFile {
            format: PIPELINE_FORMAT.into(),
            version: PIPELINE_VERSION,
            method: self.method.clone(),
            side: self.transform.side,
            mean: self.transform.mean.clone(),
            inv_std: self.transform.inv_std.clone(),
            mpca: self.transform.mpca.is_some(),
        };
        write(
            PIPELINE_FILE,
            serde_json::to_string_pretty(&file).expect("pipeline serializes"),
        )?;
        if let Some(m) = &self.transform.mpca {
            write(MPCA_FILE, m.to_json())?;
        }
        match &self.classifier {
            TrainedClassifier::Svm(m) => write(SVM_FILE, m.to_json()),
            TrainedClassifier::Src(m) => write(SRC_FILE, m.to_json()),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
        };
        let file: PipelineFile =
            serde_json::from_str(&read(PIPELINE_FILE)?).map_err(|source| Error::Json {
                context: dir.join(PIPELINE_FILE).display().to_string(),
                source,
            })?;
        if file.format != PIPELINE_FORMAT || file.version != PIPELINE_VERSION {
            return Err(Error::invalid(format!(
                "unsupported pipeline format {} v{}",
                file.format, file.version
            )));
        }
        file.method.validate()?;
        if file
            .inv_std
            .as_ref()
            .is_some_and(|s| s.len() != file.mean.len())
        {
            return Err(Error::invalid("pipeline statistics differ in length"));
        }
        let mpca = if file.mpca {
            Some(MpcaModel::from_json(&read(MPCA_FILE)?)?)
        } else {
            None
        };
        let classifier = match file.method.classifier {
            ClassifierKind::Svm => {
                TrainedClassifier::Svm(LinearSvmModel::from_json(&read(SVM_FILE)?)?)
            }
            ClassifierKind::Src => TrainedClassifier::Src(SrcModel::from_json(&read(SRC_FILE)?)?),
        };
        Ok(Self {
            method: file.method,
            transform: Transform {
                mpca,
                side: file.side,
                mean: file.mean,
                inv_std: file.inv_std,
            },
            classifier,
        })
    }
}
