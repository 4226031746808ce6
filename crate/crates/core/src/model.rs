//! Linear transition scoring model and its binary container.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::corpus::Sentence;
use crate::dlm::{DlmAttachment, DlmTable};
use crate::error::{Error, Result};
use crate::features::{ConfigFeatures, FeatureVector, Template, TemplateSet};
use crate::transition::{Configuration, Labels, System, Transition};

pub const DEFAULT_HASH_BITS: u32 = 22;
const MAGIC: &[u8; 8] = b"SEMIPRSE";
const VERSION: u32 = 1;

/// Hashed weight vector plus everything needed to reproduce its features.
#[derive(Clone, Debug)]
pub struct WeightModel {
    hash_bits: u32,
    system: System,
    labels: Labels,
    templates: TemplateSet,
    dlms: Vec<DlmAttachment>,
    weights: Vec<f64>,
    averaged: Option<Vec<f64>>,
    use_averaged: bool,
}

impl WeightModel {
    pub fn new(system: System, labels: Labels, templates: TemplateSet, hash_bits: u32) -> Result<Self> {
        if !(1..=30).contains(&hash_bits) {
            return Err(Error::InvalidArgument(format!("hash bits must be in 1..=30, got {hash_bits}")));
        }
        Ok(WeightModel {
            hash_bits,
            system,
            labels,
            templates,
            dlms: Vec::new(),
            weights: vec![0.0; 1 << hash_bits],
            averaged: None,
            use_averaged: true,
        })
    }

    pub fn hash_bits(&self) -> u32 {
        self.hash_bits
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn dlms(&self) -> &[DlmAttachment] {
        &self.dlms
    }

    /// Attaches a table under the next free NO_DLM index and returns it.
    pub fn attach_dlm(&mut self, path: impl Into<String>, table: DlmTable) -> u32 {
        let index = self.dlms.len() as u32;
        self.dlms.push(DlmAttachment {
            path: path.into(),
            index,
            table: Arc::new(table),
        });
        index
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn averaged(&self) -> Option<&[f64]> {
        self.averaged.as_deref()
    }

    pub fn set_averaged(&mut self, averaged: Option<Vec<f64>>) {
        if let Some(a) = &averaged {
            assert_eq!(a.len(), self.weights.len());
        }
        self.averaged = averaged;
    }

    pub fn use_averaged(&self) -> bool {
        self.use_averaged
    }

    /// Chooses whether decoding reads the averaged weights (when present).
    pub fn set_use_averaged(&mut self, on: bool) {
        self.use_averaged = on;
    }

    /// The weights used for decoding.
    pub fn active_weights(&self) -> &[f64] {
        match (&self.averaged, self.use_averaged) {
            (Some(a), true) => a,
            _ => &self.weights,
        }
    }

    pub fn transitions(&self) -> Vec<Transition> {
        self.system.transitions(&self.labels)
    }

    pub fn config_features(&self, config: &Configuration, sentence: &Sentence) -> ConfigFeatures {
        ConfigFeatures::compute(config, sentence, &self.templates, &self.dlms, self.hash_bits)
    }

    pub fn extract_features(&self, config: &Configuration, t: Transition, sentence: &Sentence) -> FeatureVector {
        self.config_features(config, sentence).vector(t)
    }

    /// Dot product with the active weights.
    pub fn score(&self, features: &FeatureVector) -> f64 {
        dot(self.active_weights(), features)
    }

    /// Dot product with the raw (non-averaged) weights.
    pub fn raw_score(&self, features: &FeatureVector) -> f64 {
        dot(&self.weights, features)
    }

    /// Passive-aggressive step on the raw weights:
    /// `w += (gold - predicted) / ||gold - predicted||²`.
    /// Returns the applied per-id changes; empty when the vectors agree.
    pub fn pa_update(&mut self, gold: &FeatureVector, predicted: &FeatureVector) -> Vec<(u32, f64)> {
        let mut delta: Vec<(u32, i64)> = Vec::new();
        let (mut g, mut p) = (gold.iter().peekable(), predicted.iter().peekable());
        loop {
            let next = match (g.peek(), p.peek()) {
                (None, None) => break,
                (Some(&(gi, gc)), None) => {
                    g.next();
                    (gi, i64::from(gc))
                }
                (None, Some(&(pi, pc))) => {
                    p.next();
                    (pi, -i64::from(pc))
                }
                (Some(&(gi, gc)), Some(&(pi, pc))) => {
                    if gi < pi {
                        g.next();
                        (gi, i64::from(gc))
                    } else if pi < gi {
                        p.next();
                        (pi, -i64::from(pc))
                    } else {
                        g.next();
                        p.next();
                        (gi, i64::from(gc) - i64::from(pc))
                    }
                }
            };
            if next.1 != 0 {
                delta.push(next);
            }
        }
        let norm: i64 = delta.iter().map(|(_, d)| d * d).sum();
        if norm == 0 {
            return Vec::new();
        }
        let norm = norm as f64;
        delta
            .into_iter()
            .map(|(id, d)| {
                let step = d as f64 / norm;
                self.weights[id as usize] += step;
                (id, step)
            })
            .collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(self.hash_bits)?;
        w.write_u8(self.system.tag())?;
        w.write_u8(u8::from(self.use_averaged))?;
        w.write_u32::<LittleEndian>(self.labels.root())?;
        w.write_u32::<LittleEndian>(self.labels.len() as u32)?;
        for name in self.labels.names() {
            write_str(&mut w, name)?;
        }
        w.write_u32::<LittleEndian>(self.templates.templates().len() as u32)?;
        for t in self.templates.templates() {
            write_str(&mut w, t.name())?;
        }
        write_weights(&mut w, &self.weights)?;
        match &self.averaged {
            Some(a) => {
                w.write_u8(1)?;
                write_weights(&mut w, a)?;
            }
            None => w.write_u8(0)?,
        }
        w.write_u32::<LittleEndian>(self.dlms.len() as u32)?;
        for a in &self.dlms {
            w.write_u32::<LittleEndian>(a.index)?;
            write_str(&mut w, &a.path)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a model; attached DLM tables are loaded through `resolve`.
    pub fn read_with<R: Read, F>(mut r: R, mut resolve: F) -> Result<Self>
    where
        F: FnMut(&str) -> Result<DlmTable>,
    {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let hash_bits = r.read_u32::<LittleEndian>()?;
        if !(1..=30).contains(&hash_bits) {
            return Err(Error::Format(format!("bad hash width {hash_bits}")));
        }
        let system = System::from_tag(r.read_u8()?).ok_or_else(|| Error::Format("bad system tag".into()))?;
        let use_averaged = r.read_u8()? != 0;
        let root = r.read_u32::<LittleEndian>()?;
        let n_labels = r.read_u32::<LittleEndian>()? as usize;
        let names = (0..n_labels).map(|_| read_str(&mut r)).collect::<Result<Vec<_>>>()?;
        let root_name = names
            .get(root as usize)
            .cloned()
            .ok_or_else(|| Error::Format("root label out of range".into()))?;
        let labels = Labels::new(names, &root_name)?;
        let n_templates = r.read_u32::<LittleEndian>()? as usize;
        let templates = (0..n_templates)
            .map(|_| read_str(&mut r)?.parse::<Template>())
            .collect::<Result<Vec<_>>>()?;
        let weights = read_weights(&mut r, 1 << hash_bits)?;
        let averaged = match r.read_u8()? {
            0 => None,
            _ => Some(read_weights(&mut r, 1 << hash_bits)?),
        };
        let n_dlms = r.read_u32::<LittleEndian>()?;
        let mut dlms = Vec::new();
        for _ in 0..n_dlms {
            let index = r.read_u32::<LittleEndian>()?;
            let path = read_str(&mut r)?;
            let table = Arc::new(resolve(&path)?);
            dlms.push(DlmAttachment { path, index, table });
        }
        Ok(WeightModel {
            hash_bits,
            system,
            labels,
            templates: TemplateSet::new(templates),
            dlms,
            weights,
            averaged,
            use_averaged,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::file(path, e))?;
        self.write(BufWriter::new(f))
    }

    /// Loads a model. Relative DLM paths are tried as given and then
    /// relative to the model's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::file(path, e))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        WeightModel::read_with(BufReader::new(f), |p| {
            let direct = PathBuf::from(p);
            if direct.exists() || direct.is_absolute() {
                DlmTable::load(direct)
            } else {
                DlmTable::load(dir.join(p))
            }
        })
    }
}

fn dot(weights: &[f64], features: &FeatureVector) -> f64 {
    features
        .iter()
        .map(|(id, c)| weights[id as usize] * f64::from(c))
        .sum()
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Format("string is not UTF-8".into()))
}

fn write_weights<W: Write>(w: &mut W, weights: &[f64]) -> Result<()> {
    w.write_u64::<LittleEndian>(weights.len() as u64)?;
    for &x in weights {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

fn read_weights<R: Read>(r: &mut R, expected: usize) -> Result<Vec<f64>> {
    let len = r.read_u64::<LittleEndian>()? as usize;
    if len != expected {
        return Err(Error::Format(format!("weight vector has {len} entries, expected {expected}")));
    }
    let mut out = vec![0.0; len];
    r.read_f64_into::<LittleEndian>(&mut out)?;
    Ok(out)
}
