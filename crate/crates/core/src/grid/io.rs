//! JSON persistence for trees.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{generate, PercParams, PercolationTree};
use crate::error::{bail, Result};

/// On-disk tree. `levels` may be omitted, in which case the tree is
/// regenerated from its parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeFile {
    pub format: u32,
    #[serde(flatten)]
    pub params: PercParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<Vec<[u32; 2]>>>,
}

impl TreeFile {
    pub fn from_tree(tree: &PercolationTree, with_levels: bool) -> Self {
        TreeFile {
            format: 1,
            params: tree.params().clone(),
            levels: with_levels.then(|| {
                tree.levels().iter().map(|l| l.iter().map(|&(x, y)| [x, y]).collect()).collect()
            }),
        }
    }

    pub fn into_tree(self) -> Result<PercolationTree> {
        if self.format != 1 {
            bail!(Format, "unsupported tree format {}", self.format);
        }
        match self.levels {
            None => generate(&self.params),
            Some(levels) => PercolationTree::from_levels(
                self.params,
                levels.into_iter().map(|l| l.into_iter().map(|[x, y]| (x, y)).collect()).collect(),
            ),
        }
    }
}

impl PercolationTree {
    pub fn to_json(&self, with_levels: bool) -> Result<String> {
        Ok(serde_json::to_string(&TreeFile::from_tree(self, with_levels))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<TreeFile>(text)?.into_tree()
    }

    pub fn save(&self, path: &Path, with_levels: bool) -> Result<()> {
        let mut text = self.to_json(with_levels)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Serialises a scalar as its canonical string; accepts strings or JSON numbers.
pub(crate) mod lenient_scalar {
    use serde::{de, Deserialize, Deserializer, Serializer};

    use crate::scalar::Scalar;

    pub fn serialize<S: Serializer>(v: &Scalar, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Scalar, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(serde_json::Number),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Text(t) => t,
            Raw::Number(n) => n.to_string(),
        };
        text.parse().map_err(de::Error::custom)
    }
}
