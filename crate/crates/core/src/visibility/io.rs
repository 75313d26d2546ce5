use std::path::Path;

use serde::{Deserialize, Serialize};

use super::VisibleCover;
use crate::error::{bail, Result};

/// On-disk cover, versioned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverFile {
    pub format: u32,
    #[serde(flatten)]
    pub cover: VisibleCover,
}

impl VisibleCover {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CoverFile { format: 1, cover: self.clone() })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: CoverFile = serde_json::from_str(text)?;
        if f.format != 1 {
            bail!(Format, "unsupported cover format {}", f.format);
        }
        let c = f.cover;
        if c.marked.len() != c.windows.len() || c.counts.len() != c.level as usize + 1 {
            bail!(Format, "cover tables have inconsistent lengths");
        }
        if c.marked.windows(2).any(|w| w[0] >= w[1]) {
            bail!(Format, "marked squares must be sorted and distinct");
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// `k,N_k` rows with a header.
    pub fn counts_csv(&self) -> String {
        let mut out = String::from("k,N_k\n");
        for (k, n) in self.counts.iter().enumerate() {
            out.push_str(&format!("{k},{n}\n"));
        }
        out
    }
}
