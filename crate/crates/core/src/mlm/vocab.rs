use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model descriptor stored next to the weights as `descriptor.json`.
///
/// Every field has a default matching the published uncased BERT checkpoints,
/// so a missing descriptor file is equivalent to `{}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDescriptor {
    pub max_length: usize,
    pub cls_token: String,
    pub sep_token: String,
    pub mask_token: String,
    pub unk_token: String,
    pub pad_token: String,
    pub lowercase: bool,
}

impl Default for ModelDescriptor {
    fn default() -> Self {
        Self {
            max_length: 512,
            cls_token: "[CLS]".into(),
            sep_token: "[SEP]".into(),
            mask_token: "[MASK]".into(),
            unk_token: "[UNK]".into(),
            pad_token: "[PAD]".into(),
            lowercase: true,
        }
    }
}

impl ModelDescriptor {
    pub const FILE_NAME: &'static str = "descriptor.json";

    /// Reads `descriptor.json` from `dir`, falling back to defaults when absent.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let path = dir.join(Self::FILE_NAME);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
    }
}

/// Ids of the special tokens the pipeline needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub cls: u32,
    pub sep: u32,
    pub mask: u32,
    pub unk: u32,
    pub pad: u32,
}

/// Token-id <-> token-string mapping; line number in `vocab.txt` is the id.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    special: SpecialIds,
}

impl Vocab {
    pub const FILE_NAME: &'static str = "vocab.txt";

    pub fn from_tokens(tokens: Vec<String>, descriptor: &ModelDescriptor) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Model("empty vocabulary".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, token) in tokens.iter().enumerate() {
            // first occurrence wins, mirroring line-number ids
            index.entry(token.clone()).or_insert(id as u32);
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::Model(format!("special token {name} missing from vocabulary")))
        };
        let special = SpecialIds {
            cls: lookup(&descriptor.cls_token)?,
            sep: lookup(&descriptor.sep_token)?,
            mask: lookup(&descriptor.mask_token)?,
            unk: lookup(&descriptor.unk_token)?,
            pad: lookup(&descriptor.pad_token)?,
        };
        Ok(Self { tokens, index, special })
    }

    pub fn from_text(text: &str, descriptor: &ModelDescriptor) -> Result<Self> {
        let tokens = text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect();
        Self::from_tokens(tokens, descriptor)
    }

    pub fn load(path: &Path, descriptor: &ModelDescriptor) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, descriptor)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or the unknown-token id.
    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id(token).unwrap_or(self.special.unk)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn special(&self) -> SpecialIds {
        self.special
    }

    pub fn cls_token(&self) -> &str {
        self.token(self.special.cls)
    }

    pub fn sep_token(&self) -> &str {
        self.token(self.special.sep)
    }

    pub fn mask_token(&self) -> &str {
        self.token(self.special.mask)
    }

    pub fn unk_token(&self) -> &str {
        self.token(self.special.unk)
    }

    pub fn is_special_id(&self, id: u32) -> bool {
        let s = self.special;
        id == s.cls || id == s.sep || id == s.mask || id == s.unk || id == s.pad
    }
}
