use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Word vectors of a single fixed dimension, all components finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            vectors: HashMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vectors.contains_key(word)
    }

    /// Inserts a vector, keeping an existing entry for the same word.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f32>) -> Result<(), String> {
        if vector.len() != self.dimension {
            return Err(format!(
                "expected {} components, found {}",
                self.dimension,
                vector.len()
            ));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err("non-finite component".into());
        }
        self.vectors.entry(word.into()).or_insert(vector);
        Ok(())
    }

    /// Cosine of the vectors of two words; `None` if either is missing.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        cosine(self.get(a)?, self.get(b)?)
    }
}

/// Cosine similarity, accumulated in f64. `None` for a zero-length vector.
pub fn cosine(a: &[f32], b: &[f32]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Parses the text vector format: a `count dimension` header, then
/// `word v1 ... vd` lines. Only words in `filter` are kept when it is given,
/// but every line is still checked for the right number of components.
pub fn parse_embeddings<R: BufRead>(
    reader: R,
    filter: Option<&HashSet<String>>,
    source_name: &str,
) -> Result<EmbeddingTable> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::parse(source_name, 1, e.to_string()))?,
        None => return Err(Error::parse(source_name, 1, "missing 'count dimension' header")),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (declared, dimension) = match fields.as_slice() {
        [count, dim] => match (count.parse::<usize>(), dim.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(Error::parse(source_name, 1, format!("invalid header '{header}'"))),
        },
        _ => return Err(Error::parse(source_name, 1, format!("invalid header '{header}'"))),
    };

    let mut table = EmbeddingTable::new(dimension);
    let mut seen = 0usize;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        let line = line.trim_end_matches(['\r', '\n', ' ']);
        if line.is_empty() {
            continue;
        }
        seen += 1;
        // words may contain non-ASCII whitespace, so split on the ASCII space only
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let word = parts.next().unwrap_or_default();
        let components: Vec<&str> = parts.collect();
        if components.len() != dimension {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("expected {dimension} components, found {}", components.len()),
            ));
        }
        if filter.is_some_and(|f| !f.contains(word)) {
            continue;
        }
        let vector = components
            .iter()
            .map(|c| c.parse::<f32>())
            .collect::<std::result::Result<Vec<f32>, _>>()
            .map_err(|e| Error::parse(source_name, line_no, format!("invalid component: {e}")))?;
        table
            .insert(word, vector)
            .map_err(|m| Error::parse(source_name, line_no, m))?;
    }
    if seen != declared {
        log::warn!("{source_name}: header declares {declared} vectors, file has {seen}");
    }
    Ok(table)
}

pub fn load_embeddings(path: &Path, filter: Option<&HashSet<String>>) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(BufReader::new(file), filter, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_file() {
        let t = parse_embeddings("2 3\na 1 0 0\nb 0 1 0\n".as_bytes(), None, "m").unwrap();
        assert_eq!(t.dimension(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("b"), Some(&[0.0, 1.0, 0.0][..]));
    }

    #[test]
    fn filter_keeps_only_listed_words() {
        let filter: HashSet<String> = ["a".to_string()].into();
        let t = parse_embeddings("2 3\na 1 0 0\nb 0 1 0".as_bytes(), Some(&filter), "m").unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.contains("a"));
    }

    #[test]
    fn short_line_is_an_error_at_its_line() {
        let err = parse_embeddings("2 3\na 1 0 0\nb 0 1\n".as_bytes(), None, "m").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn non_finite_component_is_rejected() {
        let err = parse_embeddings("1 2\na 1 NaN\n".as_bytes(), None, "m").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), Some(0.0));
        assert!((cosine(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), None);
    }
}
