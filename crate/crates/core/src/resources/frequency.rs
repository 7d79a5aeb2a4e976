use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use crate::error::{Error, Result};

/// Default line limit applied to the larger corpus when building tables.
pub const DEFAULT_LINE_LIMIT: u64 = 12_000_000;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Word occurrence counts from one corpus.
///
/// Stored words always have a count of at least one, and `total` is the sum
/// of all counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: HashMap<String, u64>,
    total: u64,
    source_id: String,
}

impl FrequencyTable {
    pub fn new(source_id: impl Into<String>) -> Self {
        Self {
            source_id: source_id.into(),
            ..Self::default()
        }
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn add(&mut self, word: &str, n: u64) {
        if n == 0 {
            return;
        }
        match self.counts.get_mut(word) {
            Some(c) => *c += n,
            None => {
                self.counts.insert(word.to_string(), n);
            }
        }
        self.total += n;
    }

    /// Adds every count of `other` into `self`; the source id is kept.
    pub fn merge(&mut self, other: &FrequencyTable) {
        for (word, &n) in &other.counts {
            self.add(word, n);
        }
    }

    /// Entries by descending count, ties by word.
    pub fn sorted(&self) -> Vec<(&str, u64)> {
        let mut entries: Vec<(&str, u64)> = self.counts.iter().map(|(w, &n)| (w.as_str(), n)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        entries
    }
}

/// Lowercased alphanumeric runs of `line`.
pub fn count_tokens(line: &str) -> impl Iterator<Item = String> + '_ {
    line.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Counts tokens over at most `limit` lines of `reader`.
///
/// Bytes that are not valid UTF-8 are treated as separators.
pub fn build_frequency_table<R: BufRead>(mut reader: R, limit: Option<u64>, source_id: &str) -> Result<FrequencyTable> {
    let mut table = FrequencyTable::new(source_id);
    let mut buf = Vec::new();
    let mut offset = 0u64;
    let mut lines = 0u64;
    while limit.is_none_or(|l| lines < l) {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|cause| Error::Read { offset, cause })?;
        if n == 0 {
            break;
        }
        offset += n as u64;
        lines += 1;
        for token in count_tokens(&String::from_utf8_lossy(&buf)) {
            table.add(&token, 1);
        }
    }
    Ok(table)
}

/// Opens a corpus file, transparently decompressing gzip input.
pub fn open_corpus(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let head = reader.fill_buf().map_err(|e| Error::io(path, e))?;
    if head.starts_with(&GZIP_MAGIC) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(reader))))
    } else {
        Ok(Box::new(reader))
    }
}

/// Writes `#total <n>`, `#source <id>`, then `word<TAB>count` lines by
/// descending count.
pub fn write_frequency_table<W: Write>(table: &FrequencyTable, mut out: W) -> io::Result<()> {
    writeln!(out, "#total {}", table.total)?;
    writeln!(out, "#source {}", table.source_id)?;
    for (word, n) in table.sorted() {
        writeln!(out, "{word}\t{n}")?;
    }
    out.flush()
}

pub fn save_frequency_table(table: &FrequencyTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_frequency_table(table, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn parse_frequency_table<R: BufRead>(reader: R, source_name: &str) -> Result<FrequencyTable> {
    let mut declared_total = None;
    let mut table = FrequencyTable::new(source_name);
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        if let Some(rest) = line.strip_prefix("#total ") {
            let total = rest
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::parse(source_name, line_no, format!("invalid total '{rest}'")))?;
            declared_total = Some(total);
            continue;
        }
        if let Some(rest) = line.strip_prefix("#source ") {
            table.source_id = rest.to_string();
            continue;
        }
        if line == "#source" {
            table.source_id.clear();
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (word, count) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source_name, line_no, "expected word<TAB>count"))?;
        let count: u64 = count
            .parse()
            .map_err(|_| Error::parse(source_name, line_no, format!("invalid count '{count}'")))?;
        if count == 0 {
            return Err(Error::parse(source_name, line_no, "count must be positive"));
        }
        if table.counts.contains_key(word) {
            return Err(Error::parse(source_name, line_no, format!("duplicate word '{word}'")));
        }
        table.add(word, count);
    }
    match declared_total {
        Some(t) if t != table.total => Err(Error::parse(
            source_name,
            1,
            format!("header total {t} does not match the sum of counts {}", table.total),
        )),
        Some(_) => Ok(table),
        None => Err(Error::parse(source_name, 1, "missing '#total' header")),
    }
}

pub fn load_frequency_table(path: &Path) -> Result<FrequencyTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_frequency_table(BufReader::new(file), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_corpus_counts() {
        let t = build_frequency_table("The cat sat. The mat.".as_bytes(), None, "toy").unwrap();
        assert_eq!(t.count("the"), 2);
        assert_eq!(t.count("cat"), 1);
        assert_eq!(t.count("sat"), 1);
        assert_eq!(t.count("mat"), 1);
        assert_eq!(t.len(), 4);
        assert_eq!(t.total(), 5);
    }

    #[test]
    fn line_limit() {
        let t = build_frequency_table("a b\nc d\n".as_bytes(), Some(1), "toy").unwrap();
        assert_eq!(t.total(), 2);
        assert_eq!(t.count("c"), 0);
    }

    #[test]
    fn round_trip_and_empty_table() {
        let t = build_frequency_table("The cat sat. The mat.".as_bytes(), None, "toy").unwrap();
        let mut buf = Vec::new();
        write_frequency_table(&t, &mut buf).unwrap();
        assert!(buf.starts_with(b"#total 5\n#source toy\nthe\t2\n"));
        assert_eq!(parse_frequency_table(&buf[..], "mem").unwrap(), t);

        let empty = FrequencyTable::new("");
        let mut buf = Vec::new();
        write_frequency_table(&empty, &mut buf).unwrap();
        let back = parse_frequency_table(&buf[..], "mem").unwrap();
        assert!(back.is_empty());
        assert_eq!(back, empty);
    }

    #[test]
    fn bad_count_names_line() {
        let err = parse_frequency_table("#total 3\nthe\t3\ncat\tabc\n".as_bytes(), "f.tsv").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gzip_corpus_is_detected() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("c.txt");
        let packed = dir.path().join("c.txt.gz");
        std::fs::write(&plain, "The cat sat.\nThe mat.\n").unwrap();
        let mut enc = GzEncoder::new(File::create(&packed).unwrap(), flate2::Compression::default());
        enc.write_all(b"The cat sat.\nThe mat.\n").unwrap();
        enc.finish().unwrap();
        let a = build_frequency_table(open_corpus(&plain).unwrap(), None, "c").unwrap();
        let b = build_frequency_table(open_corpus(&packed).unwrap(), None, "c").unwrap();
        assert_eq!(a, b);
        assert_eq!(b.total(), 5);
        assert!(matches!(open_corpus(&dir.path().join("none")), Err(Error::Io { .. })));
    }

    #[test]
    fn read_failure_reports_offset() {
        struct Failing(usize);
        impl io::Read for Failing {
            fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
                if self.0 == 0 {
                    return Err(io::Error::other("disk gone"));
                }
                let line = b"ab cd\n";
                buf[..line.len()].copy_from_slice(line);
                self.0 -= 1;
                Ok(line.len())
            }
        }
        let err = build_frequency_table(BufReader::new(Failing(2)), None, "x").unwrap_err();
        assert!(matches!(err, Error::Read { offset: 12, .. }), "{err:?}");
    }
}
