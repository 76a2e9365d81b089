//! Lexicon and word-vector ingestion, mapping-dataset joins and splits.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{normalize_label, LabelFormat, LabelVector};
use crate::mapping::{MappingDataset, MappingPair};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseFolding {
    /// Keys are kept as written.
    #[default]
    Preserve,
    /// Keys are lower-cased; the first spelling of a folded key wins.
    Lower,
}

/// Human ratings of words in one format.
#[derive(Clone, Debug)]
pub struct Lexicon {
    language: String,
    format: Arc<LabelFormat>,
    entries: IndexMap<String, LabelVector>,
}

impl Lexicon {
    /// Build from raw ratings. Duplicate keys are rejected.
    pub fn from_rows(
        language: impl Into<String>,
        format: Arc<LabelFormat>,
        rows: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        let mut entries = IndexMap::new();
        for (key, values) in rows {
            let label = LabelVector::raw(Arc::clone(&format), values)?;
            if entries.insert(key.clone(), label).is_some() {
                return Err(Error::config(format!("duplicate lexicon item `{key}`")));
            }
        }
        Ok(Lexicon {
            language: language.into(),
            format,
            entries,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn format(&self) -> &Arc<LabelFormat> {
        &self.format
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Option<&LabelVector> {
        self.entries.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LabelVector)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Normalized rating of `key`.
    pub fn normalized(&self, key: &str) -> Result<LabelVector> {
        let raw = self
            .entries
            .get(key)
            .ok_or_else(|| Error::Usage(format!("item `{key}` not in lexicon")))?;
        normalize_label(raw)
    }

    /// Write as TSV with a `word` column followed by the format variables.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        write!(w, "word").map_err(io)?;
        for v in self.format.variables() {
            write!(w, "\t{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for (key, label) in &self.entries {
            write!(w, "{key}").map_err(io)?;
            for v in label.values() {
                write!(w, "\t{v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

#[derive(Clone, Debug)]
pub struct LexiconOptions {
    pub language: String,
    pub case_folding: CaseFolding,
}

impl Default for LexiconOptions {
    fn default() -> Self {
        LexiconOptions {
            language: "en".into(),
            case_folding: CaseFolding::Preserve,
        }
    }
}

fn at_line(path: &Path, line: u64, source: Error) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        message: source.to_string(),
    }
}

fn tsv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_owned(),
        line,
        message: e.to_string(),
    }
}

/// Load a TSV lexicon whose header names a word column followed by exactly
/// the format's variables, in any order.
pub fn load_lexicon(
    path: impl AsRef<Path>,
    format: Arc<LabelFormat>,
    options: &LexiconOptions,
) -> Result<Lexicon> {
    let path = path.as_ref();
    let mut reader = tsv_reader(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_err(path, e))?,
        None => {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: 1,
                message: "empty file, header row required".into(),
            })
        }
    };
    let columns: Vec<String> = header.iter().skip(1).map(|c| c.trim().to_lowercase()).collect();
    let mut order = Vec::with_capacity(format.len());
    for var in format.variables() {
        let col = columns
            .iter()
            .position(|c| c == &var.to_lowercase())
            .ok_or_else(|| Error::Schema {
                path: path.to_owned(),
                column: var.clone(),
            })?;
        order.push(col);
    }
    if columns.len() != format.len() {
        let extra = columns
            .iter()
            .find(|c| format.variables().iter().all(|v| &v.to_lowercase() != *c))
            .cloned()
            .unwrap_or_default();
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: format!("unexpected column `{extra}` for format `{}`", format.name()),
        });
    }

    let mut entries: IndexMap<String, LabelVector> = IndexMap::new();
    let mut raw_seen: HashSet<String> = HashSet::new();
    let mut folded_dupes = 0usize;
    for record in records {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != columns.len() + 1 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("expected {} fields, found {}", columns.len() + 1, record.len()),
            });
        }
        let word = record[0].trim().to_owned();
        let mut values = Vec::with_capacity(format.len());
        for &col in &order {
            let field = record[col + 1].trim();
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("`{field}` is not a number"),
            })?;
            values.push(v);
        }
        let label =
            LabelVector::raw(Arc::clone(&format), values).map_err(|e| at_line(path, line, e))?;
        if !raw_seen.insert(word.clone()) {
            return Err(Error::Duplicate {
                path: path.to_owned(),
                line,
                key: word,
            });
        }
        let key = match options.case_folding {
            CaseFolding::Preserve => word.clone(),
            CaseFolding::Lower => word.to_lowercase(),
        };
        if entries.contains_key(&key) {
            log::warn!("{}:{line}: `{word}` folds onto an earlier entry; keeping the first", path.display());
            folded_dupes += 1;
            continue;
        }
        entries.insert(key, label);
    }
    if folded_dupes > 0 {
        log::warn!("{}: {folded_dupes} entries dropped after case folding", path.display());
    }
    Ok(Lexicon {
        language: options.language.clone(),
        format,
        entries,
    })
}

/// Item keys of a lexicon file (first column), without label validation.
pub fn read_lexicon_keys(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let mut reader = tsv_reader(path)?;
    let mut keys = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        if i == 0 || record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let line = record.position().map_or(0, |p| p.line());
        let key = record[0].trim().to_owned();
        if !seen.insert(key.clone()) {
            return Err(Error::Duplicate {
                path: path.to_owned(),
                line,
                key,
            });
        }
        keys.push(key);
    }
    Ok(keys)
}

/// Tokens to keep when reading a large vector file.
#[derive(Clone, Debug, Default)]
pub struct VocabularyFilter {
    exact: HashSet<String>,
    folded: HashSet<String>,
}

impl VocabularyFilter {
    pub fn new<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        let mut f = VocabularyFilter::default();
        for w in words {
            let w = w.as_ref();
            f.exact.insert(w.to_owned());
            f.folded.insert(w.to_lowercase());
        }
        f
    }

    pub fn from_lexicons<'a>(lexicons: impl IntoIterator<Item = &'a Lexicon>) -> Self {
        VocabularyFilter::new(lexicons.into_iter().flat_map(|l| l.keys()))
    }

    fn keeps(&self, token: &str) -> bool {
        self.exact.contains(token) || self.folded.contains(&token.to_lowercase())
    }
}

/// Pre-trained word vectors.
#[derive(Clone, Debug)]
pub struct WordVectorTable {
    dim: usize,
    rows: HashMap<String, Vec<f64>>,
    folded: HashMap<String, String>,
}

impl WordVectorTable {
    pub fn new(dim: usize) -> Self {
        WordVectorTable {
            dim,
            rows: HashMap::new(),
            folded: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        crate::error::ensure_len(self.dim, vector.len())?;
        let token = token.into();
        self.folded
            .entry(token.to_lowercase())
            .or_insert_with(|| token.clone());
        self.rows.insert(token, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Exact match first, then a case-insensitive fallback.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        if let Some(v) = self.rows.get(word) {
            return Some(v);
        }
        self.folded
            .get(&word.to_lowercase())
            .and_then(|t| self.rows.get(t))
            .map(Vec::as_slice)
    }

    /// Write in the `count dim` / `token v1 … v_dim` text layout, tokens sorted.
    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.rows.len(), self.dim).map_err(io)?;
        let mut tokens: Vec<&String> = self.rows.keys().collect();
        tokens.sort();
        for t in tokens {
            write!(w, "{t}").map_err(io)?;
            for v in &self.rows[t] {
                write!(w, " {v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Read a text vector file, keeping only tokens accepted by `filter`.
pub fn load_word_vectors(
    path: impl AsRef<Path>,
    filter: Option<&VocabularyFilter>,
) -> Result<WordVectorTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty vector file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let mut parts = header.split_whitespace();
    let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(c), Some(d), None) => (
            c.parse::<usize>()
                .map_err(|_| parse_err(1, format!("bad count `{c}`")))?,
            d.parse::<usize>()
                .map_err(|_| parse_err(1, format!("bad dimension `{d}`")))?,
        ),
        _ => return Err(parse_err(1, "header must be `count dim`".into())),
    };
    let mut table = WordVectorTable::new(dim);
    for (i, line) in lines.enumerate() {
        let line_no = i as u64 + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        if filter.is_some_and(|f| !f.keeps(token)) {
            continue;
        }
        let vector = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        if vector.len() != dim {
            return Err(parse_err(
                line_no,
                format!("`{token}` has {} values, expected {dim}", vector.len()),
            ));
        }
        table.insert(token, vector)?;
    }
    if filter.is_none() && table.len() != count {
        log::warn!(
            "{}: header announces {count} vectors, found {}",
            path.display(),
            table.len()
        );
    }
    Ok(table)
}

/// Inner join of two lexicons of one language in different formats.
pub fn build_mapping_dataset(a: &Lexicon, b: &Lexicon) -> Result<MappingDataset> {
    if a.language != b.language {
        return Err(Error::config(format!(
            "cannot join lexicons of languages `{}` and `{}`",
            a.language, b.language
        )));
    }
    if a.format.name() == b.format.name() {
        return Err(Error::config(format!(
            "mapping datasets need two different formats, both are `{}`",
            a.format.name()
        )));
    }
    let mut pairs = Vec::new();
    for (key, ya) in &a.entries {
        if let Some(yb) = b.entries.get(key) {
            pairs.push(MappingPair {
                key: key.clone(),
                a: normalize_label(ya)?,
                b: normalize_label(yb)?,
            });
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyJoin(a.format.name().into(), b.format.name().into()));
    }
    log::info!(
        "joined {} x {} items ({} / {}): {} pairs",
        a.len(),
        b.len(),
        a.format.name(),
        b.format.name(),
        pairs.len()
    );
    MappingDataset::new(Arc::clone(&a.format), Arc::clone(&b.format), pairs)
}

/// Disjoint train/dev/test item lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub ratios: [u32; 3],
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

/// 3-1-1 for lexicons under 3,000 items, 8-1-1 otherwise.
pub fn ratio_policy(n: usize) -> [u32; 3] {
    if n < 3000 {
        [3, 1, 1]
    } else {
        [8, 1, 1]
    }
}

/// Seeded shuffle, then dev and test each get `floor(n · r / Σr)` items
/// and train the rest.
pub fn split_keys<S: AsRef<str>>(keys: &[S], ratios: [u32; 3], seed: u64) -> Result<SplitSpec> {
    if ratios.contains(&0) {
        return Err(Error::config("split ratios must be positive"));
    }
    let n = keys.len();
    if n < ratios.len() {
        return Err(Error::config(format!("cannot split {n} items into 3 parts")));
    }
    let mut shuffled: Vec<String> = keys.iter().map(|k| k.as_ref().to_owned()).collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let total: u64 = ratios.iter().map(|&r| r as u64).sum();
    let n_dev = (n as u64 * ratios[1] as u64 / total) as usize;
    let n_test = (n as u64 * ratios[2] as u64 / total) as usize;
    let n_train = n - n_dev - n_test;
    if n_train == 0 || n_dev == 0 || n_test == 0 {
        return Err(Error::config(format!(
            "{n} items are too few for ratios {ratios:?}"
        )));
    }
    let test = shuffled.split_off(n_train + n_dev);
    let dev = shuffled.split_off(n_train);
    Ok(SplitSpec {
        seed,
        ratios,
        train: shuffled,
        dev,
        test,
    })
}

pub fn split_dataset(lexicon: &Lexicon, ratios: [u32; 3], seed: u64) -> Result<SplitSpec> {
    if lexicon.is_empty() {
        return Err(Error::config("cannot split an empty lexicon"));
    }
    let keys: Vec<&str> = lexicon.keys().collect();
    split_keys(&keys, ratios, seed)
}

impl SplitSpec {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SplitSpec = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        spec.check_disjoint()?;
        Ok(spec)
    }

    fn check_disjoint(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for k in self.train.iter().chain(&self.dev).chain(&self.test) {
            if !seen.insert(k.as_str()) {
                return Err(Error::config(format!("split lists `{k}` twice")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Default file name next to a lexicon: `<stem>.split.json`.
    pub fn default_path(lexicon: &Path) -> PathBuf {
        let stem = lexicon.file_stem().map_or_else(|| "lexicon".into(), |s| s.to_string_lossy());
        lexicon.with_file_name(format!("{stem}.split.json"))
    }
}

/// Word vectors paired with normalized gold labels, ready for training.
#[derive(Clone, Debug)]
pub struct Examples {
    pub format: Arc<LabelFormat>,
    pub keys: Vec<String>,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Examples {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }
}

/// Look up vectors for `keys`; out-of-vocabulary items are dropped and
/// counted.
pub fn align<S: AsRef<str>>(
    lexicon: &Lexicon,
    vectors: &WordVectorTable,
    keys: &[S],
) -> Result<(Examples, usize)> {
    let mut ex = Examples {
        format: Arc::clone(&lexicon.format),
        keys: Vec::with_capacity(keys.len()),
        inputs: Vec::with_capacity(keys.len()),
        targets: Vec::with_capacity(keys.len()),
    };
    let mut oov = 0;
    for key in keys {
        let key = key.as_ref();
        let Some(v) = vectors.get(key) else {
            oov += 1;
            continue;
        };
        ex.targets.push(lexicon.normalized(key)?.into_values());
        ex.inputs.push(v.to_vec());
        ex.keys.push(key.to_owned());
    }
    if oov > 0 {
        log::info!("{oov} of {} items have no word vector and were dropped", keys.len());
    }
    Ok((ex, oov))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        p
    }

    fn vad() -> Arc<LabelFormat> {
        Arc::new(LabelFormat::vad())
    }

    #[test]
    fn loads_valid_lexicon_in_any_column_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "l.tsv",
            "Word\tDominance\tvalence\tarousal\nrollercoaster\t5.2\t8.0\t8.1\nurine\t4.0\t2.5\t3.0\ncat\t5\t6\t4\n",
        );
        let lex = load_lexicon(&p, vad(), &LexiconOptions::default()).unwrap();
        assert_eq!(lex.len(), 3);
        assert_eq!(lex.get("rollercoaster").unwrap().values(), &[8.0, 8.1, 5.2]);
    }

    #[test]
    fn out_of_range_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "l.tsv", "word\tvalence\tarousal\tdominance\na\t5\t5\t5\nb\t12.0\t5\t5\n");
        match load_lexicon(&p, vad(), &LexiconOptions::default()).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("valence"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn missing_column_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "l.tsv", "word\tvalence\tarousal\na\t5\t5\n");
        assert!(matches!(
            load_lexicon(&p, vad(), &LexiconOptions::default()),
            Err(Error::Schema { column, .. }) if column == "dominance"
        ));
    }

    #[test]
    fn duplicate_key_rejected_and_folding_keeps_first() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "l.tsv", "word\tvalence\tarousal\tdominance\na\t5\t5\t5\na\t6\t6\t6\n");
        assert!(matches!(
            load_lexicon(&p, vad(), &LexiconOptions::default()),
            Err(Error::Duplicate { line: 3, .. })
        ));
        let p = write(&dir, "m.tsv", "word\tvalence\tarousal\tdominance\nCat\t5\t5\t5\ncat\t6\t6\t6\n");
        let opts = LexiconOptions {
            case_folding: CaseFolding::Lower,
            ..LexiconOptions::default()
        };
        let lex = load_lexicon(&p, vad(), &opts).unwrap();
        assert_eq!(lex.len(), 1);
        assert_eq!(lex.get("cat").unwrap().values(), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn word_vectors_load_and_filter() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "v.vec", "2 3\ncat 0.1 0.2 0.3\nDog 1 2 3\n");
        let t = load_word_vectors(&p, None).unwrap();
        assert_eq!((t.len(), t.dim()), (2, 3));
        assert_eq!(t.get("dog").unwrap(), &[1.0, 2.0, 3.0]);
        let f = VocabularyFilter::new(["cat"]);
        assert_eq!(load_word_vectors(&p, Some(&f)).unwrap().len(), 1);

        let p = write(&dir, "bad.vec", "2 3\ncat 0.1 0.2 0.3\ndog 1 2\n");
        assert!(matches!(
            load_word_vectors(&p, None),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    fn lex(format: Arc<LabelFormat>, keys: &[&str]) -> Lexicon {
        let mid = (format.range(0).unwrap().0 + format.range(0).unwrap().1) / 2.0;
        Lexicon::from_rows(
            "en",
            format.clone(),
            keys.iter().map(|k| (k.to_string(), vec![mid; format.len()])),
        )
        .unwrap()
    }

    #[test]
    fn join_is_an_intersection() {
        let a = lex(vad(), &["rollercoaster", "urine", "cat"]);
        let b = lex(Arc::new(LabelFormat::be5()), &["rollercoaster", "urine", "dog"]);
        let ab = build_mapping_dataset(&a, &b).unwrap();
        assert_eq!(ab.len(), 2);
        assert_eq!(build_mapping_dataset(&b, &a).unwrap().len(), 2);
        assert_eq!(ab.pairs()[0].a.values(), &[0.0, 0.0, 0.0]);
        assert!(matches!(build_mapping_dataset(&a, &a), Err(Error::Config(_))));

        let c = lex(Arc::new(LabelFormat::be5()), &["dog"]);
        assert!(matches!(build_mapping_dataset(&a, &c), Err(Error::EmptyJoin(..))));
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let keys: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let s = split_keys(&keys, [3, 1, 1], 42).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (6, 2, 2));
        let keys: Vec<String> = (0..1034).map(|i| format!("w{i}")).collect();
        let s = split_keys(&keys, [3, 1, 1], 42).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (622, 206, 206));
        assert_eq!(s, split_keys(&keys, [3, 1, 1], 42).unwrap());
        assert_ne!(s, split_keys(&keys, [3, 1, 1], 43).unwrap());
        assert!(split_keys(&keys[..2], [3, 1, 1], 1).is_err());
        assert_eq!(ratio_policy(1034), [3, 1, 1]);
        assert_eq!(ratio_policy(13_915), [8, 1, 1]);
    }

    #[test]
    fn split_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let keys: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let s = split_keys(&keys, [3, 1, 1], 7).unwrap();
        let p = dir.path().join("s.json");
        s.save(&p).unwrap();
        assert_eq!(SplitSpec::load(&p).unwrap(), s);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"seed\": 7") && text.contains("\"ratios\": ["));
    }

    #[test]
    fn align_drops_oov() {
        let l = lex(vad(), &["a", "B", "c"]);
        let mut t = WordVectorTable::new(2);
        t.insert("a", vec![1.0, 2.0]).unwrap();
        t.insert("b", vec![3.0, 4.0]).unwrap();
        let (ex, oov) = align(&l, &t, &["a", "B", "c"]).unwrap();
        assert_eq!(oov, 1);
        assert_eq!(ex.keys, ["a", "B"]);
        assert_eq!(ex.inputs[1], vec![3.0, 4.0]);
    }

    proptest::proptest! {
        #[test]
        fn split_is_a_partition(n in 3usize..300, seed in 0u64..1000, r in 1u32..9) {
            let keys: Vec<String> = (0..n).map(|i| format!("k{i}")).collect();
            if let Ok(s) = split_keys(&keys, [r, 1, 1], seed) {
                let mut all: Vec<&String> = s.train.iter().chain(&s.dev).chain(&s.test).collect();
                all.sort();
                let mut want: Vec<&String> = keys.iter().collect();
                want.sort();
                proptest::prop_assert_eq!(all, want);
            }
        }
    }
}
