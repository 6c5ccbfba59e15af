//! Head identity, the HTRC v1 trace file format and per-head symbol interning.
//!
//! An HTRC v1 file is JSON Lines. The first line is a header
//!
//! ```text
//! {"htrc": 1, "model": "gpt2", "layers": 12, "heads": 12, "samples": 500, "granularity": "sequence"}
//! ```
//!
//! followed by exactly `samples * layers * heads` record lines in any order:
//!
//! ```text
//! {"s": 0, "l": 0, "h": 3, "a": [0, 0, 1, 2, 2]}
//! ```
//!
//! `a` holds the argmax key index for every valid (non-padding) query position,
//! ties resolved to the lowest key index by the producer. In `sequence`
//! granularity the whole array is one symbol; in `token` granularity every
//! element is one sample, and the array length for a given example must agree
//! across all layers and heads.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const HTRC_VERSION: u32 = 1;

/// An attention head, addressed by layer and index within the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HeadId {
    pub layer: u32,
    pub head: u32,
}

impl HeadId {
    pub const fn new(layer: u32, head: u32) -> Self {
        HeadId { layer, head }
    }
}

impl fmt::Display for HeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.layer, self.head)
    }
}

impl FromStr for HeadId {
    type Err = Error;

    /// Parses the `layer.head` token used in CSV output and on the command line.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected LAYER.HEAD, got {s:?}"));
        let (l, h) = s.trim().split_once('.').ok_or_else(bad)?;
        Ok(HeadId {
            layer: l.parse().map_err(|_| bad())?,
            head: h.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// One symbol per example: the whole argmax index sequence.
    #[default]
    Sequence,
    /// One symbol per valid query position.
    Token,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Sequence => "sequence",
            Granularity::Token => "token",
        })
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequence" => Ok(Granularity::Sequence),
            "token" => Ok(Granularity::Token),
            other => Err(Error::InvalidArgument(format!(
                "granularity must be \"sequence\" or \"token\", got {other:?}"
            ))),
        }
    }
}

/// Header metadata. `num_samples` counts examples as declared in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceHeader {
    pub model_name: String,
    pub num_layers: u32,
    pub heads_per_layer: u32,
    pub num_samples: usize,
    pub granularity: Granularity,
}

impl TraceHeader {
    fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.heads_per_layer == 0 || self.num_samples == 0 {
            return Err(Error::Integrity(format!(
                "header counts must all be >= 1 (layers={}, heads={}, samples={})",
                self.num_layers, self.heads_per_layer, self.num_samples
            )));
        }
        Ok(())
    }

    pub fn total_heads(&self) -> usize {
        self.num_layers as usize * self.heads_per_layer as usize
    }
}

/// Dense per-head symbol id.
pub type SymbolId = u32;

#[derive(Debug, Clone, Default)]
struct InternTable {
    sequences: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, SymbolId>,
}

impl InternTable {
    fn intern(&mut self, raw: &[u32]) -> SymbolId {
        if let Some(&id) = self.index.get(raw) {
            return id;
        }
        let id = self.sequences.len() as SymbolId;
        self.sequences.push(raw.to_vec());
        self.index.insert(raw.to_vec(), id);
        id
    }
}

/// Immutable (layer × head × sample) table of interned symbols.
#[derive(Debug, Clone)]
pub struct TraceSet {
    header: TraceHeader,
    sample_count: usize,
    /// Column-major by head: `symbols[head_index * sample_count + sample]`.
    symbols: Vec<SymbolId>,
    interns: Vec<InternTable>,
    /// Token granularity only: number of positions contributed by each example.
    token_lengths: Option<Vec<usize>>,
    source_digest: Option<String>,
}

impl PartialEq for TraceSet {
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header
            && self.sample_count == other.sample_count
            && self.token_lengths == other.token_lengths
            && self
                .heads()
                .all(|h| (0..self.sample_count).all(|s| self.raw_at(h, s) == other.raw_at(h, s)))
    }
}

impl TraceSet {
    /// Builds a sequence-granularity trace set from raw argmax sequences,
    /// indexed `raw[layer][head][sample]`.
    pub fn from_raw_sequences(
        model_name: impl Into<String>,
        raw: Vec<Vec<Vec<Vec<u32>>>>,
    ) -> Result<Self> {
        let num_layers = raw.len();
        let heads_per_layer = raw.first().map_or(0, Vec::len);
        let num_samples = raw.first().and_then(|l| l.first()).map_or(0, Vec::len);
        let header = TraceHeader {
            model_name: model_name.into(),
            num_layers: num_layers as u32,
            heads_per_layer: heads_per_layer as u32,
            num_samples,
            granularity: Granularity::Sequence,
        };
        header.validate()?;
        let mut cells = Vec::with_capacity(header.total_heads() * num_samples);
        for (l, layer) in raw.into_iter().enumerate() {
            if layer.len() != heads_per_layer {
                return Err(Error::Integrity(format!(
                    "layer {l} has {} heads",
                    layer.len()
                )));
            }
            for (h, head) in layer.into_iter().enumerate() {
                if head.len() != num_samples {
                    return Err(Error::Integrity(format!(
                        "head {l}.{h} has {} samples, expected {num_samples}",
                        head.len()
                    )));
                }
                cells.extend(head.into_iter().map(Some));
            }
        }
        Self::assemble(header, cells, None)
    }

    /// Builds a sequence-granularity trace set where every symbol is a single
    /// key index. `columns` is indexed `[layer * heads_per_layer + head][sample]`.
    pub fn from_symbol_columns(
        model_name: impl Into<String>,
        num_layers: u32,
        heads_per_layer: u32,
        columns: &[Vec<u32>],
    ) -> Result<Self> {
        if columns.len() != num_layers as usize * heads_per_layer as usize {
            return Err(Error::Integrity(format!(
                "{} columns for a {num_layers}x{heads_per_layer} geometry",
                columns.len()
            )));
        }
        let raw = (0..num_layers as usize)
            .map(|l| {
                (0..heads_per_layer as usize)
                    .map(|h| {
                        columns[l * heads_per_layer as usize + h]
                            .iter()
                            .map(|&v| vec![v])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::from_raw_sequences(model_name, raw)
    }

    /// `cells` is indexed `[(layer * H + head) * N + example]`.
    fn assemble(
        header: TraceHeader,
        cells: Vec<Option<Vec<u32>>>,
        source_digest: Option<String>,
    ) -> Result<Self> {
        header.validate()?;
        let n_heads = header.total_heads();
        let n_ex = header.num_samples;
        debug_assert_eq!(cells.len(), n_heads * n_ex);

        let missing = |idx: usize| {
            let head = idx / n_ex;
            Error::Integrity(format!(
                "missing record (s={}, l={}, h={})",
                idx % n_ex,
                head / header.heads_per_layer as usize,
                head % header.heads_per_layer as usize
            ))
        };
        if let Some(idx) = cells.iter().position(Option::is_none) {
            return Err(missing(idx));
        }
        let cells: Vec<Vec<u32>> = cells.into_iter().map(Option::unwrap_or_default).collect();

        let mut interns = vec![InternTable::default(); n_heads];
        match header.granularity {
            Granularity::Sequence => {
                let mut symbols = Vec::with_capacity(cells.len());
                for (head, column) in cells.chunks(n_ex).enumerate() {
                    for raw in column {
                        symbols.push(interns[head].intern(raw));
                    }
                }
                Ok(TraceSet {
                    header,
                    sample_count: n_ex,
                    symbols,
                    interns,
                    token_lengths: None,
                    source_digest,
                })
            }
            Granularity::Token => {
                let lengths: Vec<usize> = cells[..n_ex].iter().map(Vec::len).collect();
                for (head, column) in cells.chunks(n_ex).enumerate() {
                    for (s, raw) in column.iter().enumerate() {
                        if raw.len() != lengths[s] {
                            return Err(Error::Integrity(format!(
                                "token lengths disagree for sample {s}: head {}.{} has {}, head 0.0 has {}",
                                head / header.heads_per_layer as usize,
                                head % header.heads_per_layer as usize,
                                raw.len(),
                                lengths[s]
                            )));
                        }
                    }
                }
                let sample_count: usize = lengths.iter().sum();
                if sample_count == 0 {
                    return Err(Error::Integrity("token trace contains no positions".into()));
                }
                let mut symbols = Vec::with_capacity(n_heads * sample_count);
                for (head, column) in cells.chunks(n_ex).enumerate() {
                    for raw in column {
                        for &key in raw {
                            symbols.push(interns[head].intern(&[key]));
                        }
                    }
                }
                Ok(TraceSet {
                    header,
                    sample_count,
                    symbols,
                    interns,
                    token_lengths: Some(lengths),
                    source_digest,
                })
            }
        }
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    /// Number of samples entering every entropy: examples in sequence mode,
    /// valid token positions in token mode.
    pub fn num_samples(&self) -> usize {
        self.sample_count
    }

    /// SHA-256 of the file this set was loaded from, if any.
    pub fn source_digest(&self) -> Option<&str> {
        self.source_digest.as_deref()
    }

    /// All heads in ascending (layer, head) order.
    pub fn heads(&self) -> impl Iterator<Item = HeadId> + '_ {
        let hpl = self.header.heads_per_layer;
        (0..self.header.num_layers).flat_map(move |l| (0..hpl).map(move |h| HeadId::new(l, h)))
    }

    pub fn layer_heads(&self, layer: u32) -> Result<Vec<HeadId>> {
        if layer >= self.header.num_layers {
            return Err(Error::InvalidArgument(format!(
                "layer {layer} out of range (model has {} layers)",
                self.header.num_layers
            )));
        }
        Ok((0..self.header.heads_per_layer)
            .map(|h| HeadId::new(layer, h))
            .collect())
    }

    pub fn contains(&self, head: HeadId) -> bool {
        head.layer < self.header.num_layers && head.head < self.header.heads_per_layer
    }

    fn head_index(&self, head: HeadId) -> Result<usize> {
        if !self.contains(head) {
            return Err(Error::UnknownHead(head));
        }
        Ok(head.layer as usize * self.header.heads_per_layer as usize + head.head as usize)
    }

    /// The symbol column of one head, one entry per sample.
    pub fn column(&self, head: HeadId) -> Result<&[SymbolId]> {
        let idx = self.head_index(head)?;
        let n = self.sample_count;
        Ok(&self.symbols[idx * n..(idx + 1) * n])
    }

    /// Number of distinct symbols observed for `head`.
    pub fn num_symbols(&self, head: HeadId) -> Result<usize> {
        Ok(self.interns[self.head_index(head)?].sequences.len())
    }

    /// The raw argmax sequence that `symbol` stands for.
    pub fn raw_sequence(&self, head: HeadId, symbol: SymbolId) -> Result<&[u32]> {
        let table = &self.interns[self.head_index(head)?];
        table
            .sequences
            .get(symbol as usize)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidArgument(format!("head {head} has no symbol {symbol}")))
    }

    fn raw_at(&self, head: HeadId, sample: usize) -> &[u32] {
        let idx = self.head_index(head).expect("head in range");
        let sym = self.symbols[idx * self.sample_count + sample];
        &self.interns[idx].sequences[sym as usize]
    }

    /// Serializes to HTRC v1, records ordered by (sample, layer, head).
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<writer>", e);
        let header = HeaderLine {
            htrc: HTRC_VERSION,
            model: self.header.model_name.clone(),
            layers: self.header.num_layers,
            heads: self.header.heads_per_layer,
            samples: self.header.num_samples,
            granularity: self.header.granularity,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io)?;

        // Token mode: sample offsets of each example within the flattened columns.
        let offsets: Option<Vec<usize>> = self.token_lengths.as_ref().map(|lens| {
            lens.iter()
                .scan(0, |acc, &n| {
                    let start = *acc;
                    *acc += n;
                    Some(start)
                })
                .collect()
        });
        for s in 0..self.header.num_samples {
            for head in self.heads() {
                let a: Vec<u32> = match (&offsets, &self.token_lengths) {
                    (Some(off), Some(lens)) => (off[s]..off[s] + lens[s])
                        .map(|pos| self.raw_at(head, pos)[0])
                        .collect(),
                    _ => self.raw_at(head, s).to_vec(),
                };
                let rec = RecordLine {
                    s,
                    l: head.layer,
                    h: head.head,
                    a,
                };
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n").map_err(io)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    htrc: u32,
    model: String,
    layers: u32,
    heads: u32,
    samples: usize,
    granularity: Granularity,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    s: usize,
    l: u32,
    h: u32,
    a: Vec<u32>,
}

/// Parses an HTRC v1 stream.
pub fn parse_traces<R: BufRead>(reader: R) -> Result<TraceSet> {
    parse_with_digest(reader, None)
}

fn parse_with_digest<R: BufRead>(reader: R, digest: Option<String>) -> Result<TraceSet> {
    let mut lines = reader.lines().enumerate();
    let header_line = loop {
        match lines.next() {
            Some((_, Ok(line))) if line.trim().is_empty() => continue,
            Some((_, Ok(line))) => break line,
            Some((i, Err(e))) => return Err(Error::format(i + 1, e.to_string())),
            None => return Err(Error::format(1, "empty file: missing header")),
        }
    };
    let hl: HeaderLine = serde_json::from_str(&header_line)
        .map_err(|e| Error::format(1, format!("malformed header: {e}")))?;
    if hl.htrc != HTRC_VERSION {
        return Err(Error::format(
            1,
            format!("unsupported htrc version {}", hl.htrc),
        ));
    }
    let header = TraceHeader {
        model_name: hl.model,
        num_layers: hl.layers,
        heads_per_layer: hl.heads,
        num_samples: hl.samples,
        granularity: hl.granularity,
    };
    header.validate()?;

    let n_ex = header.num_samples;
    let hpl = header.heads_per_layer as usize;
    let mut cells: Vec<Option<Vec<u32>>> = vec![None; header.total_heads() * n_ex];
    let mut records = 0usize;
    for (i, line) in lines {
        let line = line.map_err(|e| Error::format(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordLine = serde_json::from_str(&line)
            .map_err(|e| Error::format(i + 1, format!("malformed record: {e}")))?;
        if rec.s >= n_ex || rec.l >= header.num_layers || rec.h as usize >= hpl {
            return Err(Error::Integrity(format!(
                "line {}: record (s={}, l={}, h={}) outside declared dimensions",
                i + 1,
                rec.s,
                rec.l,
                rec.h
            )));
        }
        let idx = (rec.l as usize * hpl + rec.h as usize) * n_ex + rec.s;
        if cells[idx].is_some() {
            return Err(Error::Integrity(format!(
                "line {}: duplicate record (s={}, l={}, h={})",
                i + 1,
                rec.s,
                rec.l,
                rec.h
            )));
        }
        cells[idx] = Some(rec.a);
        records += 1;
    }
    debug_assert!(records <= cells.len());
    TraceSet::assemble(header, cells, digest)
}

/// Loads and validates an HTRC v1 file.
pub fn load_traces(path: impl AsRef<Path>) -> Result<TraceSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    parse_with_digest(BufReader::new(bytes.as_slice()), Some(digest))
}

pub fn write_traces(traces: &TraceSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    traces.write_to(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<TraceSet> {
        parse_traces(text.as_bytes())
    }

    const SMALL: &str = r#"{"htrc": 1, "model": "toy", "layers": 1, "heads": 2, "samples": 3, "granularity": "sequence"}
{"s": 0, "l": 0, "h": 0, "a": [0, 1]}
{"s": 1, "l": 0, "h": 0, "a": [0, 1]}
{"s": 2, "l": 0, "h": 0, "a": [0, 0]}
{"s": 0, "l": 0, "h": 1, "a": [0, 0]}
{"s": 2, "l": 0, "h": 1, "a": [0, 1]}
{"s": 1, "l": 0, "h": 1, "a": [0, 0]}
"#;

    #[test]
    fn loads_dimensions() {
        let t = parse(SMALL).unwrap();
        assert_eq!(t.header().num_layers, 1);
        assert_eq!(t.header().heads_per_layer, 2);
        assert_eq!(t.num_samples(), 3);
        assert_eq!(t.column(HeadId::new(0, 1)).unwrap().len(), 3);
    }

    #[test]
    fn identical_sequences_share_a_symbol() {
        let t = parse(SMALL).unwrap();
        let col = t.column(HeadId::new(0, 0)).unwrap();
        assert_eq!(col[0], col[1]);
        assert_ne!(col[0], col[2]);
        assert_eq!(t.num_symbols(HeadId::new(0, 0)).unwrap(), 2);
        assert_eq!(t.raw_sequence(HeadId::new(0, 0), col[2]).unwrap(), &[0, 0]);
    }

    #[test]
    fn missing_record_is_integrity_error() {
        let text: String = SMALL
            .lines()
            .filter(|l| !l.contains(r#""s": 2, "l": 0, "h": 1"#))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = parse(&text).unwrap_err();
        assert!(
            matches!(err, Error::Integrity(ref m) if m.contains("s=2, l=0, h=1")),
            "{err}"
        );
    }

    #[test]
    fn duplicate_record_is_integrity_error() {
        let text = format!("{SMALL}{{\"s\": 0, \"l\": 0, \"h\": 0, \"a\": [3]}}\n");
        assert!(matches!(parse(&text), Err(Error::Integrity(_))));
    }

    #[test]
    fn malformed_header_is_format_error() {
        let text = SMALL.replacen("\"htrc\": 1,", "", 1);
        assert!(matches!(parse(&text), Err(Error::Format { line: 1, .. })));
        assert!(matches!(
            parse("not json\n"),
            Err(Error::Format { line: 1, .. })
        ));
        assert!(matches!(parse(""), Err(Error::Format { .. })));
        let bad_gran = SMALL.replacen("sequence", "chunk", 1);
        assert!(matches!(parse(&bad_gran), Err(Error::Format { .. })));
    }

    #[test]
    fn zero_samples_rejected() {
        let text = r#"{"htrc": 1, "model": "m", "layers": 1, "heads": 1, "samples": 0, "granularity": "sequence"}"#;
        assert!(matches!(parse(text), Err(Error::Integrity(_))));
    }

    #[test]
    fn out_of_range_record_rejected() {
        let text = format!("{SMALL}{{\"s\": 0, \"l\": 1, \"h\": 0, \"a\": [3]}}\n");
        assert!(matches!(parse(&text), Err(Error::Integrity(_))));
    }

    const TOKENS: &str = r#"{"htrc": 1, "model": "toy", "layers": 1, "heads": 2, "samples": 2, "granularity": "token"}
{"s": 0, "l": 0, "h": 0, "a": [0, 1, 1]}
{"s": 0, "l": 0, "h": 1, "a": [0, 0, 2]}
{"s": 1, "l": 0, "h": 0, "a": [0]}
{"s": 1, "l": 0, "h": 1, "a": [0]}
"#;

    #[test]
    fn token_mode_flattens_positions() {
        let t = parse(TOKENS).unwrap();
        assert_eq!(t.header().num_samples, 2);
        assert_eq!(t.num_samples(), 4);
        let col = t.column(HeadId::new(0, 0)).unwrap();
        assert_eq!(col, &[0, 1, 1, 0]);
        let col = t.column(HeadId::new(0, 1)).unwrap();
        assert_eq!(col, &[0, 0, 1, 0]);
    }

    #[test]
    fn token_mode_length_mismatch() {
        let text = TOKENS.replace(r#""h": 1, "a": [0, 0, 2]"#, r#""h": 1, "a": [0, 0]"#);
        assert!(
            matches!(parse(&text), Err(Error::Integrity(ref m)) if m.contains("token lengths"))
        );
    }

    #[test]
    fn round_trip_both_granularities() {
        for text in [SMALL, TOKENS] {
            let t = parse(text).unwrap();
            let mut buf = Vec::new();
            t.write_to(&mut buf).unwrap();
            let again = parse_traces(buf.as_slice()).unwrap();
            assert_eq!(t, again);
        }
    }

    #[test]
    fn head_id_parse_and_display() {
        let h: HeadId = "3.11".parse().unwrap();
        assert_eq!(h, HeadId::new(3, 11));
        assert_eq!(h.to_string(), "3.11");
        assert!("3".parse::<HeadId>().is_err());
        assert!("a.b".parse::<HeadId>().is_err());
    }

    #[test]
    fn unknown_head_lookup() {
        let t = parse(SMALL).unwrap();
        assert!(matches!(
            t.column(HeadId::new(0, 2)),
            Err(Error::UnknownHead(_))
        ));
    }
}
