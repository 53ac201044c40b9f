//! Byte-level BPE compatible with GPT-2.
//!
//! Text is split with GPT-2's pre-tokenisation pattern, each piece is mapped
//! byte-by-byte onto printable code points, and adjacent symbols are merged
//! greedily by lowest merge rank. No special tokens are inserted.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use fancy_regex::Regex;
use thiserror::Error;

/// GPT-2's pre-tokenisation pattern.
const SPLIT_PATTERN: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary is not a JSON object of token -> id: {0}")]
    MalformedVocab(String),
    #[error("id {id} is assigned to both {first:?} and {second:?}")]
    DuplicateId {
        id: u32,
        first: String,
        second: String,
    },
    #[error("vocabulary ids are not contiguous: id {0} is missing")]
    GapInIds(u32),
    #[error("malformed merge rule on line {line}: {content:?}")]
    MalformedMergeLine { line: usize, content: String },
    #[error("vocabulary has no symbol for byte {0:#04x}")]
    MissingByteSymbol(u8),
    #[error("unknown token id {0}")]
    UnknownId(u32),
}

/// GPT-2's reversible byte → printable-character table.
pub fn bytes_to_unicode() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0..=255u8 {
        let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
        table[b as usize] = if printable {
            char::from(b)
        } else {
            let c = char::from_u32(256 + extra).expect("valid code point");
            extra += 1;
            c
        };
    }
    table
}

/// Vocabulary and merge tables.
#[derive(Debug, Clone)]
pub struct TokenizerTables {
    byte_encoder: [char; 256],
    byte_decoder: HashMap<char, u8>,
    /// vocabulary id of each single-byte symbol
    byte_ids: [u32; 256],
    encoder: HashMap<String, u32>,
    decoder: Vec<String>,
    /// `(left id, right id) -> (rank, merged id)`
    merges: HashMap<(u32, u32), (u32, u32)>,
}

impl TokenizerTables {
    /// Build tables from `(token, id)` pairs and merge rules in priority order.
    pub fn new(
        vocab: impl IntoIterator<Item = (String, u32)>,
        merges: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, TokenizerError> {
        let mut by_id: HashMap<u32, String> = HashMap::new();
        let mut encoder = HashMap::new();
        for (token, id) in vocab {
            if let Some(first) = by_id.get(&id) {
                return Err(TokenizerError::DuplicateId {
                    id,
                    first: first.clone(),
                    second: token,
                });
            }
            by_id.insert(id, token.clone());
            encoder.insert(token, id);
        }
        let mut decoder = Vec::with_capacity(by_id.len());
        for id in 0..by_id.len() as u32 {
            match by_id.remove(&id) {
                Some(token) => decoder.push(token),
                None => return Err(TokenizerError::GapInIds(id)),
            }
        }

        let byte_encoder = bytes_to_unicode();
        let mut byte_ids = [0u32; 256];
        for (b, c) in byte_encoder.iter().enumerate() {
            byte_ids[b] = *encoder
                .get(&c.to_string())
                .ok_or(TokenizerError::MissingByteSymbol(b as u8))?;
        }
        let byte_decoder = byte_encoder
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect();

        let mut table = HashMap::new();
        for (rank, (left, right)) in merges.into_iter().enumerate() {
            let malformed = |why: &str| TokenizerError::MalformedMergeLine {
                line: rank + 1,
                content: format!("{left} {right} ({why})"),
            };
            let l = *encoder
                .get(&left)
                .ok_or_else(|| malformed("left symbol not in vocabulary"))?;
            let r = *encoder
                .get(&right)
                .ok_or_else(|| malformed("right symbol not in vocabulary"))?;
            let merged = *encoder
                .get(&format!("{left}{right}"))
                .ok_or_else(|| malformed("merged symbol not in vocabulary"))?;
            table.entry((l, r)).or_insert((rank as u32, merged));
        }
        Ok(Self {
            byte_encoder,
            byte_decoder,
            byte_ids,
            encoder,
            decoder,
            merges: table,
        })
    }

    /// Parse `encoder.json` text and `vocab.bpe` text.
    pub fn parse(vocab_json: &str, merges_text: &str) -> Result<Self, TokenizerError> {
        let raw: HashMap<String, u32> = serde_json::from_str(vocab_json)
            .map_err(|e| TokenizerError::MalformedVocab(e.to_string()))?;
        let merges = parse_merges(merges_text)?;
        let mut vocab: Vec<_> = raw.into_iter().collect();
        vocab.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        Self::new(vocab, merges)
    }

    pub fn from_files(vocab_path: &Path, merges_path: &Path) -> Result<Self, TokenizerError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| TokenizerError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        Self::parse(&read(vocab_path)?, &read(merges_path)?)
    }

    /// Plain byte-level tables: 256 single-byte tokens and no merges.
    pub fn byte_level() -> Self {
        let vocab = bytes_to_unicode()
            .iter()
            .enumerate()
            .map(|(b, c)| (c.to_string(), b as u32))
            .collect::<Vec<_>>();
        Self::new(vocab, std::iter::empty()).expect("byte table is complete")
    }

    pub fn vocab_size(&self) -> usize {
        self.decoder.len()
    }

    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    pub fn token_id(&self, symbol: &str) -> Option<u32> {
        self.encoder.get(symbol).copied()
    }

    pub fn byte_symbol(&self, byte: u8) -> char {
        self.byte_encoder[byte as usize]
    }
}

/// Merge rules, one space-separated pair per line. A leading `#version`
/// comment and blank lines are skipped.
fn parse_merges(text: &str) -> Result<Vec<(String, String)>, TokenizerError> {
    let mut merges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || (i == 0 && line.starts_with("#version")) {
            continue;
        }
        let mut parts = line.split(' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                merges.push((a.to_string(), b.to_string()))
            }
            _ => {
                return Err(TokenizerError::MalformedMergeLine {
                    line: i + 1,
                    content: line.to_string(),
                })
            }
        }
    }
    Ok(merges)
}

/// Encoder/decoder over a set of [`TokenizerTables`]. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    tables: TokenizerTables,
    pattern: Regex,
}

impl Tokenizer {
    pub fn new(tables: TokenizerTables) -> Self {
        let pattern = Regex::new(SPLIT_PATTERN).expect("static pattern compiles");
        Self { tables, pattern }
    }

    pub fn from_files(
        vocab_path: impl AsRef<Path>,
        merges_path: impl AsRef<Path>,
    ) -> Result<Self, TokenizerError> {
        Ok(Self::new(TokenizerTables::from_files(
            vocab_path.as_ref(),
            merges_path.as_ref(),
        )?))
    }

    pub fn tables(&self) -> &TokenizerTables {
        &self.tables
    }

    pub fn vocab_size(&self) -> usize {
        self.tables.vocab_size()
    }

    /// GPT-2 pre-tokenisation pieces of `text`.
    pub fn split<'t>(&self, text: &'t str) -> Vec<&'t str> {
        // The pattern only uses a bounded lookahead, so matching cannot fail
        // on backtracking limits for any realistic input.
        self.pattern
            .find_iter(text)
            .map(|m| m.expect("pre-tokenisation regex").as_str())
            .collect()
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for piece in self.split(text) {
            ids.extend(
                self.bpe(
                    piece
                        .bytes()
                        .map(|b| self.tables.byte_ids[b as usize])
                        .collect(),
                ),
            );
        }
        ids
    }

    /// Repeatedly merge the lowest-ranked adjacent pair (all of its
    /// non-overlapping occurrences, left to right) until none applies.
    fn bpe(&self, mut symbols: Vec<u32>) -> Vec<u32> {
        let merges = &self.tables.merges;
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|pair| {
                    merges
                        .get(&(pair[0], pair[1]))
                        .map(|&(rank, merged)| (rank, pair[0], pair[1], merged))
                })
                .min();
            let Some((_, left, right, merged)) = best else {
                break;
            };
            let mut out = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(symbols[i]);
                    i += 1;
                }
            }
            symbols = out;
        }
        symbols
    }

    /// Raw bytes of a token sequence.
    pub fn decode_bytes(&self, ids: &[u32]) -> Result<Vec<u8>, TokenizerError> {
        let mut bytes = Vec::new();
        for &id in ids {
            let token = self
                .tables
                .decoder
                .get(id as usize)
                .ok_or(TokenizerError::UnknownId(id))?;
            bytes.extend(token.chars().map(|c| self.tables.byte_decoder[&c]));
        }
        Ok(bytes)
    }

    /// Inverse of [`encode`](Self::encode). Sequences that split a multi-byte
    /// character decode it as U+FFFD.
    pub fn decode(&self, ids: &[u32]) -> Result<String, TokenizerError> {
        Ok(String::from_utf8_lossy(&self.decode_bytes(ids)?).into_owned())
    }

    /// Decoded text of a single token.
    pub fn token_text(&self, id: u32) -> Result<String, TokenizerError> {
        self.decode(&[id])
    }

    /// True when the token is an optional single leading space followed by
    /// one or more alphabetic characters.
    pub fn is_word_token(&self, id: u32) -> Result<bool, TokenizerError> {
        let bytes = self.decode_bytes(&[id])?;
        let Ok(text) = std::str::from_utf8(&bytes) else {
            return Ok(false);
        };
        let body = text.strip_prefix(' ').unwrap_or(text);
        Ok(!body.is_empty() && body.chars().all(char::is_alphabetic))
    }

    /// Ids of every whole-word token, ascending.
    pub fn word_token_ids(&self) -> Vec<u32> {
        (0..self.vocab_size() as u32)
            .filter(|&id| self.is_word_token(id).unwrap_or(false))
            .collect()
    }
}
