use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::tokenize::{tokenize, TokenizationScheme};
use crate::error::{Error, Result};

/// Index of a token in a [`Vocabulary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const PAD: TokenId = TokenId(0);
    pub const UNK: TokenId = TokenId(1);
    pub const BOS: TokenId = TokenId(2);
    pub const EOS: TokenId = TokenId(3);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub const SPECIAL_TOKENS: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];
pub const NUM_SPECIALS: usize = SPECIAL_TOKENS.len();
pub const DEFAULT_MAX_SIZE: usize = 30_000;

/// Token/id mapping for one language. Ids are dense and the four specials
/// occupy ids 0..4. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    lang: String,
    token_to_id: HashMap<String, TokenId>,
    id_to_token: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    pub fn specials_only(lang: &str) -> Self {
        let mut v = Vocabulary {
            lang: lang.to_string(),
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
            counts: Vec::new(),
        };
        for s in SPECIAL_TOKENS {
            v.push(s.to_string(), 0);
        }
        v
    }

    fn push(&mut self, token: String, count: u64) {
        let id = TokenId(self.id_to_token.len() as u32);
        self.token_to_id.insert(token.clone(), id);
        self.id_to_token.push(token);
        self.counts.push(count);
    }

    /// Keeps the most frequent tokens seen at least `min_count` times, at most
    /// `max_size` entries including specials. Equal counts keep first-seen order.
    pub fn build<I, S>(lang: &str, corpus: I, max_size: usize, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size < NUM_SPECIALS + 1 {
            return Err(Error::Config(format!(
                "vocabulary max size {max_size} leaves no room beyond the {NUM_SPECIALS} specials"
            )));
        }
        if min_count < 1 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut seen: Vec<(String, u64)> = Vec::new();
        for tok in corpus {
            let tok = tok.as_ref();
            match index.get(tok) {
                Some(&i) => seen[i].1 += 1,
                None => {
                    index.insert(tok.to_string(), seen.len());
                    seen.push((tok.to_string(), 1));
                }
            }
        }
        // stable sort keeps first-occurrence order among ties
        seen.sort_by_key(|e| std::cmp::Reverse(e.1));

        let mut vocab = Vocabulary::specials_only(lang);
        for (tok, count) in seen {
            if vocab.len() >= max_size || count < min_count {
                break;
            }
            if vocab.token_to_id.contains_key(&tok) {
                continue;
            }
            vocab.push(tok, count);
        }
        Ok(vocab)
    }

    /// Tokenizes every line and builds a vocabulary over the resulting stream.
    pub fn from_lines<I, S>(
        lang: &str,
        lines: I,
        scheme: TokenizationScheme,
        max_size: usize,
        min_count: u64,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens = lines
            .into_iter()
            .flat_map(|l| tokenize(l.as_ref(), scheme));
        Self::build(lang, tokens, max_size, min_count)
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Id for `token`, or [`TokenId::UNK`] when out of vocabulary.
    pub fn id(&self, token: &str) -> TokenId {
        self.lookup(token).unwrap_or(TokenId::UNK)
    }

    pub fn lookup(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id.index()).map(String::as_str)
    }

    pub fn count(&self, id: TokenId) -> Option<u64> {
        self.counts.get(id.index()).copied()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<&str> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(SPECIAL_TOKENS[1]))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#vocab v1 lang={} size={}\n", self.lang, self.len());
        for (i, (tok, count)) in self.id_to_token.iter().zip(&self.counts).enumerate() {
            let _ = writeln!(out, "{tok}\t{i}\t{count}");
        }
        out
    }

    /// SHA-256 of the serialized form, hex-encoded.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.to_text().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse {
            what: "vocabulary",
            line,
            message,
        };
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad(1, "missing header".into()))??;
        let rest = header
            .strip_prefix("#vocab v1 ")
            .ok_or_else(|| bad(1, format!("unrecognized header {header:?}")))?;
        let mut lang = None;
        let mut size = None;
        for field in rest.split(' ') {
            match field.split_once('=') {
                Some(("lang", v)) => lang = Some(v.to_string()),
                Some(("size", v)) => {
                    size = Some(v.parse::<usize>().map_err(|e| bad(1, e.to_string()))?)
                }
                _ => return Err(bad(1, format!("unexpected header field {field:?}"))),
            }
        }
        let (lang, size) = match (lang, size) {
            (Some(l), Some(s)) => (l, s),
            _ => return Err(bad(1, "header needs lang= and size=".into())),
        };

        let mut vocab = Vocabulary {
            lang,
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
            counts: Vec::new(),
        };
        for (n, line) in lines.enumerate() {
            let line = line?;
            let lineno = n + 2;
            let cols: Vec<&str> = line.split('\t').collect();
            let [tok, id, count] = cols[..] else {
                return Err(bad(lineno, "expected token<TAB>id<TAB>count".into()));
            };
            let id: usize = id.parse().map_err(|_| bad(lineno, format!("bad id {id:?}")))?;
            let count: u64 = count
                .parse()
                .map_err(|_| bad(lineno, format!("bad count {count:?}")))?;
            if id != vocab.len() {
                return Err(bad(lineno, format!("id {id} is not dense (expected {})", vocab.len())));
            }
            if id < NUM_SPECIALS && tok != SPECIAL_TOKENS[id] {
                return Err(bad(lineno, format!("special id {id} remapped to {tok:?}")));
            }
            if vocab.token_to_id.contains_key(tok) {
                return Err(bad(lineno, format!("duplicate token {tok:?}")));
            }
            vocab.push(tok.to_string(), count);
        }
        if vocab.len() != size {
            return Err(bad(1, format!("header size {size} but {} entries", vocab.len())));
        }
        if vocab.len() < NUM_SPECIALS {
            return Err(bad(1, "missing special tokens".into()));
        }
        Ok(vocab)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
