//! Tokenization, sentence segmentation, vocabularies and integer encoding.

mod tokenize;
mod vocab;

pub use tokenize::{is_punctuation, segment_sentences, tokenize, TokenizationScheme};
pub use vocab::{TokenId, Vocabulary, DEFAULT_MAX_SIZE, NUM_SPECIALS, SPECIAL_TOKENS};

pub(crate) use vocab::hex;

use crate::error::{Error, Result};

/// An encoded sentence together with the text it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub ids: Vec<TokenId>,
    pub surface: String,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Maps tokens to ids, sending out-of-vocabulary tokens to `<unk>`.
/// The surface form is the tokens joined by single spaces.
pub fn encode_sentence<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Result<Sentence> {
    if tokens.is_empty() {
        return Err(Error::EmptySentence);
    }
    let ids = tokens.iter().map(|t| vocab.id(t.as_ref())).collect();
    let surface = tokens
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(" ");
    Ok(Sentence { ids, surface })
}

/// Tokenizes and encodes `text`, keeping `text` verbatim as the surface form.
pub fn encode_text(text: &str, scheme: TokenizationScheme, vocab: &Vocabulary) -> Result<Sentence> {
    let mut s = encode_sentence(&tokenize(text, scheme), vocab)?;
    s.surface = text.to_string();
    Ok(s)
}
