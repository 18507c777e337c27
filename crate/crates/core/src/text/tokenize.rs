use unicode_normalization::UnicodeNormalization;

/// How surface text is cut into tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TokenizationScheme {
    /// Whitespace split with punctuation marks as standalone tokens.
    #[default]
    WordPunct,
    /// Whitespace split only.
    Whitespace,
}

const TERMINALS: [char; 5] = ['.', '!', '?', '।', '॥'];

pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '।' | '॥'
                | '“'
                | '”'
                | '‘'
                | '’'
                | '«'
                | '»'
                | '–'
                | '—'
                | '…'
                | '¡'
                | '¿'
                | '、'
                | '。'
                | '，'
                | '·'
        )
}

/// NFC-normalizes and lowercases `text`, then splits it into tokens.
///
/// Lowercasing is a no-op for scripts without case, so Indic text passes through.
pub fn tokenize(text: &str, scheme: TokenizationScheme) -> Vec<String> {
    let normalized: String = text.nfc().flat_map(char::to_lowercase).collect();
    let mut tokens = Vec::new();
    for word in normalized.split_whitespace() {
        match scheme {
            TokenizationScheme::Whitespace => tokens.push(word.to_string()),
            TokenizationScheme::WordPunct => {
                let mut current = String::new();
                for c in word.chars() {
                    if is_punctuation(c) {
                        if !current.is_empty() {
                            tokens.push(std::mem::take(&mut current));
                        }
                        tokens.push(c.to_string());
                    } else {
                        current.push(c);
                    }
                }
                if !current.is_empty() {
                    tokens.push(current);
                }
            }
        }
    }
    tokens
}

/// Splits plain text into sentences after runs of terminal punctuation that are
/// followed by whitespace or the end of input. Whitespace-only pieces are dropped.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if !TERMINALS.contains(&c) {
            continue;
        }
        let end = match chars.peek() {
            None => text.len(),
            Some(&(j, next)) if next.is_whitespace() => j,
            Some(_) => continue,
        };
        let piece = text[start..end].trim();
        if !piece.is_empty() {
            out.push(piece.to_string());
        }
        start = end;
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}
