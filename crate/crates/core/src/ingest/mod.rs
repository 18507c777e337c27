//! Readers for bootstrap parallel corpora and comparable-article sources.

mod markup;
mod wiki;

pub use markup::strip_markup;
pub use wiki::{parse_wiki_dump, DumpReader, DumpStats};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use crate::classifier::LabeledPair;
use crate::error::{Error, Result};
use crate::extractor::ArticlePair;
use crate::files::open_input;
use crate::text::{encode_text, segment_sentences, Sentence, TokenizationScheme, Vocabulary};

/// A plain-text article.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Article {
    pub title: String,
    pub text: String,
    pub lang: String,
}

/// Line accounting for a line-oriented reader. `lines == retained + rejected`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Provenance {
    pub path: PathBuf,
    pub lines: usize,
    pub retained: usize,
    pub rejected: usize,
}

/// Sentence-aligned surface pairs used as training positives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BootstrapCorpus {
    pub pairs: Vec<(String, String)>,
    pub provenance: Provenance,
}

impl BootstrapCorpus {
    pub fn from_pairs(pairs: Vec<(String, String)>) -> Self {
        let n = pairs.len();
        BootstrapCorpus {
            pairs,
            provenance: Provenance { path: PathBuf::new(), lines: n, retained: n, rejected: 0 },
        }
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(s, _)| s.as_str())
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(_, t)| t.as_str())
    }

    /// Tokenizes and encodes every pair as a positive example.
    pub fn encode(
        &self,
        src: &Vocabulary,
        tgt: &Vocabulary,
        scheme: TokenizationScheme,
    ) -> Result<Vec<LabeledPair>> {
        self.pairs
            .iter()
            .map(|(s, t)| {
                Ok(LabeledPair {
                    src: encode_text(s, scheme, src)?,
                    tgt: encode_text(t, scheme, tgt)?,
                    label: true,
                })
            })
            .collect()
    }
}

/// Splits `src<TAB>tgt`, rejecting blank sides and extra tabs.
fn split_pair(line: &str) -> Option<(&str, &str)> {
    let (s, t) = line.split_once('\t')?;
    let (s, t) = (s.trim(), t.trim());
    if s.is_empty() || t.is_empty() || t.contains('\t') {
        return None;
    }
    Some((s, t))
}

pub fn read_parallel_tsv(path: &Path) -> Result<BootstrapCorpus> {
    let mut corpus = parse_parallel_tsv(open_input(path)?).map_err(|e| match e {
        Error::Stream(source) => Error::io(path, source),
        Error::EmptyCorpus(_) => Error::EmptyCorpus(path.display().to_string()),
        other => other,
    })?;
    corpus.provenance.path = path.to_path_buf();
    Ok(corpus)
}

pub fn parse_parallel_tsv(input: impl BufRead) -> Result<BootstrapCorpus> {
    let mut pairs = Vec::new();
    let mut prov = Provenance::default();
    for line in input.lines() {
        let line = line?;
        prov.lines += 1;
        match split_pair(line.trim_end_matches('\r')) {
            Some((s, t)) => pairs.push((s.to_string(), t.to_string())),
            None => prov.rejected += 1,
        }
    }
    prov.retained = pairs.len();
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus("no well-formed pairs".into()));
    }
    Ok(BootstrapCorpus { pairs, provenance: prov })
}

/// Reads plain-text articles, one `title<TAB>text` per line. Lines without a
/// title or with extra tabs are rejected and counted.
pub struct ArticlesTsv<R> {
    lines: std::io::Lines<R>,
    lang: String,
    stats: Provenance,
}

pub fn read_articles_tsv<R: BufRead>(input: R, lang: &str) -> ArticlesTsv<R> {
    ArticlesTsv { lines: input.lines(), lang: lang.to_string(), stats: Provenance::default() }
}

impl<R> ArticlesTsv<R> {
    pub fn stats(&self) -> &Provenance {
        &self.stats
    }
}

impl<R: BufRead> Iterator for ArticlesTsv<R> {
    type Item = Result<Article>;

    fn next(&mut self) -> Option<Result<Article>> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.stats.lines += 1;
            let line = line.trim_end_matches('\r');
            let parsed = line
                .split_once('\t')
                .filter(|(title, text)| !title.trim().is_empty() && !text.contains('\t'));
            match parsed {
                Some((title, text)) => {
                    self.stats.retained += 1;
                    return Some(Ok(Article {
                        title: title.trim().to_string(),
                        text: text.to_string(),
                        lang: self.lang.clone(),
                    }));
                }
                None => self.stats.rejected += 1,
            }
        }
    }
}

/// Source-to-target article title correspondences.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TitleMap {
    pub rows: Vec<(String, String)>,
}

impl TitleMap {
    /// Parses `src_title<TAB>tgt_title` lines. Blank lines are ignored; a title
    /// repeated on either side is an error listing every duplicate.
    pub fn parse(input: impl BufRead) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (s, t) = split_pair(line).ok_or_else(|| Error::Parse {
                what: "title map",
                line: i + 1,
                message: "expected src_title<TAB>tgt_title".into(),
            })?;
            rows.push((s.to_string(), t.to_string()));
        }
        let mut dups = BTreeSet::new();
        for side in [0, 1] {
            let mut seen = HashSet::new();
            for row in &rows {
                let title = if side == 0 { &row.0 } else { &row.1 };
                if !seen.insert(title) {
                    dups.insert(title.clone());
                }
            }
        }
        if !dups.is_empty() {
            return Err(Error::DuplicateTitles(dups.into_iter().collect()));
        }
        Ok(TitleMap { rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(open_input(path)?).map_err(|e| match e {
            Error::Stream(source) => Error::io(path, source),
            other => other,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Splits article text into encoded sentences, one paragraph per line.
/// Sentences that tokenize to nothing are skipped.
pub fn encode_article(text: &str, scheme: TokenizationScheme, vocab: &Vocabulary) -> Vec<Sentence> {
    text.lines()
        .flat_map(segment_sentences)
        .filter_map(|s| encode_text(&s, scheme, vocab).ok())
        .collect()
}

/// Outcome counts of pairing. `map_rows == paired + missing_src + missing_tgt`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairingStats {
    pub map_rows: usize,
    pub paired: usize,
    pub missing_src: usize,
    pub missing_tgt: usize,
}

/// Joins source articles to target articles through a title map. The target
/// side is held in memory (only mapped titles); the source side is streamed.
pub struct Pairer<'v> {
    src_to_tgt: HashMap<String, String>,
    tgt_text: HashMap<String, String>,
    seen_src: HashSet<String>,
    src_vocab: &'v Vocabulary,
    tgt_vocab: &'v Vocabulary,
    scheme: TokenizationScheme,
    stats: PairingStats,
}

impl<'v> Pairer<'v> {
    pub fn new(
        map: &TitleMap,
        tgt_articles: impl IntoIterator<Item = Result<Article>>,
        src_vocab: &'v Vocabulary,
        tgt_vocab: &'v Vocabulary,
        scheme: TokenizationScheme,
    ) -> Result<Self> {
        let wanted: HashSet<&str> = map.rows.iter().map(|(_, t)| t.as_str()).collect();
        let mut tgt_text = HashMap::new();
        for a in tgt_articles {
            let a = a?;
            if wanted.contains(a.title.as_str()) {
                tgt_text.insert(a.title, a.text);
            }
        }
        Ok(Pairer {
            src_to_tgt: map.rows.iter().cloned().collect(),
            tgt_text,
            seen_src: HashSet::new(),
            src_vocab,
            tgt_vocab,
            scheme,
            stats: PairingStats { map_rows: map.len(), ..Default::default() },
        })
    }

    /// Pairs one source article, or `None` if it is unmapped or its target is missing.
    pub fn pair(&mut self, src: &Article) -> Option<ArticlePair> {
        let tgt_title = self.src_to_tgt.get(&src.title)?;
        if !self.seen_src.insert(src.title.clone()) {
            return None;
        }
        let Some(tgt_text) = self.tgt_text.get(tgt_title) else {
            self.stats.missing_tgt += 1;
            return None;
        };
        self.stats.paired += 1;
        Some(ArticlePair {
            id: src.title.clone(),
            src_sents: encode_article(&src.text, self.scheme, self.src_vocab),
            tgt_sents: encode_article(tgt_text, self.scheme, self.tgt_vocab),
        })
    }

    /// Final counts, attributing map rows whose source never appeared.
    pub fn finish(&self) -> PairingStats {
        let mut s = self.stats;
        s.missing_src = s.map_rows - s.paired - s.missing_tgt;
        s
    }
}

/// Collects all pairs; output follows source article order.
pub fn pair_articles(
    src_articles: impl IntoIterator<Item = Result<Article>>,
    tgt_articles: impl IntoIterator<Item = Result<Article>>,
    map: &TitleMap,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    scheme: TokenizationScheme,
) -> Result<(Vec<ArticlePair>, PairingStats)> {
    let mut pairer = Pairer::new(map, tgt_articles, src_vocab, tgt_vocab, scheme)?;
    let mut out = Vec::new();
    for a in src_articles {
        if let Some(p) = pairer.pair(&a?) {
            out.push(p);
        }
    }
    Ok((out, pairer.finish()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(title: &str, text: &str) -> Result<Article> {
        Ok(Article { title: title.into(), text: text.into(), lang: "x".into() })
    }

    fn vocab() -> Vocabulary {
        Vocabulary::from_lines("x", ["a b c ."], TokenizationScheme::WordPunct, 100, 1).unwrap()
    }

    #[test]
    fn parallel_tsv_rules() {
        let ok = parse_parallel_tsv("a\tb\nc\td\ne\tf\n".as_bytes()).unwrap();
        assert_eq!(ok.pairs.len(), 3);
        assert_eq!(ok.provenance.rejected, 0);
        let mixed = parse_parallel_tsv("a\tb\nx\ty\tz\tw\n\tq\nnotab\n\n".as_bytes()).unwrap();
        assert_eq!(mixed.pairs, [("a".to_string(), "b".to_string())]);
        let p = &mixed.provenance;
        assert_eq!((p.lines, p.retained, p.rejected), (5, 1, 4));
        let err = parse_parallel_tsv("".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("empty corpus"));
    }

    #[test]
    fn missing_file_is_io() {
        let err = read_parallel_tsv(Path::new("/nonexistent/x.tsv")).unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn articles_tsv_counts() {
        let mut r = read_articles_tsv("A\tone. two.\nbad\n\tno title\nB\t\n".as_bytes(), "en");
        let titles: Vec<String> = r.by_ref().map(|a| a.unwrap().title).collect();
        assert_eq!(titles, ["A", "B"]);
        let s = r.stats();
        assert_eq!((s.lines, s.retained, s.rejected), (4, 2, 2));
    }

    #[test]
    fn title_map_duplicates() {
        let err = TitleMap::parse("a\tx\nb\tx\na\ty\n".as_bytes()).unwrap_err();
        match err {
            Error::DuplicateTitles(d) => assert_eq!(d, ["a", "x"]),
            other => panic!("{other:?}"),
        }
        assert!(TitleMap::parse("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn pairing() {
        let v = vocab();
        let map = TitleMap::parse("A\tX\nB\tY\nC\tZ\nD\tW\n".as_bytes()).unwrap();
        let src = vec![article("A", "a b. c."), article("B", "b"), article("C", "c"), article("Q", "a")];
        let tgt = vec![article("X", "a"), article("Y", "b\nc"), article("W", "a")];
        let (pairs, stats) =
            pair_articles(src, tgt, &map, &v, &v, TokenizationScheme::WordPunct).unwrap();
        assert_eq!(pairs.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(), ["A", "B"]);
        assert_eq!(pairs[0].src_sents.len(), 2);
        assert_eq!(pairs[1].tgt_sents.len(), 2);
        assert_eq!(stats, PairingStats { map_rows: 4, paired: 2, missing_src: 1, missing_tgt: 1 });

        let (none, stats) = pair_articles(
            vec![article("A", "a")],
            vec![article("X", "a")],
            &TitleMap::default(),
            &v,
            &v,
            TokenizationScheme::WordPunct,
        )
        .unwrap();
        assert!(none.is_empty());
        assert_eq!(stats.map_rows, 0);
    }

    #[test]
    fn sentences_split_per_line() {
        let s = encode_article("Heading\nOne two. Three.\n  \n", TokenizationScheme::WordPunct, &vocab());
        assert_eq!(s.iter().map(|s| s.surface.as_str()).collect::<Vec<_>>(), ["Heading", "One two.", "Three."]);
    }
}
