//! Synthetic cipher-language bitext with exact gold alignments, and
//! precision/recall scoring of extractions against it.
//!
//! Source sentences are random sequences over tokens `s0..sN`. A translation
//! maps every token through a fixed random bijection onto `t0..tN`, shuffles
//! tokens inside consecutive windows, and optionally replaces tokens with
//! random target tokens.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::ops::RangeInclusive;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::extractor::ArticlePair;
use crate::ingest::{encode_article, BootstrapCorpus};
use crate::text::{TokenizationScheme, Vocabulary};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub vocab_size: usize,
    pub n_bootstrap: usize,
    pub n_articles: usize,
    pub sents_per_article: RangeInclusive<usize>,
    /// Tokens per sentence, before the terminator.
    pub sent_len: RangeInclusive<usize>,
    pub parallel_fraction: f64,
    /// Per-token replacement probability on the target side.
    pub noise: f64,
    /// Translation shuffles tokens within windows of this size; 1 keeps order.
    pub shuffle_window: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            vocab_size: 100,
            n_bootstrap: 2000,
            n_articles: 500,
            sents_per_article: 5..=20,
            sent_len: 4..=10,
            parallel_fraction: 0.3,
            noise: 0.0,
            shuffle_window: 2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.vocab_size < 2 {
            return bad("synthetic vocab_size must be at least 2");
        }
        if self.sents_per_article.is_empty() || self.sent_len.is_empty() || *self.sent_len.start() == 0 {
            return bad("synthetic sentence ranges must be non-empty with positive lengths");
        }
        if !(0.0..=1.0).contains(&self.parallel_fraction) {
            return bad("parallel_fraction must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.noise) {
            return bad("noise must lie in [0, 1)");
        }
        if self.shuffle_window == 0 {
            return bad("shuffle_window must be at least 1");
        }
        Ok(())
    }
}

/// True `(pair_id, src_idx, tgt_idx)` alignments.
pub type Alignment = (String, usize, usize);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoldAlignment {
    pub pairs: BTreeSet<Alignment>,
}

impl GoldAlignment {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `pair_id<TAB>src_idx<TAB>tgt_idx`, sorted.
    pub fn write_tsv(&self, mut w: impl Write) -> std::io::Result<()> {
        for (id, s, t) in &self.pairs {
            writeln!(w, "{id}\t{s}\t{t}")?;
        }
        Ok(())
    }

    pub fn read_tsv(input: impl BufRead) -> Result<Self> {
        Ok(GoldAlignment { pairs: read_alignments(input, "gold")?.into_iter().collect() })
    }
}

/// Reads the first three columns (`pair_id`, `src_idx`, `tgt_idx`) of each
/// non-blank line, so it accepts both gold files and extraction output.
pub fn read_alignments(input: impl BufRead, what: &'static str) -> Result<Vec<Alignment>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: &str| Error::Parse { what, line: i + 1, message: message.to_string() };
        let mut cols = line.split('\t');
        let id = cols.next().filter(|s| !s.is_empty()).ok_or_else(|| err("missing pair id"))?;
        let mut index = || -> Result<usize> {
            cols.next()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| err("expected integer sentence index"))
        };
        let (s, t) = (index()?, index()?);
        out.push((id.to_string(), s, t));
    }
    Ok(out)
}

/// One generated article pair, as surface sentences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticArticle {
    pub id: String,
    pub src: Vec<String>,
    pub tgt: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub bootstrap: BootstrapCorpus,
    pub articles: Vec<SyntheticArticle>,
    pub gold: GoldAlignment,
}

struct Cipher {
    perm: Vec<usize>,
}

impl Cipher {
    fn sentence(&self, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let len = rng.gen_range(spec.sent_len.clone());
        (0..len).map(|_| rng.gen_range(0..spec.vocab_size)).collect()
    }

    fn translate(&self, src: &[usize], spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut out: Vec<usize> = src.iter().map(|&i| self.perm[i]).collect();
        if spec.shuffle_window > 1 {
            for chunk in out.chunks_mut(spec.shuffle_window) {
                chunk.shuffle(rng);
            }
        }
        if spec.noise > 0.0 {
            for tok in &mut out {
                if rng.gen_bool(spec.noise) {
                    *tok = rng.gen_range(0..spec.vocab_size);
                }
            }
        }
        out
    }
}

fn surface(prefix: char, ids: &[usize]) -> String {
    let mut s: String = ids.iter().map(|i| format!("{prefix}{i} ")).collect();
    s.push('.');
    s
}

/// Deterministic in `spec` (including its seed).
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut perm: Vec<usize> = (0..spec.vocab_size).collect();
    perm.shuffle(&mut rng);
    let cipher = Cipher { perm };

    rng.set_stream(1);
    let pairs = (0..spec.n_bootstrap)
        .map(|_| {
            let s = cipher.sentence(spec, &mut rng);
            let t = cipher.translate(&s, spec, &mut rng);
            (surface('s', &s), surface('t', &t))
        })
        .collect();

    rng.set_stream(2);
    let mut articles = Vec::with_capacity(spec.n_articles);
    let mut gold = BTreeSet::new();
    let width = spec.n_articles.max(1).to_string().len();
    for a in 0..spec.n_articles {
        let id = format!("doc{a:0width$}");
        let n_src = rng.gen_range(spec.sents_per_article.clone());
        let n_tgt = rng.gen_range(spec.sents_per_article.clone());
        let n_gold = (spec.parallel_fraction * n_src.min(n_tgt) as f64).round() as usize;
        let src: Vec<Vec<usize>> = (0..n_src).map(|_| cipher.sentence(spec, &mut rng)).collect();
        let aligned_src = index::sample(&mut rng, n_src, n_gold).into_vec();
        let aligned_tgt = index::sample(&mut rng, n_tgt, n_gold).into_vec();
        let mut tgt: Vec<Option<Vec<usize>>> = vec![None; n_tgt];
        for (&i, &j) in aligned_src.iter().zip(&aligned_tgt) {
            tgt[j] = Some(cipher.translate(&src[i], spec, &mut rng));
            gold.insert((id.clone(), i, j));
        }
        let tgt: Vec<String> = tgt
            .into_iter()
            .map(|t| {
                let t = t.unwrap_or_else(|| {
                    let distractor = cipher.sentence(spec, &mut rng);
                    cipher.translate(&distractor, spec, &mut rng)
                });
                surface('t', &t)
            })
            .collect();
        articles.push(SyntheticArticle {
            id,
            src: src.iter().map(|s| surface('s', s)).collect(),
            tgt,
        });
    }
    Ok(SyntheticCorpus {
        bootstrap: BootstrapCorpus::from_pairs(pairs),
        articles,
        gold: GoldAlignment { pairs: gold },
    })
}

impl SyntheticCorpus {
    /// Encodes the articles the same way extraction from article files would.
    pub fn article_pairs(&self, src: &Vocabulary, tgt: &Vocabulary) -> Vec<ArticlePair> {
        let scheme = TokenizationScheme::WordPunct;
        self.articles
            .iter()
            .map(|a| ArticlePair {
                id: a.id.clone(),
                src_sents: encode_article(&a.src.join(" "), scheme, src),
                tgt_sents: encode_article(&a.tgt.join(" "), scheme, tgt),
            })
            .collect()
    }

    /// Writes `title<TAB>text` article files for the source and target sides.
    pub fn write_articles(&self, mut src: impl Write, mut tgt: impl Write) -> std::io::Result<()> {
        for a in &self.articles {
            writeln!(src, "{}\t{}", a.id, a.src.join(" "))?;
            writeln!(tgt, "{}\t{}", a.id, a.tgt.join(" "))?;
        }
        Ok(())
    }

    pub fn write_title_map(&self, mut w: impl Write) -> std::io::Result<()> {
        for a in &self.articles {
            writeln!(w, "{}\t{}", a.id, a.id)?;
        }
        Ok(())
    }

    pub fn write_bootstrap(&self, mut w: impl Write) -> std::io::Result<()> {
        for (s, t) in &self.bootstrap.pairs {
            writeln!(w, "{s}\t{t}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    /// `precision<TAB>recall<TAB>f1`, 4 decimals.
    pub fn line(&self) -> String {
        format!("{:.4}\t{:.4}\t{:.4}", self.precision, self.recall, self.f1)
    }
}

/// Set-based scores; duplicates and order in `extracted` do not matter.
/// An empty extraction has precision 1; empty extraction and empty gold score (1, 1, 1).
pub fn precision_recall<'a>(
    extracted: impl IntoIterator<Item = &'a Alignment>,
    gold: &GoldAlignment,
) -> Metrics {
    let extracted: BTreeSet<&Alignment> = extracted.into_iter().collect();
    if extracted.is_empty() && gold.is_empty() {
        return Metrics { precision: 1.0, recall: 1.0, f1: 1.0 };
    }
    let hits = extracted.iter().filter(|a| gold.pairs.contains(**a)).count() as f64;
    let precision = if extracted.is_empty() { 1.0 } else { hits / extracted.len() as f64 };
    let recall = if gold.is_empty() { 0.0 } else { hits / gold.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics { precision, recall, f1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small(seed: u64) -> SyntheticSpec {
        SyntheticSpec { vocab_size: 20, n_bootstrap: 30, n_articles: 12, seed, ..Default::default() }
    }

    fn a(id: &str, s: usize, t: usize) -> Alignment {
        (id.to_string(), s, t)
    }

    #[test]
    fn pure_substitution_without_noise_or_shuffle() {
        let spec = SyntheticSpec { shuffle_window: 1, noise: 0.0, ..small(3) };
        let c = gen_synthetic(&spec).unwrap();
        // the cipher is a bijection, so it is recoverable from the pairs and consistent
        let mut map = std::collections::HashMap::new();
        for (s, t) in &c.bootstrap.pairs {
            let (s, t): (Vec<_>, Vec<_>) = (s.split(' ').collect(), t.split(' ').collect());
            assert_eq!(s.len(), t.len());
            for (x, y) in s.iter().zip(&t) {
                assert_eq!(*map.entry(*x).or_insert(*y), *y);
            }
        }
        let images: BTreeSet<_> = map.values().collect();
        assert_eq!(images.len(), map.len());
    }

    #[test]
    fn gold_is_a_matching_and_points_at_translations() {
        let c = gen_synthetic(&small(4)).unwrap();
        assert!(!c.gold.is_empty());
        let mut src_seen = BTreeSet::new();
        let mut tgt_seen = BTreeSet::new();
        for (id, s, t) in &c.gold.pairs {
            assert!(src_seen.insert((id, s)) && tgt_seen.insert((id, t)));
            let art = c.articles.iter().find(|x| &x.id == id).unwrap();
            assert_eq!(art.src[*s].split(' ').count(), art.tgt[*t].split(' ').count());
        }
        for art in &c.articles {
            assert!((5..=20).contains(&art.src.len()) && (5..=20).contains(&art.tgt.len()));
        }
    }

    #[test]
    fn zero_fraction_means_no_gold() {
        let c = gen_synthetic(&SyntheticSpec { parallel_fraction: 0.0, ..small(5) }).unwrap();
        assert!(c.gold.is_empty());
    }

    #[test]
    fn seeded_generation_repeats() {
        assert_eq!(gen_synthetic(&small(6)).unwrap(), gen_synthetic(&small(6)).unwrap());
        assert_ne!(gen_synthetic(&small(6)).unwrap(), gen_synthetic(&small(7)).unwrap());
    }

    #[test]
    fn spec_ranges() {
        assert!(gen_synthetic(&SyntheticSpec { noise: 1.0, ..small(0) }).is_err());
        assert!(gen_synthetic(&SyntheticSpec { parallel_fraction: 1.5, ..small(0) }).is_err());
    }

    #[test]
    fn encoded_articles_keep_sentence_indices() {
        let c = gen_synthetic(&small(8)).unwrap();
        let src = Vocabulary::from_lines("s", c.bootstrap.sources(), TokenizationScheme::WordPunct, 100, 1).unwrap();
        let tgt = Vocabulary::from_lines("t", c.bootstrap.targets(), TokenizationScheme::WordPunct, 100, 1).unwrap();
        for (ap, raw) in c.article_pairs(&src, &tgt).iter().zip(&c.articles) {
            let surfaces: Vec<&str> = ap.src_sents.iter().map(|s| s.surface.as_str()).collect();
            assert_eq!(surfaces, raw.src.iter().map(String::as_str).collect::<Vec<_>>());
            assert_eq!(ap.tgt_sents.len(), raw.tgt.len());
        }
    }

    #[test]
    fn metric_conventions() {
        let gold = GoldAlignment { pairs: [a("d", 0, 0), a("d", 1, 1)].into_iter().collect() };
        let all: Vec<_> = gold.pairs.iter().cloned().collect();
        assert_eq!(precision_recall(&all, &gold), Metrics { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(precision_recall(&[], &gold), Metrics { precision: 1.0, recall: 0.0, f1: 0.0 });
        let half = [a("d", 0, 0), a("d", 2, 5)];
        assert_eq!(precision_recall(&half, &gold), Metrics { precision: 0.5, recall: 0.5, f1: 0.5 });
        let none = GoldAlignment::default();
        assert_eq!(precision_recall(&[], &none).line(), "1.0000\t1.0000\t1.0000");
    }

    #[test]
    fn gold_tsv_round_trip() {
        let c = gen_synthetic(&small(9)).unwrap();
        let mut buf = Vec::new();
        c.gold.write_tsv(&mut buf).unwrap();
        assert_eq!(GoldAlignment::read_tsv(buf.as_slice()).unwrap(), c.gold);
        let extraction = "doc1\t2\t3\t0.995000\ts1 .\tt1 .\n";
        assert_eq!(read_alignments(extraction.as_bytes(), "x").unwrap(), [a("doc1", 2, 3)]);
        assert!(read_alignments("doc1\tx\t3\n".as_bytes(), "x").is_err());
    }

    proptest! {
        #[test]
        fn order_invariant(mut ext in prop::collection::vec((0usize..3, 0usize..4, 0usize..4), 0..12), seed in any::<u64>()) {
            let gold = GoldAlignment { pairs: [a("0", 0, 0), a("1", 1, 2), a("2", 3, 3)].into_iter().collect() };
            let as_align = |v: &[(usize, usize, usize)]| v.iter().map(|(d, s, t)| (d.to_string(), *s, *t)).collect::<Vec<_>>();
            let before = precision_recall(&as_align(&ext), &gold);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ext.shuffle(&mut rng);
            prop_assert_eq!(before, precision_recall(&as_align(&ext), &gold));
        }
    }
}
