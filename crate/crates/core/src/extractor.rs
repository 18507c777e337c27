//! Candidate generation, scoring, threshold decisions and greedy decoding
//! over comparable article pairs.

use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;

use crate::encoder::Side;
use crate::error::{Error, Result};
use crate::model::SiameseModel;
use crate::ndiff::Tensor;
use crate::scalar::Scalar;
use crate::text::Sentence;

/// Default decision threshold, tuned for precision.
pub const DEFAULT_RHO: f64 = 0.99;
/// Looser threshold that trades precision for coverage.
pub const RECALL_RHO: f64 = 0.80;

/// Two topic-aligned documents, each already split into encoded sentences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArticlePair {
    pub id: String,
    pub src_sents: Vec<Sentence>,
    pub tgt_sents: Vec<Sentence>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractConfig {
    pub rho: f64,
    pub greedy: bool,
    /// Drop candidates whose longer/shorter token-length ratio exceeds this.
    pub max_len_ratio: Option<f64>,
    /// Article pairs scored per parallel work batch.
    pub batch: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            rho: DEFAULT_RHO,
            greedy: false,
            max_len_ratio: None,
            batch: 64,
        }
    }
}

pub fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("threshold rho must lie in (0, 1), got {rho}")))
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<()> {
        check_rho(self.rho)?;
        if let Some(r) = self.max_len_ratio {
            if r.is_nan() || r <= 1.0 {
                return Err(Error::Config(format!("max_len_ratio must exceed 1, got {r}")));
            }
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        Ok(())
    }
}

/// A scored candidate inside one article pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredPair {
    pub src_idx: usize,
    pub tgt_idx: usize,
    pub p: f64,
    /// Set by [`decide`]: `p >= rho`.
    pub accepted: bool,
}

/// All candidate scores of one article pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ArticleScores {
    pub pair_id: String,
    pub scored: Vec<ScoredPair>,
}

/// Cartesian product of source and target sentences, optionally filtered by length ratio.
pub fn candidate_pairs<'a>(
    ap: &'a ArticlePair,
    cfg: &'a ExtractConfig,
) -> impl Iterator<Item = (usize, usize)> + 'a {
    ap.src_sents.iter().enumerate().flat_map(move |(i, s)| {
        ap.tgt_sents
            .iter()
            .enumerate()
            .filter(move |(_, t)| within_ratio(s.len(), t.len(), cfg.max_len_ratio))
            .map(move |(j, _)| (i, j))
    })
}

fn within_ratio(a: usize, b: usize, max: Option<f64>) -> bool {
    let Some(max) = max else { return true };
    let (long, short) = if a >= b { (a, b) } else { (b, a) };
    if short == 0 {
        return long == 0;
    }
    long as f64 / short as f64 <= max
}

fn check_vocab(sents: &[Sentence], rows: usize, side: &str) -> Result<()> {
    for s in sents {
        if s.is_empty() {
            return Err(Error::EmptySentence);
        }
        if let Some(id) = s.ids.iter().find(|id| id.index() >= rows) {
            return Err(Error::VocabularyMismatch(format!(
                "{side} token id {} exceeds model vocabulary of {rows}",
                id.index()
            )));
        }
    }
    Ok(())
}

/// Scores the given candidates of one article, encoding each sentence once.
/// Output order follows `candidates`.
pub fn score_pairs<T: Scalar>(
    model: &SiameseModel<T>,
    ap: &ArticlePair,
    candidates: impl IntoIterator<Item = (usize, usize)>,
) -> Result<Vec<ScoredPair>> {
    let dims = model.dims();
    check_vocab(&ap.src_sents, dims.src_vocab, "source")?;
    check_vocab(&ap.tgt_sents, dims.tgt_vocab, "target")?;
    let mut src_vecs: Vec<Option<Tensor<T>>> = vec![None; ap.src_sents.len()];
    let mut tgt_vecs: Vec<Option<Tensor<T>>> = vec![None; ap.tgt_sents.len()];
    let mut out = Vec::new();
    for (i, j) in candidates {
        if src_vecs[i].is_none() {
            src_vecs[i] = Some(model.sentence_vector(&ap.src_sents[i], Side::Source)?);
        }
        if tgt_vecs[j].is_none() {
            tgt_vecs[j] = Some(model.sentence_vector(&ap.tgt_sents[j], Side::Target)?);
        }
        let (hs, ht) = (src_vecs[i].as_ref().unwrap(), tgt_vecs[j].as_ref().unwrap());
        out.push(ScoredPair {
            src_idx: i,
            tgt_idx: j,
            p: model.score_vectors(hs, ht)?.as_f64(),
            accepted: false,
        });
    }
    Ok(out)
}

/// Scores every candidate of `ap` under `cfg` and applies the threshold.
pub fn score_article<T: Scalar>(
    model: &SiameseModel<T>,
    ap: &ArticlePair,
    cfg: &ExtractConfig,
) -> Result<ArticleScores> {
    let mut scored = score_pairs(model, ap, candidate_pairs(ap, cfg))?;
    decide(&mut scored, cfg.rho);
    Ok(ArticleScores {
        pair_id: ap.id.clone(),
        scored,
    })
}

/// Scores many article pairs in parallel; output order matches input order.
pub fn score_articles<T: Scalar>(
    model: &SiameseModel<T>,
    articles: &[ArticlePair],
    cfg: &ExtractConfig,
) -> Result<Vec<ArticleScores>> {
    cfg.validate()?;
    articles
        .par_iter()
        .with_min_len(1)
        .map(|ap| score_article(model, ap, cfg))
        .collect()
}

/// Marks each pair accepted iff `p >= rho`.
pub fn decide(scored: &mut [ScoredPair], rho: f64) {
    for s in scored {
        s.accepted = s.p >= rho;
    }
}

/// Descending probability, ties broken by the smaller `(src_idx, tgt_idx)`.
fn rank(a: &ScoredPair, b: &ScoredPair) -> std::cmp::Ordering {
    b.p.total_cmp(&a.p)
        .then((a.src_idx, a.tgt_idx).cmp(&(b.src_idx, b.tgt_idx)))
}

/// Every pair with `p >= rho`, in rank order.
pub fn threshold_extract(scored: &[ScoredPair], rho: f64) -> Vec<ScoredPair> {
    let mut out: Vec<ScoredPair> = scored
        .iter()
        .filter(|s| s.p >= rho)
        .map(|s| ScoredPair { accepted: true, ..*s })
        .collect();
    out.sort_by(rank);
    out
}

/// Extraction without replacement: walk candidates in rank order and accept a
/// pair when it clears `rho` and neither of its sentences is already used.
/// The result is a partial matching, in acceptance order.
pub fn greedy_extract(scored: &[ScoredPair], rho: f64) -> Vec<ScoredPair> {
    let mut order: Vec<&ScoredPair> = scored.iter().filter(|s| s.p >= rho).collect();
    order.sort_by(|a, b| rank(a, b));
    let mut used_src = HashSet::new();
    let mut used_tgt = HashSet::new();
    let mut out = Vec::new();
    for s in order {
        if used_src.contains(&s.src_idx) || used_tgt.contains(&s.tgt_idx) {
            continue;
        }
        used_src.insert(s.src_idx);
        used_tgt.insert(s.tgt_idx);
        out.push(ScoredPair { accepted: true, ..*s });
    }
    out
}

pub fn extract(scored: &[ScoredPair], rho: f64, greedy: bool) -> Vec<ScoredPair> {
    if greedy {
        greedy_extract(scored, rho)
    } else {
        threshold_extract(scored, rho)
    }
}

/// Extraction counts at one threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub rho: f64,
    pub threshold: usize,
    pub greedy: usize,
}

/// Counts extracted pairs at each threshold, with and without greedy decoding.
pub fn sweep(scores: &[ArticleScores], rhos: &[f64]) -> Result<Vec<SweepRow>> {
    for &r in rhos {
        check_rho(r)?;
    }
    if rhos.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("sweep thresholds must be sorted ascending".into()));
    }
    Ok(rhos
        .iter()
        .map(|&rho| SweepRow {
            rho,
            threshold: scores
                .iter()
                .map(|a| a.scored.iter().filter(|s| s.p >= rho).count())
                .sum(),
            greedy: scores
                .iter()
                .map(|a| greedy_extract(&a.scored, rho).len())
                .sum(),
        })
        .collect())
}

/// `pair_id<TAB>src_idx<TAB>tgt_idx<TAB>p<TAB>src_surface<TAB>tgt_surface`, p to 6 decimals.
/// Tabs and newlines inside surfaces are replaced by spaces.
pub fn write_extraction(
    mut w: impl Write,
    ap: &ArticlePair,
    picked: &[ScoredPair],
) -> std::io::Result<()> {
    for s in picked {
        writeln!(
            w,
            "{}\t{}\t{}\t{:.6}\t{}\t{}",
            ap.id,
            s.src_idx,
            s.tgt_idx,
            s.p,
            clean(&ap.src_sents[s.src_idx].surface),
            clean(&ap.tgt_sents[s.tgt_idx].surface)
        )?;
    }
    Ok(())
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// `rho<TAB>count_threshold<TAB>count_greedy`
pub fn write_sweep(mut w: impl Write, rows: &[SweepRow]) -> std::io::Result<()> {
    for r in rows {
        writeln!(w, "{}\t{}\t{}", r.rho, r.threshold, r.greedy)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelDims;
    use crate::text::TokenId;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sent(len: usize) -> Sentence {
        Sentence {
            ids: (0..len).map(|i| TokenId(4 + i as u32 % 5)).collect(),
            surface: format!("len {len}"),
        }
    }

    fn article(src: &[usize], tgt: &[usize]) -> ArticlePair {
        ArticlePair {
            id: "a".into(),
            src_sents: src.iter().map(|&l| sent(l)).collect(),
            tgt_sents: tgt.iter().map(|&l| sent(l)).collect(),
        }
    }

    fn matrix(rows: &[&[f64]]) -> Vec<ScoredPair> {
        rows.iter()
            .enumerate()
            .flat_map(|(i, r)| {
                r.iter().enumerate().map(move |(j, &p)| ScoredPair {
                    src_idx: i,
                    tgt_idx: j,
                    p,
                    accepted: false,
                })
            })
            .collect()
    }

    fn idx(v: &[ScoredPair]) -> Vec<(usize, usize)> {
        v.iter().map(|s| (s.src_idx, s.tgt_idx)).collect()
    }

    #[test]
    fn candidates_cartesian_and_filtered() {
        let cfg = ExtractConfig::default();
        assert_eq!(candidate_pairs(&article(&[1, 2, 3], &[1, 1, 1, 1]), &cfg).count(), 12);
        assert_eq!(candidate_pairs(&article(&[], &[1, 2]), &cfg).count(), 0);
        let filtered = ExtractConfig { max_len_ratio: Some(3.0), ..cfg };
        assert_eq!(candidate_pairs(&article(&[10], &[2]), &filtered).count(), 0);
        assert_eq!(candidate_pairs(&article(&[6], &[2]), &filtered).count(), 1);
    }

    #[test]
    fn config_ranges() {
        assert!(ExtractConfig { rho: 1.5, ..Default::default() }.validate().is_err());
        assert!(ExtractConfig { rho: 0.0, ..Default::default() }.validate().is_err());
        assert!(ExtractConfig { max_len_ratio: Some(1.0), ..Default::default() }
            .validate()
            .is_err());
        assert!(ExtractConfig::default().validate().is_ok());
    }

    #[test]
    fn threshold_is_inclusive() {
        let mut s = matrix(&[&[0.99, 0.80]]);
        decide(&mut s, 0.99);
        assert!(s[0].accepted);
        assert!(!s[1].accepted);
        decide(&mut s, 0.80);
        assert!(s[0].accepted && s[1].accepted);
    }

    #[test]
    fn greedy_two_by_two() {
        let s = matrix(&[&[0.999, 0.995], &[0.991, 0.998]]);
        assert_eq!(idx(&greedy_extract(&s, 0.99)), [(0, 0), (1, 1)]);
        assert_eq!(threshold_extract(&s, 0.99).len(), 4);
        assert!(greedy_extract(&matrix(&[&[0.5, 0.2]]), 0.99).is_empty());
    }

    #[test]
    fn greedy_ties_prefer_lower_indices() {
        let s = matrix(&[&[0.995, 0.995], &[0.995, 0.995]]);
        assert_eq!(idx(&greedy_extract(&s, 0.99)), [(0, 0), (1, 1)]);
    }

    #[test]
    fn sweep_counts() {
        let scores = vec![ArticleScores { pair_id: "x".into(), scored: matrix(&[&[0.9]]) }];
        let rows = sweep(&scores, &[0.8, 0.99]).unwrap();
        assert_eq!(rows.iter().map(|r| r.threshold).collect::<Vec<_>>(), [1, 0]);
        assert_eq!(rows.iter().map(|r| r.greedy).collect::<Vec<_>>(), [1, 0]);
        assert!(sweep(&scores, &[0.99, 0.8]).is_err());
    }

    #[test]
    fn scoring_is_repeatable_and_checks_vocab() {
        let dims = ModelDims::new(9, 9).with_sizes(3, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = SiameseModel::<f64>::random(dims, 0.5, &mut rng).unwrap();
        let ap = article(&[2, 3], &[1, 4, 2]);
        let cfg = ExtractConfig::default();
        let a = score_article(&model, &ap, &cfg).unwrap();
        let b = score_article(&model, &ap, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scored.len(), 6);
        // cached encodings agree with the direct path
        for s in &a.scored {
            let direct = model.score(&ap.src_sents[s.src_idx], &ap.tgt_sents[s.tgt_idx]).unwrap();
            assert_eq!(s.p.to_bits(), direct.to_bits());
        }
        let small = SiameseModel::<f64>::random(ModelDims::new(5, 5).with_sizes(2, 2, 2), 0.1, &mut rng)
            .unwrap();
        assert!(matches!(
            score_article(&small, &ap, &cfg),
            Err(Error::VocabularyMismatch(_))
        ));
    }

    #[test]
    fn tsv_output() {
        let ap = ArticlePair {
            id: "p1".into(),
            src_sents: vec![Sentence { ids: vec![TokenId(4)], surface: "a\tb".into() }],
            tgt_sents: vec![Sentence { ids: vec![TokenId(4)], surface: "c".into() }],
        };
        let picked = [ScoredPair { src_idx: 0, tgt_idx: 0, p: 0.9912345678, accepted: true }];
        let mut out = Vec::new();
        write_extraction(&mut out, &ap, &picked).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "p1\t0\t0\t0.991235\ta b\tc\n");
        let mut out = Vec::new();
        write_sweep(&mut out, &[SweepRow { rho: 0.8, threshold: 3, greedy: 1 }]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0.8\t3\t1\n");
    }

    proptest! {
        #[test]
        fn modes_are_monotone_and_greedy_is_dominated(
            rows in 1usize..6, cols in 1usize..6,
            vals in prop::collection::vec(0.0f64..1.0, 36),
            r1 in 0.01f64..0.99, r2 in 0.01f64..0.99,
        ) {
            let s: Vec<ScoredPair> = (0..rows * cols)
                .map(|k| ScoredPair { src_idx: k / cols, tgt_idx: k % cols, p: vals[k], accepted: false })
                .collect();
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            for greedy in [false, true] {
                prop_assert!(extract(&s, hi, greedy).len() <= extract(&s, lo, greedy).len());
            }
            prop_assert!(greedy_extract(&s, lo).len() <= threshold_extract(&s, lo).len());
        }
    }
}
