//! `pairmine`: vocabulary building, training, extraction, sweeps and evaluation.
//!
//! Exit codes: 0 success, 1 usage or invalid configuration, 2 I/O, 3 bad data.

mod manifest;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pairmine::extractor::{
    extract, score_articles, sweep, write_extraction, write_sweep, ArticlePair, ExtractConfig,
    SweepRow, DEFAULT_RHO,
};
use pairmine::files::{open_input, write_atomic};
use pairmine::ingest::{
    parse_wiki_dump, read_articles_tsv, read_parallel_tsv, Article, ArticlesTsv, DumpReader,
    Pairer, TitleMap,
};
use pairmine::syntheval::{
    gen_synthetic, precision_recall, read_alignments, GoldAlignment, SyntheticSpec,
};
use pairmine::text::{TokenizationScheme, Vocabulary, DEFAULT_MAX_SIZE};
use pairmine::trainer::{train_with, TrainConfig};
use pairmine::{kv, Checkpoint64, Error, Result};

use manifest::Manifest;

#[derive(Parser)]
#[command(name = "pairmine", version, about = "Mine parallel sentences from comparable corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a vocabulary from a corpus file.
    BuildVocab(BuildVocabArgs),
    /// Train the pair classifier on a parallel TSV bootstrap corpus.
    Train(TrainArgs),
    /// Score candidate sentence pairs of paired articles and write extracted pairs.
    Extract(ExtractArgs),
    /// Count extractions over several thresholds, with and without greedy decoding.
    Sweep(SweepArgs),
    /// Precision, recall and F1 of an extraction against gold alignments.
    Eval(EvalArgs),
    /// Generate a synthetic cipher-language corpus with gold alignments.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    WordPunct,
    Whitespace,
}

impl From<Scheme> for TokenizationScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::WordPunct => TokenizationScheme::WordPunct,
            Scheme::Whitespace => TokenizationScheme::Whitespace,
        }
    }
}

#[derive(Args)]
struct BuildVocabArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    lang: String,
    #[arg(long)]
    max_size: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    /// Use only this 1-based tab-separated column of each line.
    #[arg(long)]
    column: Option<usize>,
    #[arg(long, value_enum, default_value = "word-punct")]
    scheme: Scheme,
    #[arg(long)]
    out: PathBuf,
    /// key=value defaults (max_size, min_count); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    bootstrap: PathBuf,
    #[arg(long)]
    src_vocab: PathBuf,
    #[arg(long)]
    tgt_vocab: PathBuf,
    /// Negatives per source sentence.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["adam", "sgd"])]
    optimizer: Option<String>,
    #[arg(long)]
    emb: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    matching: Option<usize>,
    #[arg(long)]
    init_scale: Option<f64>,
    #[arg(long, value_enum, default_value = "word-punct")]
    scheme: Scheme,
    #[arg(long)]
    out_ckpt: PathBuf,
    /// Per-epoch loss log; defaults to `<out-ckpt>.loss.tsv`.
    #[arg(long)]
    loss_log: Option<PathBuf>,
    /// key=value training config; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    src_vocab: PathBuf,
    #[arg(long)]
    tgt_vocab: PathBuf,
    /// MediaWiki XML export (optionally .gz or .bz2).
    #[arg(long, required_unless_present = "src_articles", conflicts_with = "src_articles")]
    src_dump: Option<PathBuf>,
    /// Plain-text articles, one `title<TAB>text` per line.
    #[arg(long)]
    src_articles: Option<PathBuf>,
    #[arg(long, required_unless_present = "tgt_articles", conflicts_with = "tgt_articles")]
    tgt_dump: Option<PathBuf>,
    #[arg(long)]
    tgt_articles: Option<PathBuf>,
    /// `src_title<TAB>tgt_title` lines.
    #[arg(long)]
    title_map: PathBuf,
    #[arg(long)]
    max_len_ratio: Option<f64>,
    /// Article pairs scored per batch.
    #[arg(long)]
    batch: Option<usize>,
    /// Worker threads for scoring.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum, default_value = "word-punct")]
    scheme: Scheme,
    /// key=value config (rho, greedy, max_len_ratio, batch, jobs, rhos); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    rho: Option<f64>,
    /// Each sentence joins at most one extracted pair.
    #[arg(long)]
    greedy: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Comma-separated ascending thresholds.
    #[arg(long, value_delimiter = ',')]
    rhos: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Extraction TSV (only the first three columns are read).
    #[arg(long)]
    extracted: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Also write the metrics line here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    vocab_size: usize,
    #[arg(long, default_value_t = 2000)]
    n_bootstrap: usize,
    #[arg(long, default_value_t = 500)]
    n_articles: usize,
    #[arg(long, default_value_t = 5)]
    min_sents: usize,
    #[arg(long, default_value_t = 20)]
    max_sents: usize,
    #[arg(long, default_value_t = 0.3)]
    parallel_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 2)]
    window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

const DEFAULT_RHOS: [f64; 4] = [0.5, 0.8, 0.9, 0.99];

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::BuildVocab(a) => build_vocab(a),
        Command::Train(a) => train(a),
        Command::Extract(a) => run_extract(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pairmine: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        1
    } else if e.is_io() {
        2
    } else {
        3
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn read_config(path: Option<&Path>) -> Result<BTreeMap<String, String>> {
    match path {
        None => Ok(BTreeMap::new()),
        Some(p) => kv::parse(&std::fs::read_to_string(p).map_err(io_err(p))?),
    }
}

/// Writes to `<path>.tmp` and renames into place on [`AtomicFile::commit`].
/// Dropped without committing, the temporary file is removed.
struct AtomicFile {
    path: PathBuf,
    tmp: PathBuf,
    writer: BufWriter<File>,
    committed: bool,
}

impl AtomicFile {
    fn create(path: &Path) -> Result<Self> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        Ok(AtomicFile { path: path.to_path_buf(), tmp, writer: BufWriter::new(file), committed: false })
    }

    fn commit(mut self) -> Result<()> {
        self.writer.flush().map_err(io_err(&self.tmp))?;
        std::fs::rename(&self.tmp, &self.path).map_err(io_err(&self.path))?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for AtomicFile {
    fn drop(&mut self) {
        if !self.committed {
            let _ = std::fs::remove_file(&self.tmp);
        }
    }
}

fn build_vocab(a: BuildVocabArgs) -> Result<()> {
    let cfg = read_config(a.config.as_deref())?;
    let max_size = a.max_size.or(kv::get(&cfg, "max_size")?).unwrap_or(DEFAULT_MAX_SIZE);
    let min_count = a.min_count.or(kv::get(&cfg, "min_count")?).unwrap_or(1);
    if a.column == Some(0) {
        return Err(Error::Config("--column is 1-based".into()));
    }
    let mut lines = Vec::new();
    for line in open_input(&a.input)?.lines() {
        let line = line.map_err(io_err(&a.input))?;
        let text = match a.column {
            None => line.as_str(),
            Some(c) => line.split('\t').nth(c - 1).unwrap_or(""),
        };
        lines.push(text.to_string());
    }
    let vocab = Vocabulary::from_lines(&a.lang, &lines, a.scheme.into(), max_size, min_count)?;
    write_atomic(&a.out, vocab.to_text().as_bytes())?;
    eprintln!("pairmine: {} lines, {} types -> {}", lines.len(), vocab.len(), a.out.display());

    let mut m = Manifest::new("build-vocab");
    m.config("lang", &a.lang);
    m.config("max_size", max_size);
    m.config("min_count", min_count);
    m.config("column", a.column.map_or("all".to_string(), |c| c.to_string()));
    m.input("corpus", &a.input);
    m.output("vocab", &a.out);
    m.write(&a.out)?;
    Ok(())
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    Vocabulary::load(path)
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = TrainConfig::default();
    cfg.apply(&read_config(a.config.as_deref())?)?;
    let mut flags = BTreeMap::new();
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            flags.insert(k.to_string(), v);
        }
    };
    flag("m", a.m.map(|v| v.to_string()));
    flag("epochs", a.epochs.map(|v| v.to_string()));
    flag("batch_size", a.batch.map(|v| v.to_string()));
    flag("learning_rate", a.lr.map(|v| v.to_string()));
    flag("seed", a.seed.map(|v| v.to_string()));
    flag("optimizer", a.optimizer.clone());
    flag("emb", a.emb.map(|v| v.to_string()));
    flag("hidden", a.hidden.map(|v| v.to_string()));
    flag("matching", a.matching.map(|v| v.to_string()));
    flag("init_scale", a.init_scale.map(|v| v.to_string()));
    cfg.apply(&flags)?;
    cfg.validate()?;

    let src_vocab = load_vocab(&a.src_vocab)?;
    let tgt_vocab = load_vocab(&a.tgt_vocab)?;
    let corpus = read_parallel_tsv(&a.bootstrap)?;
    let p = &corpus.provenance;
    eprintln!(
        "pairmine: bootstrap {} lines, {} pairs, {} rejected",
        p.lines, p.retained, p.rejected
    );
    let pairs = corpus.encode(&src_vocab, &tgt_vocab, a.scheme.into())?;

    let log_path = a.loss_log.clone().unwrap_or_else(|| {
        let mut s = a.out_ckpt.as_os_str().to_owned();
        s.push(".loss.tsv");
        PathBuf::from(s)
    });
    let mut log = AtomicFile::create(&log_path)?;
    writeln!(log.writer, "epoch\tsum_loss\tmean_loss").map_err(io_err(&log_path))?;
    let ckpt = train_with::<f64>(&pairs, &src_vocab, &tgt_vocab, &cfg, |stats, _| {
        eprintln!("pairmine: {}", stats.log_line());
        writeln!(log.writer, "{}", stats.log_line()).map_err(io_err(&log_path))
    })?;
    log.commit()?;
    ckpt.save(&a.out_ckpt)?;
    eprintln!(
        "pairmine: {} parameters -> {}",
        ckpt.model.num_parameters(),
        a.out_ckpt.display()
    );

    let mut m = Manifest::new("train");
    m.config_text(&cfg.to_kv())?;
    m.input("bootstrap", &a.bootstrap);
    m.input("src_vocab", &a.src_vocab);
    m.input("tgt_vocab", &a.tgt_vocab);
    m.output("checkpoint", &a.out_ckpt);
    m.output("loss_log", &log_path);
    m.write(&a.out_ckpt)?;
    Ok(())
}

enum ArticleStream {
    Dump(DumpReader<Box<dyn BufRead + Send>>),
    Tsv(ArticlesTsv<Box<dyn BufRead + Send>>),
}

impl ArticleStream {
    fn open(dump: Option<&Path>, articles: Option<&Path>, lang: &str) -> Result<Self> {
        match (dump, articles) {
            (Some(p), _) => Ok(ArticleStream::Dump(parse_wiki_dump(open_input(p)?, lang))),
            (None, Some(p)) => Ok(ArticleStream::Tsv(read_articles_tsv(open_input(p)?, lang))),
            (None, None) => Err(Error::Config("no article source given".into())),
        }
    }

    fn report(&self, side: &str) {
        match self {
            ArticleStream::Dump(d) => {
                let s = d.stats();
                eprintln!(
                    "pairmine: {side} dump: {} pages, {} articles, {} redirects, {} other namespaces",
                    s.pages, s.articles, s.redirects, s.other_namespace
                );
            }
            ArticleStream::Tsv(t) => {
                let s = t.stats();
                eprintln!(
                    "pairmine: {side} articles: {} lines, {} retained, {} rejected",
                    s.lines, s.retained, s.rejected
                );
            }
        }
    }
}

impl Iterator for ArticleStream {
    type Item = Result<Article>;

    fn next(&mut self) -> Option<Result<Article>> {
        match self {
            ArticleStream::Dump(d) => d.next(),
            ArticleStream::Tsv(t) => t.next(),
        }
    }
}

/// Resolved extraction settings shared by `extract` and `sweep`.
struct Resolved {
    cfg: ExtractConfig,
    jobs: Option<usize>,
    file: BTreeMap<String, String>,
}

fn resolve(c: &CorpusArgs, rho_flag: Option<f64>, greedy_flag: bool) -> Result<Resolved> {
    let file = read_config(c.config.as_deref())?;
    let defaults = ExtractConfig::default();
    let cfg = ExtractConfig {
        rho: rho_flag.or(kv::get(&file, "rho")?).unwrap_or(DEFAULT_RHO),
        greedy: greedy_flag || kv::get(&file, "greedy")?.unwrap_or(false),
        max_len_ratio: c.max_len_ratio.or(kv::get(&file, "max_len_ratio")?),
        batch: c.batch.or(kv::get(&file, "batch")?).unwrap_or(defaults.batch),
    };
    cfg.validate()?;
    let jobs = c.jobs.or(kv::get(&file, "jobs")?);
    if jobs == Some(0) {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    Ok(Resolved { cfg, jobs, file })
}

fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    match jobs {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
    }
}

/// Loads the model and inputs, pairs articles, and hands each scored batch to `sink`.
fn score_corpus(
    c: &CorpusArgs,
    cfg: &ExtractConfig,
    manifest: &mut Manifest,
    mut sink: impl FnMut(&[ArticlePair], &[pairmine::extractor::ArticleScores]) -> Result<()>,
) -> Result<()> {
    let src_vocab = load_vocab(&c.src_vocab)?;
    let tgt_vocab = load_vocab(&c.tgt_vocab)?;
    let ckpt = Checkpoint64::load_for(&c.ckpt, &src_vocab, &tgt_vocab)?;
    let map = TitleMap::read(&c.title_map)?;
    let mut tgt = ArticleStream::open(c.tgt_dump.as_deref(), c.tgt_articles.as_deref(), tgt_vocab.lang())?;
    let mut src = ArticleStream::open(c.src_dump.as_deref(), c.src_articles.as_deref(), src_vocab.lang())?;
    let mut pairer = Pairer::new(&map, &mut tgt, &src_vocab, &tgt_vocab, c.scheme.into())?;
    tgt.report("target");

    let mut batch = Vec::with_capacity(cfg.batch);
    let mut flush = |batch: &mut Vec<ArticlePair>| -> Result<()> {
        let scores = score_articles(&ckpt.model, batch, cfg)?;
        sink(batch, &scores)?;
        batch.clear();
        Ok(())
    };
    for article in &mut src {
        if let Some(pair) = pairer.pair(&article?) {
            batch.push(pair);
            if batch.len() == cfg.batch {
                flush(&mut batch)?;
            }
        }
    }
    flush(&mut batch)?;
    src.report("source");
    let s = pairer.finish();
    eprintln!(
        "pairmine: title map {} rows: {} paired, {} missing source, {} missing target",
        s.map_rows, s.paired, s.missing_src, s.missing_tgt
    );

    manifest.input("checkpoint", &c.ckpt);
    manifest.input("src_vocab", &c.src_vocab);
    manifest.input("tgt_vocab", &c.tgt_vocab);
    manifest.input("title_map", &c.title_map);
    for (role, p) in [
        ("src_dump", &c.src_dump),
        ("src_articles", &c.src_articles),
        ("tgt_dump", &c.tgt_dump),
        ("tgt_articles", &c.tgt_articles),
    ] {
        if let Some(p) = p {
            manifest.input(role, p);
        }
    }
    manifest.config("seed", ckpt.config.seed);
    Ok(())
}

fn record_extract_config(m: &mut Manifest, r: &Resolved) {
    m.config("rho", r.cfg.rho);
    m.config("greedy", r.cfg.greedy);
    m.config("max_len_ratio", r.cfg.max_len_ratio.map_or("none".to_string(), |v| v.to_string()));
    m.config("batch", r.cfg.batch);
    m.config("jobs", r.jobs.map_or("auto".to_string(), |v| v.to_string()));
}

fn run_extract(a: ExtractArgs) -> Result<()> {
    let r = resolve(&a.corpus, a.rho, a.greedy)?;
    let mut m = Manifest::new("extract");
    record_extract_config(&mut m, &r);
    let mut out = AtomicFile::create(&a.out)?;
    let (mut candidates, mut extracted) = (0usize, 0usize);
    with_jobs(r.jobs, || {
        score_corpus(&a.corpus, &r.cfg, &mut m, |aps, scores| {
            for (ap, sc) in aps.iter().zip(scores) {
                let picked = extract(&sc.scored, r.cfg.rho, r.cfg.greedy);
                candidates += sc.scored.len();
                extracted += picked.len();
                write_extraction(&mut out.writer, ap, &picked).map_err(io_err(&a.out))?;
            }
            Ok(())
        })
    })?;
    out.commit()?;
    eprintln!("pairmine: {candidates} candidates, {extracted} extracted -> {}", a.out.display());
    m.output("extraction", &a.out);
    m.write(&a.out)?;
    Ok(())
}

fn run_sweep(a: SweepArgs) -> Result<()> {
    let r = resolve(&a.corpus, None, false)?;
    let rhos = match &a.rhos {
        Some(v) => v.clone(),
        None => match r.file.get("rhos") {
            Some(s) => s
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("invalid rho {x:?}"))))
                .collect::<Result<Vec<f64>>>()?,
            None => DEFAULT_RHOS.to_vec(),
        },
    };
    // validates range and order before any work is done
    sweep(&[], &rhos)?;
    let mut m = Manifest::new("sweep");
    record_extract_config(&mut m, &r);
    m.config("rhos", rhos.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    let mut totals: Vec<SweepRow> = rhos
        .iter()
        .map(|&rho| SweepRow { rho, threshold: 0, greedy: 0 })
        .collect();
    with_jobs(r.jobs, || {
        score_corpus(&a.corpus, &r.cfg, &mut m, |_, scores| {
            for (t, row) in totals.iter_mut().zip(sweep(scores, &rhos)?) {
                t.threshold += row.threshold;
                t.greedy += row.greedy;
            }
            Ok(())
        })
    })?;
    let mut out = AtomicFile::create(&a.out)?;
    write_sweep(&mut out.writer, &totals).map_err(io_err(&a.out))?;
    out.commit()?;
    let mut stdout = std::io::stdout().lock();
    let _ = write_sweep(&mut stdout, &totals);
    m.output("sweep", &a.out);
    m.write(&a.out)?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let extracted = read_alignments(open_input(&a.extracted)?, "extraction")?;
    let gold = GoldAlignment::read_tsv(open_input(&a.gold)?)?;
    let line = precision_recall(&extracted, &gold).line();
    println!("{line}");
    if let Some(out) = &a.out {
        write_atomic(out, format!("{line}\n").as_bytes())?;
        let mut m = Manifest::new("eval");
        m.input("extracted", &a.extracted);
        m.input("gold", &a.gold);
        m.output("metrics", out);
        m.write(out)?;
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        vocab_size: a.vocab_size,
        n_bootstrap: a.n_bootstrap,
        n_articles: a.n_articles,
        sents_per_article: a.min_sents..=a.max_sents,
        parallel_fraction: a.parallel_fraction,
        noise: a.noise,
        shuffle_window: a.window,
        seed: a.seed,
        ..SyntheticSpec::default()
    };
    let corpus = gen_synthetic(&spec)?;
    std::fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    let path = |name: &str| a.out_dir.join(name);
    let mut m = Manifest::new("synth");
    for (k, v) in [
        ("vocab_size", a.vocab_size.to_string()),
        ("n_bootstrap", a.n_bootstrap.to_string()),
        ("n_articles", a.n_articles.to_string()),
        ("sents_per_article", format!("{}..={}", a.min_sents, a.max_sents)),
        ("parallel_fraction", a.parallel_fraction.to_string()),
        ("noise", a.noise.to_string()),
        ("window", a.window.to_string()),
        ("seed", a.seed.to_string()),
    ] {
        m.config(k, v);
    }

    let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(io_err(&path(name)))?;
        write_atomic(&path(name), &buf)?;
        Ok(path(name))
    };
    let bootstrap = write("bootstrap.tsv", &|b| corpus.write_bootstrap(b))?;
    let src_text = write("src_text.txt", &|b| {
        corpus.bootstrap.sources().try_for_each(|s| writeln!(b, "{s}"))
    })?;
    let tgt_text = write("tgt_text.txt", &|b| {
        corpus.bootstrap.targets().try_for_each(|t| writeln!(b, "{t}"))
    })?;
    let (mut src_buf, mut tgt_buf) = (Vec::new(), Vec::new());
    corpus
        .write_articles(&mut src_buf, &mut tgt_buf)
        .map_err(io_err(&a.out_dir))?;
    write_atomic(&path("src_articles.tsv"), &src_buf)?;
    write_atomic(&path("tgt_articles.tsv"), &tgt_buf)?;
    let title_map = write("title_map.tsv", &|b| corpus.write_title_map(b))?;
    let gold = write("gold.tsv", &|b| corpus.gold.write_tsv(b))?;
    for (role, p) in [
        ("bootstrap", bootstrap),
        ("src_text", src_text),
        ("tgt_text", tgt_text),
        ("src_articles", path("src_articles.tsv")),
        ("tgt_articles", path("tgt_articles.tsv")),
        ("title_map", title_map),
        ("gold", gold),
    ] {
        m.output(role, &p);
    }
    eprintln!(
        "pairmine: {} bootstrap pairs, {} article pairs, {} gold alignments -> {}",
        corpus.bootstrap.pairs.len(),
        corpus.articles.len(),
        corpus.gold.len(),
        a.out_dir.display()
    );
    m.write(&path("synth"))?;
    Ok(())
}
