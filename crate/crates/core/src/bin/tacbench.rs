use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tacbench::classifiers::{self, Expectation, MvcScope, RandomGuesser, TieDraw, TieRule};
use tacbench::clustering;
use tacbench::dataset::{self, Dataset, LoadOptions};
use tacbench::features::{self, AttributeSet, FeatureMatrix, Provenance};
use tacbench::games::{self, Cents, GameSpec};
use tacbench::harness::{self, ExperimentConfig, ResultTable};
use tacbench::metrics::SummaryMeasure;
use tacbench::rng;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (schema 1)");

#[derive(Parser)]
#[command(name = "tacbench", version = VERSION, about = "Predict one-shot game actions from personality attributes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a dataset, then write canonical copies of its files.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Aggregate crowd judgments into an attribute matrix and a worker report.
    Aggregate {
        /// Judgments CSV (`worker_id,text_id,attribute,score,is_test,lo,hi`).
        #[arg(long)]
        judgments: PathBuf,
        /// Minimum fraction of test questions a worker must pass.
        #[arg(long, default_value_t = 0.7)]
        threshold: f64,
        /// Estimates wanted per cell; cells below it are reported.
        #[arg(long, default_value_t = 8)]
        required: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Population and per-game action statistics as JSON.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Build the Ward dendrogram of one feature set.
    Cluster {
        #[command(flatten)]
        data: DataArgs,
        /// Feature set to cluster.
        #[arg(long, default_value = harness::OURS)]
        feature_set: String,
        /// Also write the partition into this many clusters.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the repeated-split evaluation and write report tables.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Experiment configuration (JSON); flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Number of repetitions.
        #[arg(long)]
        repetitions: Option<usize>,
        /// Break TAC ties among the tied labels only.
        #[arg(long)]
        tie_over_tied_labels: bool,
        /// Draw one random label per tied cluster instead of per member.
        #[arg(long)]
        tie_per_cluster: bool,
        /// Population the majority vote is taken over.
        #[arg(long, value_enum)]
        mvc_scope: Option<ScopeArg>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Expected scores of the random-guess baselines.
    Baselines {
        /// Game whose actions the proportions refer to.
        #[arg(long)]
        game: String,
        /// Class counts or proportions, comma separated, in action order.
        #[arg(long, value_delimiter = ',', required = true)]
        props: Vec<f64>,
        /// JSON game definitions (defaults to the built-in games).
        #[arg(long)]
        games_file: Option<PathBuf>,
        /// Estimate by simulation with this many trials instead of the plug-in formula.
        #[arg(long)]
        trials: Option<usize>,
        /// Simulated test-set size.
        #[arg(long, default_value_t = 27)]
        test_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Randomly pair participants, total their points and convert to money.
    Match {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Payment for the lowest total, in dollars.
        #[arg(long, default_value_t = 10.5)]
        base: f64,
        /// Payment for the highest total, in dollars.
        #[arg(long, default_value_t = 15.0)]
        cap: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Re-render report tables from a saved results.csv.
    Report {
        /// Long-format results file written by `evaluate`.
        #[arg(long)]
        results: PathBuf,
        /// JSON game definitions (defaults to the built-in games).
        #[arg(long)]
        games_file: Option<PathBuf>,
        #[arg(long, default_value = "mav-f1")]
        selection_metric: SummaryMeasure,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Whole,
    Train,
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding participants.csv and optionally attributes.csv.
    #[arg(long, default_value = ".")]
    data: PathBuf,
    /// Participants CSV (default: <data>/participants.csv).
    #[arg(long)]
    participants: Option<PathBuf>,
    /// Attributes CSV (default: <data>/attributes.csv when present).
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// JSON game definitions (defaults to the built-in games).
    #[arg(long)]
    games_file: Option<PathBuf>,
    /// Attribute values are on the raw 0-5 scale.
    #[arg(long)]
    raw_scale: bool,
    /// Extra feature set, as NAME=PATH to a CSV with an id column.
    #[arg(long = "features", value_name = "NAME=PATH")]
    features: Vec<String>,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, env = "TB_OUT_DIR", default_value = "out")]
    out: PathBuf,
}

impl DataArgs {
    fn games(&self) -> Result<Vec<GameSpec>> {
        load_game_specs(self.games_file.as_deref())
    }

    fn load(&self) -> Result<Dataset> {
        let games = self.games()?;
        let participants = self.participants.clone().unwrap_or_else(|| self.data.join("participants.csv"));
        let attributes = match &self.attributes {
            Some(p) => Some(p.clone()),
            None => Some(self.data.join("attributes.csv")).filter(|p| p.exists()),
        };
        let ds = dataset::load_dataset(
            &participants,
            attributes.as_deref(),
            &games,
            &LoadOptions {
                raw_scale: self.raw_scale,
            },
        )
        .with_context(|| format!("loading {}", participants.display()))?;
        Ok(ds)
    }

    fn extra_features(&self) -> Result<BTreeMap<String, PathBuf>> {
        self.features
            .iter()
            .map(|spec| {
                let (name, path) = spec
                    .split_once('=')
                    .ok_or_else(|| anyhow!("--features expects NAME=PATH, got `{spec}`"))?;
                Ok((name.to_string(), PathBuf::from(path)))
            })
            .collect()
    }
}

fn load_game_specs(path: Option<&Path>) -> Result<Vec<GameSpec>> {
    match path {
        Some(p) => games::load_games(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(games::default_games()),
    }
}

/// Resolves feature-set names: the dataset attributes, `tfidf` over the
/// participant texts, `--features` files, and `a+b` concatenations.
fn resolve_features(
    ds: &Dataset,
    names: &[String],
    extra: &BTreeMap<String, PathBuf>,
) -> Result<BTreeMap<String, FeatureMatrix>> {
    let ids = ds.ids();
    let mut cache: BTreeMap<String, FeatureMatrix> = BTreeMap::new();
    fn base(
        name: &str,
        ds: &Dataset,
        ids: &[String],
        extra: &BTreeMap<String, PathBuf>,
    ) -> Result<FeatureMatrix> {
        if let Some(path) = extra.get(name) {
            let fm = FeatureMatrix::read_csv_path(path, Provenance::External, false)
                .with_context(|| format!("loading feature set `{name}` from {}", path.display()))?;
            return Ok(fm.aligned_to(ids)?);
        }
        match name {
            harness::OURS => ds
                .attributes
                .clone()
                .ok_or_else(|| anyhow!("feature set `{name}` needs an attributes file")),
            "tfidf" => {
                let texts = ds.read_texts()?;
                Ok(features::tfidf(ids, &texts)?.0)
            }
            _ => bail!("missing feature set `{name}`"),
        }
    }
    let mut out = BTreeMap::new();
    for name in names {
        let mut parts = name.split('+');
        let first = parts.next().unwrap_or_default();
        let mut fm = match cache.get(first) {
            Some(fm) => fm.clone(),
            None => base(first, ds, &ids, extra)?,
        };
        cache.entry(first.to_string()).or_insert_with(|| fm.clone());
        for part in parts {
            let next = match cache.get(part) {
                Some(fm) => fm.clone(),
                None => base(part, ds, &ids, extra)?,
            };
            cache.entry(part.to_string()).or_insert_with(|| next.clone());
            fm = features::select_attributes(&fm, Some(&next), AttributeSet::Combined)?;
        }
        out.insert(name.clone(), fm);
    }
    Ok(out)
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create_file(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("writing {}", path.display()))
}

fn write_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { data, out } => {
            let ds = data.load()?;
            create_out(&out.out)?;
            ds.write_participants_csv(create_file(&out.out.join("participants.csv"))?)?;
            if let Some(attrs) = &ds.attributes {
                attrs.write_csv(create_file(&out.out.join("attributes.csv"))?)?;
            }
            std::fs::write(out.out.join("games.json"), games::games_to_json(&ds.games))?;
            println!("{} participants, {} games validated", ds.n(), ds.games.len());
        }
        Command::Aggregate {
            judgments,
            threshold,
            required,
            out,
        } => {
            let file = File::open(&judgments).with_context(|| format!("opening {}", judgments.display()))?;
            let js = dataset::read_judgments(file)?;
            let agg = dataset::aggregate_judgments(&js, threshold, required, None)?;
            create_out(&out.out)?;
            agg.matrix.write_csv(create_file(&out.out.join("attributes.csv"))?)?;
            let mut w = csv::Writer::from_writer(create_file(&out.out.join("workers.csv"))?);
            w.write_record(["worker_id", "test_questions", "test_passed", "success_rate", "passed"])?;
            for s in &agg.workers {
                w.write_record([
                    s.worker_id.clone(),
                    s.test_questions.to_string(),
                    s.test_passed.to_string(),
                    format!("{:.6}", s.success_rate),
                    s.passed.to_string(),
                ])?;
            }
            w.flush()?;
            println!(
                "{} texts, {} workers ({:.1}% excluded), {} cells below {required} estimates",
                agg.matrix.n(),
                agg.workers.len(),
                100.0 * agg.excluded_fraction(),
                agg.short_cells.len()
            );
        }
        Command::Stats { data, out } => {
            let ds = data.load()?;
            let json = dataset::summarize(&ds).to_json();
            create_out(&out.out)?;
            std::fs::write(out.out.join("summary.json"), format!("{json}\n"))?;
            write_stdout(&format!("{json}\n"))?;
        }
        Command::Cluster {
            data,
            feature_set,
            k,
            out,
        } => {
            let ds = data.load()?;
            let fm = resolve_features(&ds, std::slice::from_ref(&feature_set), &data.extra_features()?)?
                .remove(&feature_set)
                .expect("resolved");
            let den = clustering::ward_linkage(&fm)?;
            create_out(&out.out)?;
            den.write_csv(create_file(&out.out.join(format!("dendrogram_{feature_set}.csv")))?)?;
            if let Some(k) = k {
                let a = den.cut(k)?;
                let mut w = csv::Writer::from_writer(create_file(
                    &out.out.join(format!("clusters_{feature_set}_k{k}.csv")),
                )?);
                w.write_record(["id", "cluster"])?;
                for (id, c) in fm.rows().iter().zip(a.labels()) {
                    w.write_record([id.clone(), c.to_string()])?;
                }
                w.flush()?;
            }
            println!("{} {}", feature_set, den.fingerprint());
        }
        Command::Evaluate {
            data,
            config,
            seed,
            threads,
            repetitions,
            tie_over_tied_labels,
            tie_per_cluster,
            mvc_scope,
            out,
        } => {
            let mut cfg = match &config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<ExperimentConfig>(&text)
                        .with_context(|| format!("parsing {}", p.display()))?
                }
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            if tie_over_tied_labels {
                cfg.tac.tie_rule = TieRule::TiedLabels;
            }
            if tie_per_cluster {
                cfg.tac.tie_draw = TieDraw::PerCluster;
            }
            match mvc_scope {
                Some(ScopeArg::Whole) => cfg.mvc_scope = MvcScope::WholeData,
                Some(ScopeArg::Train) => cfg.mvc_scope = MvcScope::TrainOnly,
                None => {}
            }
            cfg.validate()?;
            let ds = data.load()?;
            let needs_features = cfg
                .classifiers
                .iter()
                .any(|c| matches!(c, harness::ClassifierKind::Tac | harness::ClassifierKind::Knn));
            let feats = if needs_features {
                resolve_features(&ds, &cfg.feature_sets, &data.extra_features()?)?
            } else {
                BTreeMap::new()
            };
            let (table, stats) = harness::run_experiment_with(&cfg, &ds, &feats, threads)?;
            let files = harness::emit_reports(&table, &out.out, cfg.selection_metric)?;
            harness::write_manifest(&out.out, &cfg, &stats, &files)?;
            println!("{} cells written to {}", table.cells.len(), out.out.display());
        }
        Command::Baselines {
            game,
            props,
            games_file,
            trials,
            test_size,
            seed,
        } => {
            let specs = load_game_specs(games_file.as_deref())?;
            let spec = specs
                .iter()
                .find(|g| g.name.eq_ignore_ascii_case(&game))
                .ok_or_else(|| anyhow!("unknown game `{game}`"))?;
            if props.len() != spec.num_actions() {
                bail!("{} has {} actions but {} proportions were given", spec.name, spec.num_actions(), props.len());
            }
            let total: f64 = props.iter().sum();
            if total.is_nan() || total <= 0.0 || props.iter().any(|p| p.is_nan() || *p < 0.0) {
                bail!("proportions must be nonnegative with a positive sum");
            }
            let props: Vec<f64> = props.iter().map(|p| p / total).collect();
            let method = match trials {
                Some(trials) => Expectation::MonteCarlo { trials, test_size, seed },
                None => Expectation::PlugIn,
            };
            let mut table = String::from("guesser,metric,value\n");
            for guesser in [RandomGuesser::Erg, RandomGuesser::Ewg] {
                let t = classifiers::expected_random_table(&props, guesser, method)?;
                let name = guesser.name();
                for (a, c) in spec.actions.iter().zip(&t.per_class) {
                    table += &format!("{name},f1:{a},{:.2}\n", c.f1);
                }
                table += &format!("{name},accuracy,{:.2}\n", t.accuracy);
                table += &format!("{name},mav-f1,{:.2}\n", t.mav_f1);
                table += &format!("{name},mwav-f1,{:.2}\n", t.mwav_f1);
            }
            write_stdout(&table)?;
        }
        Command::Match {
            data,
            seed,
            base,
            cap,
            out,
        } => {
            let ds = data.load()?;
            let choices: Vec<Vec<usize>> = (0..ds.games.len()).map(|g| ds.labels(g)).collect();
            let mut stream = rng::stream(seed, &[rng::tag("match")]);
            let m = games::random_match(&ds.games, &choices, ds.n(), &mut stream);
            let pay = games::compensation(&m.totals, Cents::from_dollars(base), Cents::from_dollars(cap));
            let ids = ds.ids();
            let mut partner = vec![0; ds.n()];
            for &(a, b) in &m.pairs {
                partner[a] = b;
                partner[b] = a;
            }
            create_out(&out.out)?;
            let mut w = csv::Writer::from_writer(create_file(&out.out.join("match.csv"))?);
            w.write_record(["id", "partner", "points", "payment"])?;
            for i in 0..ds.n() {
                w.write_record([
                    ids[i].clone(),
                    ids[partner[i]].clone(),
                    m.totals[i].to_string(),
                    pay[i].to_string(),
                ])?;
            }
            w.flush()?;
            let mean = pay.iter().map(|c| c.dollars()).sum::<f64>() / pay.len().max(1) as f64;
            println!("{} pairs, mean payment {mean:.2}", m.pairs.len());
        }
        Command::Report {
            results,
            games_file,
            selection_metric,
            out,
        } => {
            let specs = load_game_specs(games_file.as_deref())?;
            let text = std::fs::read(&results).with_context(|| format!("reading {}", results.display()))?;
            let mentioned: std::collections::BTreeSet<String> = csv::Reader::from_reader(&text[..])
                .records()
                .filter_map(|r| r.ok().and_then(|r| r.get(2).map(str::to_string)))
                .collect();
            let games = specs
                .iter()
                .filter(|g| mentioned.contains(&g.name))
                .map(|g| (g.name.clone(), g.actions.clone()))
                .collect();
            let table = ResultTable::read_csv(&text[..], games)?;
            harness::emit_reports(&table, &out.out, selection_metric)?;
            println!("reports written to {}", out.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
