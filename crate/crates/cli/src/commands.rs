//! Subcommand implementations.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use skillweak::candidates::ngram_spans;
use skillweak::corpus::{parse_conll, pos_sequence_string, simplify_labels, DatasetStats};
use skillweak::embeddings::{compute_idf, EmbeddingStore, HashEmbedder, RepMethod, SkillRepTable};
use skillweak::evaluation::format_table;
use skillweak::matcher::{zero_norm_warnings, SweepRow};
use skillweak::methods::build_table;
use skillweak::taxonomy::{compute_stats, load_skills, top_k};
use skillweak::{
    evaluate_loose, evaluate_strict, CandidateEncoding, Dataset, EvalReport, Matcher, MethodInputs,
    MethodRegistry, Predictions, SkillInventory,
};

use crate::config::{EvalSplit, RunConfig};
use crate::output::{Manifest, OutDir};
use crate::stage::{fail, AtStage, Stage, StageResult};

const BASELINES: [&str; 3] = ["exact", "lemma", "pos"];
const TOP: usize = 20;

pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a OutDir,
    pub manifest: &'a mut Manifest,
    pub registry: &'a MethodRegistry,
}

struct Splits {
    train: Option<Dataset>,
    dev: Option<Dataset>,
    test: Option<Dataset>,
}

impl Splits {
    fn get(&self, s: EvalSplit) -> Option<&Dataset> {
        match s {
            EvalSplit::Train => self.train.as_ref(),
            EvalSplit::Dev => self.dev.as_ref(),
            EvalSplit::Test => self.test.as_ref(),
        }
    }

    fn all(&self) -> Vec<&Dataset> {
        [&self.train, &self.dev, &self.test]
            .into_iter()
            .flatten()
            .collect()
    }

    /// Non-test splits other than the evaluation split.
    fn reference(&self, eval: EvalSplit) -> Vec<&Dataset> {
        let mut r = Vec::new();
        if eval != EvalSplit::Train {
            r.extend(self.train.as_ref());
        }
        if eval != EvalSplit::Dev {
            r.extend(self.dev.as_ref());
        }
        r
    }
}

#[derive(Serialize)]
struct Report<'a> {
    method: &'a str,
    split: String,
    sentences: usize,
    predicted_spans: usize,
    strict: EvalReport,
    loose: EvalReport,
}

#[derive(Serialize)]
struct RowSummary<'a> {
    skill_id: &'a str,
    phrase: &'a str,
    contexts: usize,
    occurrences: usize,
    fallback: bool,
}

fn rep_method(name: &str) -> Option<RepMethod> {
    name.parse().ok()
}

impl Run<'_> {
    fn load_inventory(&mut self) -> StageResult<SkillInventory> {
        let Some(path) = &self.cfg.skills else {
            return fail(Stage::Config, "no skill file configured (skills / --skills)");
        };
        let inv = load_skills(path).at(Stage::Load)?;
        self.manifest.input("skills", path).at(Stage::Load)?;
        self.manifest.note("skill_duplicates_dropped", inv.duplicates);
        self.manifest.note("skill_rows_skipped", inv.skipped);
        self.manifest.note("skill_entries", inv.len());
        Ok(inv)
    }

    fn load_splits(&mut self) -> StageResult<Splits> {
        let mut load = |name: EvalSplit| -> StageResult<Option<Dataset>> {
            let Some(path) = self.cfg.split_path(name) else {
                return Ok(None);
            };
            let mut d = parse_conll(path).at(Stage::Load)?;
            d.split = name.into();
            self.manifest.input(&name.to_string(), path).at(Stage::Load)?;
            if d.repaired_labels > 0 {
                self.manifest
                    .note(&format!("{name}_orphan_inside_tags_repaired"), d.repaired_labels);
            }
            if self.cfg.simplify_labels {
                let repaired = d.repaired_labels;
                d = simplify_labels(&d);
                d.repaired_labels = repaired;
            }
            Ok(Some(d))
        };
        let splits = Splits {
            train: load(EvalSplit::Train)?,
            dev: load(EvalSplit::Dev)?,
            test: load(EvalSplit::Test)?,
        };
        self.manifest.note("labels_simplified", self.cfg.simplify_labels);
        Ok(splits)
    }

    fn eval_split<'s>(&self, splits: &'s Splits) -> StageResult<&'s Dataset> {
        let s = self.cfg.eval_split;
        match splits.get(s) {
            Some(d) if !d.sentences.is_empty() => Ok(d),
            Some(_) => fail(Stage::Load, format!("{s} split has no sentences")),
            None => fail(Stage::Config, format!("evaluation split {s} has no file configured")),
        }
    }

    /// Phrase and contextual stores, from disk or from the hash provider.
    fn stores(
        &mut self,
        method: RepMethod,
        inv: &SkillInventory,
        splits: &Splits,
        eval: &Dataset,
    ) -> StageResult<(Option<EmbeddingStore>, Option<EmbeddingStore>)> {
        let encoding = self.cfg.candidate_encoding;
        let want_context = method != RepMethod::Iso || encoding == CandidateEncoding::Contextual;
        let hash = self.cfg.hash_embeddings.map(|h| (HashEmbedder::new(h.dim, self.cfg.seed), h.keying));

        let phrase = match (&self.cfg.phrase_store, hash) {
            (Some(dir), _) => {
                let s = EmbeddingStore::read(dir).at(Stage::Embeddings)?;
                self.manifest.input("phrase_store", dir).at(Stage::Embeddings)?;
                Some(s)
            }
            (None, Some((h, _))) => {
                let mut phrases: Vec<String> = inv.entries.iter().map(|e| e.phrase()).collect();
                if encoding == CandidateEncoding::Isolated {
                    let mut seen: HashSet<String> = phrases.iter().cloned().collect();
                    for s in &eval.sentences {
                        let forms = s.lower_forms();
                        for c in ngram_spans(s.len(), self.cfg.n_max) {
                            let p = forms[c.start..c.end].join(" ");
                            if seen.insert(p.clone()) {
                                phrases.push(p);
                            }
                        }
                    }
                }
                Some(h.phrase_store_for(phrases).at(Stage::Embeddings)?)
            }
            (None, None) => None,
        };
        let context = if !want_context {
            None
        } else {
            match (&self.cfg.context_store, hash) {
                (Some(dir), _) => {
                    let s = EmbeddingStore::read(dir).at(Stage::Embeddings)?;
                    self.manifest.input("context_store", dir).at(Stage::Embeddings)?;
                    Some(s)
                }
                (None, Some((h, keying))) => {
                    Some(h.contextual_store(&splits.all(), keying.into()).at(Stage::Embeddings)?)
                }
                (None, None) => None,
            }
        };
        if let Some(s) = &phrase {
            s.validate().at(Stage::Embeddings)?;
        }
        if let Some(s) = &context {
            s.validate().at(Stage::Embeddings)?;
            if let Some(missing) = eval.sentences.iter().find(|x| !s.covers(x)) {
                return fail(
                    Stage::Embeddings,
                    format!("contextual store does not cover sentence {:?}", missing.id),
                );
            }
        }
        self.manifest.store_model = context.as_ref().or(phrase.as_ref()).map(|s| s.model().to_string());
        Ok((phrase, context))
    }

    fn write_report(&mut self, method: &str, eval: &Dataset, preds: &Predictions) -> StageResult<()> {
        let strict = evaluate_strict(preds, eval).at(Stage::Evaluate)?;
        let loose = evaluate_loose(preds, eval).at(Stage::Evaluate)?;
        let report = Report {
            method,
            split: self.cfg.eval_split.to_string(),
            sentences: eval.sentences.len(),
            predicted_spans: preds.span_count(),
            strict,
            loose,
        };
        self.out.json("report.json", &report).at(Stage::Output)?;
        println!("{method} on {} ({} sentences)", report.split, report.sentences);
        print!("{}", format_table(&[strict, loose]));
        Ok(())
    }

    fn note_table(&mut self, table: &SkillRepTable) {
        self.manifest.note("representation_rows", table.len());
        self.manifest.note("representation_fallback_rows", table.fallbacks());
        self.manifest.note("unrepresentable_skills", table.unrepresentable.len());
    }

    /// Runs the configured method on the evaluation split and scores it.
    pub fn run_method(&mut self) -> StageResult<()> {
        let method = self.cfg.method.clone();
        let inv = self.load_inventory()?;
        let splits = self.load_splits()?;
        let eval = self.eval_split(&splits)?;
        let reference = splits.reference(self.cfg.eval_split);
        let (phrase, context) = match rep_method(&method) {
            Some(m) => self.stores(m, &inv, &splits, eval)?,
            None => (None, None),
        };
        let inputs = MethodInputs {
            inventory: &inv,
            reference,
            phrase_store: phrase.as_ref(),
            context_store: context.as_ref(),
            match_config: self.cfg.match_config(),
            pos_max_len: self.cfg.pos_max_len,
            pos_top_k: self.cfg.pos_top_k,
        };
        let labeler = self.registry.build(&method, &inputs).at(Stage::Method)?;
        let preds = labeler.label(eval).at(Stage::Method)?;
        if let Some(table) = labeler.representation() {
            self.note_table(table);
            self.manifest.note("zero_norm_warnings", zero_norm_warnings());
        }
        preds.save(self.out.path("predictions.jsonl")).at(Stage::Output)?;
        self.write_report(&method, eval, &preds)
    }

    pub fn baseline(&mut self) -> StageResult<()> {
        if !BASELINES.contains(&self.cfg.method.as_str()) {
            return fail(
                Stage::Usage,
                format!("baseline method must be one of {}, got {:?}", BASELINES.join(", "), self.cfg.method),
            );
        }
        self.run_method()
    }

    fn embedding_method(&self) -> StageResult<RepMethod> {
        rep_method(&self.cfg.method).map_or_else(
            || {
                fail(
                    Stage::Usage,
                    format!("{:?} is not an embedding method (iso, aoc, wse)", self.cfg.method),
                )
            },
            Ok,
        )
    }

    pub fn represent(&mut self) -> StageResult<()> {
        let method = self.embedding_method()?;
        let inv = self.load_inventory()?;
        let splits = self.load_splits()?;
        let reference = splits.reference(self.cfg.eval_split);
        let probe = reference.first().copied().or_else(|| splits.get(self.cfg.eval_split));
        let Some(probe) = probe else {
            return fail(Stage::Config, "representations need at least one dataset split");
        };
        let (phrase, context) = self.stores(method, &inv, &splits, probe)?;
        let inputs = MethodInputs {
            inventory: &inv,
            reference,
            phrase_store: phrase.as_ref(),
            context_store: context.as_ref(),
            match_config: self.cfg.match_config(),
            pos_max_len: self.cfg.pos_max_len,
            pos_top_k: self.cfg.pos_top_k,
        };
        let table = build_table(method, &inputs).at(Stage::Method)?;
        self.note_table(&table);
        let model = self.manifest.store_model.clone().unwrap_or_default();
        let store = table.to_store(&model).at(Stage::Method)?;
        store.write(self.out.path("representation")).at(Stage::Output)?;
        let rows: Vec<RowSummary> = table
            .rows
            .iter()
            .map(|r| RowSummary {
                skill_id: &r.skill_id,
                phrase: &r.phrase,
                contexts: r.contexts,
                occurrences: r.occurrences,
                fallback: r.fallback,
            })
            .collect();
        let mut lines = String::new();
        for r in &rows {
            lines.push_str(&serde_json::to_string(r).at(Stage::Output)?);
            lines.push('\n');
        }
        self.out.text("representation_rows.jsonl", &lines).at(Stage::Output)?;
        self.out
            .json("unrepresentable.json", &table.unrepresentable)
            .at(Stage::Output)?;
        println!(
            "{method}: {} rows ({} fallback), {} unrepresentable",
            table.len(),
            table.fallbacks(),
            table.unrepresentable.len()
        );
        Ok(())
    }

    pub fn sweep(&mut self) -> StageResult<()> {
        let method = self.embedding_method()?;
        let inv = self.load_inventory()?;
        let splits = self.load_splits()?;
        let eval = self.eval_split(&splits)?;
        let (phrase, context) = self.stores(method, &inv, &splits, eval)?;
        let inputs = MethodInputs {
            inventory: &inv,
            reference: splits.reference(self.cfg.eval_split),
            phrase_store: phrase.as_ref(),
            context_store: context.as_ref(),
            match_config: self.cfg.match_config(),
            pos_max_len: self.cfg.pos_max_len,
            pos_top_k: self.cfg.pos_top_k,
        };
        let table = build_table(method, &inputs).at(Stage::Method)?;
        self.note_table(&table);
        let store = match self.cfg.candidate_encoding {
            CandidateEncoding::Contextual => context.as_ref(),
            CandidateEncoding::Isolated => phrase.as_ref(),
        };
        let Some(store) = store else {
            return fail(Stage::Embeddings, "no store for the configured candidate encoding");
        };
        let mut taus = self.cfg.taus.clone();
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        let matcher = Matcher::new(&table, store, self.cfg.match_config()).at(Stage::Method)?;
        let rows = matcher.sweep(eval, &taus, eval).at(Stage::Method)?;
        self.manifest.note("zero_norm_warnings", zero_norm_warnings());
        self.out.json("sweep.json", &rows).at(Stage::Output)?;
        self.out
            .csv(
                "sweep.csv",
                &[
                    "tau",
                    "predicted_spans",
                    "sentences_with_predictions",
                    "strict_precision",
                    "strict_recall",
                    "strict_f1",
                    "loose_precision",
                    "loose_recall",
                    "loose_f1",
                ],
                rows.iter().map(sweep_csv_row),
            )
            .at(Stage::Output)?;
        println!("{:>5} {:>8} {:>9} {:>9}", "tau", "spans", "strictF1", "looseF1");
        for r in &rows {
            println!(
                "{:>5.2} {:>8} {:>9.2} {:>9.2}",
                r.tau,
                r.predicted_spans,
                r.strict.f1 * 100.0,
                r.loose.f1 * 100.0
            );
        }
        Ok(())
    }

    pub fn idf(&mut self) -> StageResult<()> {
        let splits = self.load_splits()?;
        let reference = splits.reference(EvalSplit::Test);
        if reference.is_empty() {
            return fail(Stage::Config, "idf needs a train or dev split");
        }
        let idf = compute_idf(&reference).at(Stage::Method)?;
        let rows = idf.sorted();
        self.out
            .csv(
                "idf.csv",
                &["token", "count", "idf"],
                rows.iter().map(|(t, n, v)| [t.to_string(), n.to_string(), v.to_string()]),
            )
            .at(Stage::Output)?;
        #[derive(Serialize)]
        struct Summary {
            total_tokens: u64,
            distinct_tokens: usize,
            unseen_idf: f64,
        }
        self.out
            .json(
                "idf.json",
                &Summary {
                    total_tokens: idf.total(),
                    distinct_tokens: rows.len(),
                    unseen_idf: idf.lookup("\u{0}").value,
                },
            )
            .at(Stage::Output)?;
        println!("idf over {} tokens, {} distinct", idf.total(), rows.len());
        Ok(())
    }

    pub fn eval(&mut self) -> StageResult<()> {
        let Some(path) = self.cfg.predictions.clone() else {
            return fail(Stage::Config, "no predictions file configured (predictions / --predictions)");
        };
        let splits = self.load_splits()?;
        let eval = self.eval_split(&splits)?;
        let preds = Predictions::load(&path).at(Stage::Load)?;
        self.manifest.input("predictions", &path).at(Stage::Load)?;
        let method = preds.method.clone();
        self.write_report(&method, eval, &preds)
    }

    pub fn stats(&mut self) -> StageResult<()> {
        if self.cfg.skills.is_none() && self.cfg.split_path(EvalSplit::Test).is_none()
            && self.cfg.train.is_none() && self.cfg.dev.is_none()
        {
            return fail(Stage::Config, "stats needs a skill file or at least one dataset split");
        }
        #[derive(Serialize)]
        struct DatasetSummary {
            name: String,
            split: String,
            #[serde(flatten)]
            stats: DatasetStats,
            top_gold_pos_sequences: Option<Vec<(String, usize)>>,
        }
        #[derive(Serialize)]
        struct InventorySummary {
            entries: usize,
            duplicates_dropped: usize,
            rows_skipped: usize,
            length_mode: usize,
            length_median: usize,
            length_histogram: BTreeMap<usize, usize>,
            top_ngrams: BTreeMap<usize, Vec<(String, usize)>>,
            top_pos_sequences: Option<Vec<(String, usize)>>,
        }
        #[derive(Serialize)]
        struct Stats {
            inventory: Option<InventorySummary>,
            datasets: Vec<DatasetSummary>,
        }

        let mut inventory = None;
        if self.cfg.skills.is_some() {
            let inv = self.load_inventory()?;
            let with_pos = self.cfg.pos_stats.unwrap_or_else(|| inv.has_upos());
            let report = compute_stats(&inv, with_pos).at(Stage::Method)?;
            self.out
                .csv(
                    "length_histogram.csv",
                    &["length", "count"],
                    report
                        .length_histogram
                        .iter()
                        .map(|(l, c)| [l.to_string(), c.to_string()]),
                )
                .at(Stage::Output)?;
            for n in 1..=3 {
                let all = top_k(&report.ngram_freq[n - 1], usize::MAX);
                self.out
                    .csv(
                        &format!("ngrams_{n}.csv"),
                        &["ngram", "count"],
                        all.iter().map(|(g, c)| [g.join(" "), c.to_string()]),
                    )
                    .at(Stage::Output)?;
            }
            if let Some(freq) = &report.pos_seq_freq {
                let all = top_k(freq, usize::MAX);
                self.out
                    .csv(
                        "pos_sequences.csv",
                        &["sequence", "count"],
                        all.iter().map(|(s, c)| [pos_sequence_string(s), c.to_string()]),
                    )
                    .at(Stage::Output)?;
            }
            println!(
                "inventory: {} skills, length mode {}, median {}",
                report.entries,
                report.length_mode(),
                report.length_median()
            );
            inventory = Some(InventorySummary {
                entries: report.entries,
                duplicates_dropped: inv.duplicates,
                rows_skipped: inv.skipped,
                length_mode: report.length_mode(),
                length_median: report.length_median(),
                length_histogram: report.length_histogram.clone(),
                top_ngrams: (1..=3)
                    .map(|n| {
                        let top = report.top_ngrams(n, TOP);
                        (n, top.into_iter().map(|(g, c)| (g.join(" "), c)).collect())
                    })
                    .collect(),
                top_pos_sequences: report
                    .top_pos_sequences(TOP)
                    .map(|v| v.into_iter().map(|(s, c)| (pos_sequence_string(&s), c)).collect()),
            });
        }

        let splits = self.load_splits()?;
        let mut datasets = Vec::new();
        let mut stat_rows = Vec::new();
        let mut pos_rows = Vec::new();
        for (split, d) in [EvalSplit::Train, EvalSplit::Dev, EvalSplit::Test]
            .into_iter()
            .filter_map(|s| splits.get(s).map(|d| (s, d)))
        {
            if d.sentences.is_empty() {
                return fail(Stage::Load, format!("{split} split {} has no sentences", d.name));
            }
            let stats = d.stats();
            let pos = match self.cfg.pos_stats {
                Some(true) => Some(d.gold_pos_sequences().at(Stage::Method)?),
                Some(false) => None,
                None if d.has_upos() => Some(d.gold_pos_sequences().at(Stage::Method)?),
                None => None,
            };
            stat_rows.push([
                d.name.clone(),
                split.to_string(),
                stats.sentences.to_string(),
                stats.tokens.to_string(),
                stats.spans.to_string(),
                stats.avg_span_len.to_string(),
            ]);
            if let Some(freq) = &pos {
                for (s, c) in top_k(freq, usize::MAX) {
                    pos_rows.push([d.name.clone(), split.to_string(), pos_sequence_string(&s), c.to_string()]);
                }
            }
            println!(
                "{split}: {} sentences, {} tokens, {} spans, avg span length {:.2}",
                stats.sentences, stats.tokens, stats.spans, stats.avg_span_len
            );
            datasets.push(DatasetSummary {
                name: d.name.clone(),
                split: split.to_string(),
                stats,
                top_gold_pos_sequences: pos
                    .map(|f| top_k(&f, TOP).into_iter().map(|(s, c)| (pos_sequence_string(&s), c)).collect()),
            });
        }
        if !stat_rows.is_empty() {
            self.out
                .csv(
                    "dataset_stats.csv",
                    &["dataset", "split", "sentences", "tokens", "spans", "avg_span_len"],
                    stat_rows,
                )
                .at(Stage::Output)?;
        }
        if !pos_rows.is_empty() {
            self.out
                .csv("dataset_pos_sequences.csv", &["dataset", "split", "sequence", "count"], pos_rows)
                .at(Stage::Output)?;
        }
        self.out
            .json("stats.json", &Stats { inventory, datasets })
            .at(Stage::Output)
    }
}

fn sweep_csv_row(r: &SweepRow) -> [String; 9] {
    [
        r.tau.to_string(),
        r.predicted_spans.to_string(),
        r.sentences_with_predictions.to_string(),
        r.strict.precision.to_string(),
        r.strict.recall.to_string(),
        r.strict.f1.to_string(),
        r.loose.precision.to_string(),
        r.loose.recall.to_string(),
        r.loose.f1.to_string(),
    ]
}
