use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;

use super::artifacts::*;
use super::config::{AblationKind, BackendKind, CandidateSet, StubClassifier};
use super::manifest::{read_json, write_atomic, write_json};
use super::{random_baseline, Pipeline, PipelineError};
use crate::ablation_lab::{ablate_many, ablation_report, mean_head_output, AblationCase, AblationMode, AblationReport};
use crate::analytics::{compare_to_baseline, Histogram, ScoreDistribution};
use crate::explainer::{
    classify_all, generate_explanation, one_line, run_bounded, ChatBackend, ClassificationItem, ExplainError,
    ExplainerSettings, ExplanationRequest, HttpBackend, Recording, ReplayBackend, ScoreFormula,
    ScoreStatus, StubBackend, StubFallback, TranscriptEntry,
};
use crate::head_attribution::{activity_summary, attribute_heads, select_explainable, AttributionMatrix};
use crate::neuron_scout::{congruence_score_with, layer_histogram, scout_neurons, CandidateTokens, ScoutOptions};
use crate::prompt_miner::{read_corpus, scan_corpus, select_top, truncate_all, PromptRecord, Split};
use crate::transformer::{forward, ForwardOptions, HeadId, LogitCapture, NeuronHandle};

pub(super) const NEURONS: &str = "neurons.json";
pub(super) const EXPLANATIONS: &str = "explanations.json";
pub(super) const SCORES: &str = "scores.json";
pub(super) const ABLATION: &str = "ablation.json";
pub(super) const REPORT: &str = "report.json";

const SKEWNESS_CONVENTION: &str =
    "population Fisher-Pearson coefficient g1 = m3 / m2^1.5 (no small-sample correction)";
const ABLATION_BINS: usize = 20;

pub(super) fn formula_note(formula: ScoreFormula) -> String {
    match formula {
        ScoreFormula::Printed => "printed: 0.5 * (TP/(TP+FP) + TN/(TN+FN)), the mean of the positive and negative \
            predictive values; set explain.formula = \"rates\" for balanced accuracy"
            .into(),
        ScoreFormula::Rates => "rates: 0.5 * (TP/(TP+FN) + TN/(TN+FP)), balanced accuracy".into(),
    }
}

fn prompts_path(target: &Target) -> String {
    format!("prompts/{}.json", target.key())
}

fn attribution_path(target: &Target) -> String {
    format!("attribution/{}.json", target.key())
}

fn write_jsonl(path: &Path, entries: &[TranscriptEntry]) -> Result<(), PipelineError> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("transcript serializes"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn kept(records: &[PromptRecord]) -> impl Iterator<Item = &PromptRecord> {
    records.iter().filter(|r| !r.is_discarded())
}

/// One explanation or scoring unit: a head explained from a target's top
/// `count` prompts.
struct Job<'a> {
    count: usize,
    target: &'a Target,
    head: HeadId,
}

impl Pipeline {
    fn path(&self, rel: &str) -> std::path::PathBuf {
        self.run_dir.join(rel)
    }

    fn put<T: serde::Serialize>(&self, rel: &str, value: &T, written: &mut Vec<String>) -> Result<(), PipelineError> {
        write_json(&self.path(rel), value)?;
        written.push(rel.to_owned());
        Ok(())
    }

    fn put_text(&self, rel: &str, text: &str, written: &mut Vec<String>) -> Result<(), PipelineError> {
        write_atomic(&self.path(rel), text.as_bytes())?;
        written.push(rel.to_owned());
        Ok(())
    }

    fn neurons(&self) -> Result<NeuronsFile, PipelineError> {
        read_json(&self.path(NEURONS))
    }

    fn attributions(&self, targets: &[Target]) -> Result<Vec<AttributionFile>, PipelineError> {
        targets.iter().map(|t| read_json(&self.path(&attribution_path(t)))).collect()
    }

    fn settings_for_chat(&self) -> ExplainerSettings {
        let e = &self.config.explain;
        ExplainerSettings {
            model: e.model.clone(),
            max_examples: e.max_examples.unwrap_or_else(|| self.config.max_prompt_count()),
            max_in_flight: e.max_in_flight,
            ..ExplainerSettings::default()
        }
    }

    /// The shared remote backend, or `None` when the stub is in use.
    fn remote_backend(&self) -> Result<Option<Arc<dyn ChatBackend>>, PipelineError> {
        let e = &self.config.explain;
        Ok(match e.backend {
            BackendKind::Stub => None,
            BackendKind::Http => {
                let endpoint = e.endpoint.clone().expect("validated");
                let http = HttpBackend::from_env(endpoint, Duration::from_secs(e.timeout_secs))
                    .map_err(|err| PipelineError::Backend(err.to_string()))?;
                Some(Arc::new(http))
            }
            BackendKind::Replay => {
                let path = e.replay.as_ref().expect("validated");
                let replay = ReplayBackend::from_jsonl(path).map_err(|err| PipelineError::io(path, err))?;
                Some(Arc::new(replay))
            }
        })
    }

    pub(super) fn scout(&self) -> Result<Vec<String>, PipelineError> {
        let model = self.model()?;
        let tok = self.tokenizer()?;
        let s = &self.config.scout;
        if tok.vocab_size() > model.config.vocab_size {
            return Err(PipelineError::Config(format!(
                "tokenizer has {} tokens but the model only {}",
                tok.vocab_size(),
                model.config.vocab_size
            )));
        }
        let candidates = match s.candidates {
            CandidateSet::Words => CandidateTokens::words(tok),
            CandidateSet::All => CandidateTokens::all(tok.vocab_size()),
        };
        let options = ScoutOptions { metric: s.metric, runners_up: s.runners_up };
        let scouted = scout_neurons(model, tok, &s.layers, s.top_k_neurons, &candidates, options)?;
        let mut best: Vec<_> = scouted.iter().collect();
        best.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.handle.cmp(&b.handle)));
        if let Some(cap) = s.max_neurons {
            best.truncate(cap);
        }
        let mut targets: Vec<Target> = best
            .into_iter()
            .map(|n| Target {
                handle: n.handle,
                token_id: n.token_id,
                token_text: n.token_text.clone(),
                score: n.score,
                group: NeuronGroup::NextToken,
            })
            .collect();

        if self.config.baseline.enabled {
            let exclude: BTreeSet<NeuronHandle> = scouted.iter().map(|n| n.handle).collect();
            let picks = random_baseline(
                &model.config,
                self.config.baseline_layers(),
                self.config.baseline.per_layer,
                &exclude,
                self.config.seed,
            )?;
            for handle in picks {
                let (score, token_id) = congruence_score_with(model, handle, &candidates, s.metric)?;
                targets.push(Target {
                    handle,
                    token_id,
                    token_text: tok.token_text(token_id)?,
                    score,
                    group: NeuronGroup::RandomBaseline,
                });
            }
        }

        let mut written = Vec::new();
        if s.layer_histogram {
            let hist = layer_histogram(model, &candidates, s.metric)?;
            self.put_text("histograms/layer_histogram.csv", &hist.to_csv(), &mut written)?;
        }
        let file = NeuronsFile {
            metric: s.metric,
            candidates: s.candidates,
            candidate_count: candidates.len(),
            targets,
            scouted,
        };
        self.put(NEURONS, &file, &mut written)?;
        Ok(written)
    }

    pub(super) fn mine(&self) -> Result<Vec<String>, PipelineError> {
        let model = self.model()?;
        let tok = self.tokenizer()?;
        let targets = self.neurons()?.targets;
        let m = &self.config.mine;
        let options = m.options();
        let corpus = read_corpus(&self.config.corpus.path, self.config.corpus.max_documents)?;
        let handles: BTreeSet<NeuronHandle> = targets.iter().map(|t| t.handle).collect();
        tracing::info!(documents = corpus.len(), neurons = handles.len(), "scanning corpus");
        let scanned = scan_corpus(model, tok, &handles, &corpus, &options)?;

        let n_mine = self.config.max_prompt_count();
        let mut selected = Vec::with_capacity(targets.len());
        for t in &targets {
            let mine = select_top(tok, &scanned, t.handle, n_mine, Some(Split::Mine))?;
            let test = select_top(tok, &scanned, t.handle, m.n_test_prompts, Some(Split::Test))?;
            selected.push((mine, test));
        }
        let flat: Vec<PromptRecord> = selected.iter().flat_map(|(a, b)| a.iter().chain(b)).cloned().collect();
        tracing::info!(prompts = flat.len(), "truncating prompts");
        let mut truncated = truncate_all(model, tok, &flat, &options)?.into_iter();

        let mut written = Vec::new();
        for (t, (mine, test)) in targets.iter().zip(&selected) {
            let file = PromptsFile {
                target: t.clone(),
                mine: truncated.by_ref().take(mine.len()).collect(),
                test: truncated.by_ref().take(test.len()).collect(),
            };
            self.put(&prompts_path(t), &file, &mut written)?;
        }
        Ok(written)
    }

    fn attribute_prompts(&self, neuron: NeuronHandle, records: &[PromptRecord]) -> Result<Vec<AttributionMatrix>, PipelineError> {
        let model = self.model()?;
        let sigma = self.config.attribute.sigma;
        let opts = ForwardOptions {
            capture_heads: true,
            capture_logits: LogitCapture::None,
            stop_after_layer: Some(neuron.layer),
            ..ForwardOptions::default()
        };
        let kept: Vec<&PromptRecord> = kept(records).collect();
        kept.par_iter()
            .map(|r| {
                let trace = forward(model, r.prompt_ids(), &opts)?;
                Ok(attribute_heads(&trace, neuron, r.prompt_peak_position(), model, &r.doc_id, sigma)?)
            })
            .collect()
    }

    pub(super) fn attribute(&self) -> Result<Vec<String>, PipelineError> {
        let targets = self.neurons()?.targets;
        let [low, high] = self.config.attribute.band;
        let mut written = Vec::new();
        for t in &targets {
            let prompts: PromptsFile = read_json(&self.path(&prompts_path(t)))?;
            let mine = self.attribute_prompts(t.handle, &prompts.mine)?;
            let test = self.attribute_prompts(t.handle, &prompts.test)?;
            let mut selections = Vec::new();
            for count in self.config.prompt_counts() {
                let ids: BTreeSet<&str> = kept(&prompts.mine[..count.min(prompts.mine.len())])
                    .map(|r| r.doc_id.as_str())
                    .collect();
                let used: Vec<AttributionMatrix> =
                    mine.iter().filter(|m| ids.contains(m.prompt_id.as_str())).cloned().collect();
                let summaries = if used.is_empty() { Vec::new() } else { activity_summary(&used)? };
                let explainable = select_explainable(&summaries, low, high)?.into_iter().map(|s| s.head).collect();
                selections.push(CountSelection { count, prompts_used: used.len(), summaries, explainable });
            }
            let file = AttributionFile {
                target: t.clone(),
                sigma: self.config.attribute.sigma,
                band: self.config.attribute.band,
                mine,
                test,
                selections,
            };
            self.put(&attribution_path(t), &file, &mut written)?;
        }
        Ok(written)
    }

    pub(super) fn explain(&self) -> Result<Vec<String>, PipelineError> {
        let targets = self.neurons()?.targets;
        let attributions = self.attributions(&targets)?;
        let prompts: Vec<PromptsFile> =
            targets.iter().map(|t| read_json(&self.path(&prompts_path(t)))).collect::<Result<_, _>>()?;
        let settings = self.settings_for_chat();
        let remote = self.remote_backend()?;

        let mut jobs = Vec::new();
        for count in self.config.prompt_counts() {
            for (t, a) in targets.iter().zip(&attributions) {
                let sel = a.selections.iter().find(|s| s.count == count).expect("every count selected");
                jobs.extend(sel.explainable.iter().map(|&head| (Job { count, target: t, head }, a, sel)));
            }
        }
        let texts: BTreeMap<NeuronHandle, BTreeMap<&str, &str>> = prompts
            .iter()
            .map(|p| (p.target.handle, p.mine.iter().map(|r| (r.doc_id.as_str(), r.prompt_text())).collect()))
            .collect();

        let results = run_bounded(&jobs, settings.max_in_flight, |(job, attribution, sel)| {
            let summary = sel.summaries.iter().find(|s| s.head == job.head).expect("explainable heads are summarised");
            let text = &texts[&job.target.handle];
            let (mut active, mut inactive) = (Vec::new(), Vec::new());
            for m in &attribution.mine {
                let Some(&is_active) = summary.per_prompt_active.get(&m.prompt_id) else { continue };
                let p = text[m.prompt_id.as_str()].to_owned();
                if is_active {
                    active.push(p);
                } else {
                    inactive.push(p);
                }
            }
            let request = ExplanationRequest { token_text: job.target.token_text.clone(), active_prompts: active, inactive_prompts: inactive };
            let inner: Arc<dyn ChatBackend> = match &remote {
                Some(b) => b.clone(),
                None => Arc::new(StubBackend::new(
                    self.config.explain.stub.explanation.replace("{token}", &job.target.token_text),
                    StubFallback::Reply("No".into()),
                )),
            };
            let recorder = Recording::new(inner);
            let outcome = generate_explanation(&recorder, job.target.handle, job.head, &request, &settings);
            let (explanation, error) = match outcome {
                Ok(e) => (Some(e), None),
                Err(e @ ExplainError::BackendUnavailable { .. }) => return Err(PipelineError::Explain(e)),
                Err(e) => (None, Some(e.to_string())),
            };
            let entry = ExplanationEntry {
                count: job.count,
                group: job.target.group,
                neuron: job.target.handle,
                token_text: job.target.token_text.clone(),
                head: job.head,
                active_fraction: summary.active_fraction,
                active_prompts: request.active_prompts,
                inactive_prompts: request.inactive_prompts,
                explanation,
                error,
            };
            Ok((entry, recorder.take_transcript()))
        })?;

        let mut transcript = Vec::new();
        let mut entries = Vec::new();
        for (entry, log) in results {
            entries.push(entry);
            transcript.extend(log);
        }
        let file = ExplanationsFile {
            backend: format!("{:?}", self.config.explain.backend).to_lowercase(),
            model: settings.model.clone(),
            entries,
        };
        let mut written = Vec::new();
        self.put(EXPLANATIONS, &file, &mut written)?;
        write_jsonl(&self.path("transcripts/explain.jsonl"), &transcript)?;
        written.push("transcripts/explain.jsonl".into());
        Ok(written)
    }

    fn stub_classifier(&self, explanation: &str, items: &[ClassificationItem]) -> StubBackend {
        let stub = &self.config.explain.stub;
        match stub.classifier {
            StubClassifier::Echo => {
                let lines: Vec<(String, bool)> = items.iter().map(|i| (one_line(&i.text), i.ground_truth_active)).collect();
                StubBackend::ground_truth_echo(
                    explanation,
                    lines.iter().filter(|l| l.1).map(|l| l.0.as_str()),
                    lines.iter().filter(|l| !l.1).map(|l| l.0.as_str()),
                )
            }
            StubClassifier::Coin => StubBackend::new(explanation, StubFallback::Coin { seed: self.config.seed }),
            StubClassifier::Yes => StubBackend::new(explanation, StubFallback::Reply("Yes".into())),
            StubClassifier::No => StubBackend::new(explanation, StubFallback::Reply("No".into())),
        }
    }

    pub(super) fn score(&self) -> Result<Vec<String>, PipelineError> {
        let targets = self.neurons()?.targets;
        let attributions = self.attributions(&targets)?;
        let explanations: ExplanationsFile = read_json(&self.path(EXPLANATIONS))?;
        let settings = self.settings_for_chat();
        let remote = self.remote_backend()?;
        let formula = self.config.explain.formula;

        let mut items: BTreeMap<NeuronHandle, (Vec<ClassificationItem>, &AttributionFile)> = BTreeMap::new();
        for (t, a) in targets.iter().zip(&attributions) {
            let prompts: PromptsFile = read_json(&self.path(&prompts_path(t)))?;
            let text: BTreeMap<&str, &str> = prompts.test.iter().map(|r| (r.doc_id.as_str(), r.prompt_text())).collect();
            let list = a
                .test
                .iter()
                .map(|m| ClassificationItem { prompt_id: m.prompt_id.clone(), text: text[m.prompt_id.as_str()].to_owned(), ground_truth_active: false })
                .collect();
            items.insert(t.handle, (list, a));
        }

        let mut entries = Vec::new();
        let mut transcript = Vec::new();
        for e in &explanations.entries {
            let mut entry = ScoreEntry {
                count: e.count,
                group: e.group,
                neuron: e.neuron,
                token_text: e.token_text.clone(),
                head: e.head,
                score: None,
                outcomes: Vec::new(),
                error: e.error.clone(),
            };
            let Some(explanation) = &e.explanation else {
                entries.push(entry);
                continue;
            };
            let (base, attribution) = &items[&e.neuron];
            let truth: Vec<ClassificationItem> = base
                .iter()
                .zip(&attribution.test)
                .map(|(i, m)| ClassificationItem { ground_truth_active: m.is_active(e.head), ..i.clone() })
                .collect();
            let inner: Arc<dyn ChatBackend> = match &remote {
                Some(b) => b.clone(),
                None => Arc::new(self.stub_classifier(&explanation.explanation_text, &truth)),
            };
            let recorder = Recording::new(inner);
            match classify_all(&recorder, explanation, &truth, &settings) {
                Ok(outcomes) => {
                    entry.score = Some(crate::explainer::explanation_score(e.neuron, e.head, &outcomes, formula));
                    entry.outcomes = outcomes;
                }
                Err(err @ ExplainError::BackendUnavailable { .. }) => return Err(PipelineError::Explain(err)),
                Err(err) => entry.error = Some(err.to_string()),
            }
            transcript.extend(recorder.take_transcript());
            entries.push(entry);
        }

        let mut distributions = Vec::new();
        for group in [NeuronGroup::NextToken, NeuronGroup::RandomBaseline] {
            for count in self.config.prompt_counts() {
                let values: Vec<f64> = entries
                    .iter()
                    .filter(|s| s.group == group && s.count == count)
                    .filter_map(|s| s.score.as_ref().and_then(|x| x.score))
                    .collect();
                if values.is_empty() {
                    continue;
                }
                let label = format!("{}_{count}", group.label());
                distributions.push(LabelledDistribution { group, count, distribution: ScoreDistribution::new(label, values)? });
            }
        }
        let file = ScoresFile {
            formula,
            formula_note: formula_note(formula),
            primary_count: self.config.mine.n_mine_prompts,
            entries,
            distributions,
        };
        let mut written = Vec::new();
        self.put(SCORES, &file, &mut written)?;
        write_jsonl(&self.path("transcripts/score.jsonl"), &transcript)?;
        written.push("transcripts/score.jsonl".into());
        Ok(written)
    }

    pub(super) fn ablate(&self) -> Result<Vec<String>, PipelineError> {
        let model = self.model()?;
        let targets = self.neurons()?.targets;
        let attributions = self.attributions(&targets)?;
        let count = self.config.mine.n_mine_prompts;
        let mode = self.config.ablate.mode;

        let mut pairs = Vec::new();
        for (t, a) in targets.iter().zip(&attributions) {
            let sel = a.selections.iter().find(|s| s.count == count).expect("primary count selected");
            if sel.explainable.is_empty() {
                continue;
            }
            let prompts: PromptsFile = read_json(&self.path(&prompts_path(t)))?;
            let test: Vec<&PromptRecord> = kept(&prompts.test).collect();
            let mine_ids: Vec<&[u32]> = kept(&prompts.mine[..count.min(prompts.mine.len())]).map(|r| r.prompt_ids()).collect();
            for &head in &sel.explainable {
                let cases: Vec<AblationCase<'_>> = test
                    .iter()
                    .zip(&a.test)
                    .map(|(r, m)| AblationCase { prompt_id: &r.doc_id, prompt: r, head_was_active: m.is_active(head) })
                    .collect();
                let how = match mode {
                    AblationKind::Zero => AblationMode::Zero,
                    AblationKind::Mean => AblationMode::Replace(mean_head_output(model, head, &mine_ids)?),
                };
                let records = ablate_many(model, t.handle, t.token_id, head, &cases, &how)?;
                let summary = ablation_report(records.clone()).ok().map(|r| summarize(&r));
                pairs.push(PairAblation { group: t.group, neuron: t.handle, token_id: t.token_id, head, records, summary });
            }
        }

        let mut written = Vec::new();
        let mut pooled = Vec::new();
        for group in [NeuronGroup::NextToken, NeuronGroup::RandomBaseline] {
            let members: Vec<&PairAblation> = pairs.iter().filter(|p| p.group == group).collect();
            if members.is_empty() {
                continue;
            }
            let records = members.iter().flat_map(|p| p.records.iter().cloned()).collect();
            let report = ablation_report(records).ok();
            if let (NeuronGroup::NextToken, Some(r)) = (group, &report) {
                self.put_text("histograms/ablation_deltas.csv", &r.histogram_csv(ABLATION_BINS), &mut written)?;
            }
            pooled.push(GroupAblation { group, pairs: members.len(), summary: report.as_ref().map(summarize) });
        }
        let file = AblationFile { mode, prompt_split: "test".into(), count, pairs, pooled };
        self.put(ABLATION, &file, &mut written)?;
        Ok(written)
    }

    pub(super) fn report(&self) -> Result<Vec<String>, PipelineError> {
        let neurons = self.neurons()?;
        let scores: ScoresFile = read_json(&self.path(SCORES))?;
        let ablation: AblationFile = read_json(&self.path(ABLATION))?;
        let primary = scores.primary_count;
        let mut written = Vec::new();

        let mut distributions = Vec::new();
        for d in &scores.distributions {
            let rel = format!("histograms/scores_{}_{}.csv", d.group.label(), d.count);
            self.put_text(&rel, &Histogram::scores(&d.distribution.values).to_csv(), &mut written)?;
            distributions.push(DistributionRow {
                label: d.distribution.label.clone(),
                group: d.group,
                count: d.count,
                n: d.distribution.values.len(),
                mean: d.distribution.mean,
                skewness: d.distribution.skewness,
                histogram: rel,
            });
        }

        let mut comparisons = Vec::new();
        let ours = scores.distribution(NeuronGroup::NextToken, primary);
        if let (Some(p), Some(b)) = (ours, scores.distribution(NeuronGroup::RandomBaseline, primary)) {
            comparisons.push(compare_to_baseline(p, b)?);
        }
        if let Some(dir) = &self.options.baseline_run {
            let other: ScoresFile = read_json(&dir.join(SCORES))?;
            let theirs = other
                .distribution(NeuronGroup::RandomBaseline, other.primary_count)
                .or_else(|| other.distribution(NeuronGroup::NextToken, other.primary_count));
            match (ours, theirs) {
                (Some(p), Some(b)) => {
                    let mut b = b.clone();
                    b.label = format!("baseline_run:{}", b.label);
                    comparisons.push(compare_to_baseline(p, &b)?);
                }
                _ => tracing::warn!(baseline = %dir.display(), "no score distribution to compare against"),
            }
        }

        let at_primary: Vec<&ScoreEntry> = scores.entries.iter().filter(|e| e.count == primary).collect();
        let scored = at_primary.iter().filter(|e| e.score.as_ref().is_some_and(|s| s.score.is_some())).count();
        let discarded = at_primary
            .iter()
            .filter(|e| e.score.as_ref().is_some_and(|s| s.status == ScoreStatus::Discarded))
            .count();
        let mut counts = BTreeMap::new();
        for t in &neurons.targets {
            *counts.entry(t.group.label().to_owned()).or_insert(0) += 1;
        }
        let report = ReportFile {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            model: self.config.model.name.clone(),
            skewness_convention: SKEWNESS_CONVENTION.into(),
            score_formula: scores.formula,
            formula_note: scores.formula_note.clone(),
            primary_count: primary,
            neurons: counts,
            explainable_pairs: at_primary.len(),
            scored_pairs: scored,
            discarded_pairs: discarded,
            distributions,
            comparisons,
            ablation: ablation.pooled,
        };
        self.put(REPORT, &report, &mut written)?;
        Ok(written)
    }
}

fn summarize(r: &AblationReport) -> AblationSummary {
    let n_active = r.records.iter().filter(|x| x.head_was_active).count();
    AblationSummary {
        n_active,
        n_inactive: r.records.len() - n_active,
        ks: crate::analytics::KsResult {
            statistic: r.ks_statistic,
            p_value: r.ks_p_value,
            n: n_active,
            m: r.records.len() - n_active,
        },
        mean_delta_active: r.mean_delta_active,
        mean_delta_inactive: r.mean_delta_inactive,
    }
}
