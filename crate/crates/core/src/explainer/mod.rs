//! Explaining head activity with a chat model, and scoring the explanation
//! by how well the same model classifies held-out prompts from it alone.

pub mod backend;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    complete_with_retry, BackendError, ChatBackend, ChatMessage, ChatRequest, HttpBackend, Recording, ReplayBackend,
    RetryPolicy, StubBackend, StubFallback, TranscriptEntry, API_KEY_ENV,
};

use crate::transformer::{HeadId, NeuronHandle};

/// Trailing stem of the explanation prompt; the model continues it.
pub const STEM: &str = "Explanation: This attention head is active when the document";
const STEM_SENTENCE: &str = "This attention head is active when the document";
pub const CLASSIFY_QUESTION: &str = "Is the given example an active example? (Yes/No)";
pub(crate) const EXAMPLE_OPEN: &str = "Example:\n\"";
pub(crate) const EXAMPLE_CLOSE: &str = "\"\n\nAnswer:";
const REPROMPT: &str = "Please answer with Yes or No.";

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("explanation request needs at least one active and one inactive prompt")]
    EmptyPartition,
    #[error("{count} examples exceed the cap of {cap}")]
    TooManyExamples { count: usize, cap: usize },
    #[error("backend unavailable after {attempts} attempt(s): {last}")]
    BackendUnavailable { attempts: u32, last: BackendError },
    #[error("backend returned an empty completion")]
    EmptyCompletion,
    #[error("could not read Yes/No from reply {reply:?}")]
    UnparseableReply { reply: String },
    #[error("explanation text is empty")]
    EmptyExplanation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationRequest {
    pub token_text: String,
    pub active_prompts: Vec<String>,
    pub inactive_prompts: Vec<String>,
}

impl ExplanationRequest {
    pub fn validate(&self, cap: usize) -> Result<(), ExplainError> {
        if self.active_prompts.is_empty() || self.inactive_prompts.is_empty() {
            return Err(ExplainError::EmptyPartition);
        }
        let count = self.active_prompts.len() + self.inactive_prompts.len();
        if count > cap {
            return Err(ExplainError::TooManyExamples { count, cap });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainerSettings {
    pub model: String,
    pub temperature: f64,
    pub explanation_max_tokens: u32,
    pub classification_max_tokens: u32,
    /// Cap on active + inactive examples in one request.
    pub max_examples: usize,
    pub max_in_flight: usize,
    #[serde(skip)]
    pub retry: RetryPolicy,
}

impl Default for ExplainerSettings {
    fn default() -> Self {
        Self {
            model: "gpt-4".into(),
            temperature: 0.0,
            explanation_max_tokens: 256,
            classification_max_tokens: 8,
            max_examples: 20,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
        }
    }
}

/// Collapse every whitespace run to one space and trim the ends.
pub fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The explanation prompt for one head's active/inactive partition.
pub fn build_explanation_prompt(request: &ExplanationRequest) -> Result<String, ExplainError> {
    if request.active_prompts.is_empty() || request.inactive_prompts.is_empty() {
        return Err(ExplainError::EmptyPartition);
    }
    let bullets = |prompts: &[String]| prompts.iter().map(|p| format!("- {}\n", one_line(p))).collect::<String>();
    Ok(format!(
        "We are studying attention heads in a transformer architecture neural network. \
         Each attention head looks for some particular thing in a short document.\n\n\
         This attention head in particular helps to predict that the last token is \"{token}\", \
         but it is only active in some documents and not others.\n\n\
         Look at the documents and explain what makes the attention head active, \
         taking into consideration the inactive examples.\n\n\
         Examples where the attention head is active:\n{active}\n\
         Examples where the attention head is inactive:\n{inactive}\n\n\
         {STEM}",
        token = request.token_text,
        active = bullets(&request.active_prompts),
        inactive = bullets(&request.inactive_prompts),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadExplanation {
    pub neuron: NeuronHandle,
    pub head: HeadId,
    /// The model's continuation of the stem, on one line.
    pub explanation_text: String,
    pub request_fingerprint: String,
}

impl HeadExplanation {
    /// The explanation as a full sentence, stem included.
    pub fn paragraph(&self) -> String {
        let lower = self.explanation_text.to_lowercase();
        if lower.starts_with("this attention head") || lower.starts_with("this head") {
            self.explanation_text.clone()
        } else {
            format!("{STEM_SENTENCE} {}", self.explanation_text)
        }
    }
}

pub fn explanation_chat_request(request: &ExplanationRequest, settings: &ExplainerSettings) -> Result<ChatRequest, ExplainError> {
    request.validate(settings.max_examples)?;
    Ok(ChatRequest {
        model: settings.model.clone(),
        temperature: settings.temperature,
        max_tokens: settings.explanation_max_tokens,
        messages: vec![ChatMessage::user(build_explanation_prompt(request)?)],
    })
}

fn call(backend: &dyn ChatBackend, request: &ChatRequest, settings: &ExplainerSettings) -> Result<String, ExplainError> {
    complete_with_retry(backend, request, settings.retry)
        .map_err(|e| ExplainError::BackendUnavailable { attempts: e.attempts, last: e.last })
}

pub fn generate_explanation(
    backend: &dyn ChatBackend,
    neuron: NeuronHandle,
    head: HeadId,
    request: &ExplanationRequest,
    settings: &ExplainerSettings,
) -> Result<HeadExplanation, ExplainError> {
    let chat = explanation_chat_request(request, settings)?;
    let text = one_line(&call(backend, &chat, settings)?);
    if text.is_empty() {
        return Err(ExplainError::EmptyCompletion);
    }
    Ok(HeadExplanation { neuron, head, explanation_text: text, request_fingerprint: chat.fingerprint() })
}

pub fn build_classification_prompt(explanation: &HeadExplanation, prompt_text: &str) -> String {
    format!(
        "{CLASSIFY_QUESTION}\n\n{}\n\n{EXAMPLE_OPEN}{}{EXAMPLE_CLOSE}",
        explanation.paragraph(),
        one_line(prompt_text)
    )
}

/// `Some(true)` for a reply whose first word is "yes", `Some(false)` for
/// "no", in any case.
pub fn parse_yes_no(reply: &str) -> Option<bool> {
    let word: String = reply.trim_start().chars().take_while(|c| c.is_alphabetic()).collect();
    match word.to_lowercase().as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    pub prompt_id: String,
    pub predicted_active: bool,
    pub ground_truth_active: bool,
    pub raw_reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationItem {
    pub prompt_id: String,
    pub text: String,
    pub ground_truth_active: bool,
}

/// Ask whether `item` is an active example given only the explanation. An
/// unparseable reply gets one follow-up asking for Yes or No.
pub fn classify_prompt(
    backend: &dyn ChatBackend,
    explanation: &HeadExplanation,
    item: &ClassificationItem,
    settings: &ExplainerSettings,
) -> Result<ClassificationOutcome, ExplainError> {
    if explanation.explanation_text.trim().is_empty() {
        return Err(ExplainError::EmptyExplanation);
    }
    let mut chat = ChatRequest {
        model: settings.model.clone(),
        temperature: settings.temperature,
        max_tokens: settings.classification_max_tokens,
        messages: vec![ChatMessage::user(build_classification_prompt(explanation, &item.text))],
    };
    let mut reply = call(backend, &chat, settings)?;
    let mut parsed = parse_yes_no(&reply);
    if parsed.is_none() {
        chat.messages.push(ChatMessage::assistant(reply.clone()));
        chat.messages.push(ChatMessage::user(REPROMPT));
        reply = call(backend, &chat, settings)?;
        parsed = parse_yes_no(&reply);
    }
    let predicted_active = parsed.ok_or_else(|| ExplainError::UnparseableReply { reply: reply.clone() })?;
    Ok(ClassificationOutcome {
        prompt_id: item.prompt_id.clone(),
        predicted_active,
        ground_truth_active: item.ground_truth_active,
        raw_reply: reply,
    })
}

/// Apply `f` to every item with at most `bound` calls in flight; results keep
/// input order and the first error wins.
pub fn run_bounded<T, R, E, F>(items: &[T], bound: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    let workers = bound.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R, E>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("result lock").into_iter().map(|r| r.expect("every slot filled")).collect()
}

pub fn classify_all(
    backend: &dyn ChatBackend,
    explanation: &HeadExplanation,
    items: &[ClassificationItem],
    settings: &ExplainerSettings,
) -> Result<Vec<ClassificationOutcome>, ExplainError> {
    run_bounded(items, settings.max_in_flight, |item| classify_prompt(backend, explanation, item, settings))
}

/// Which ratios are averaged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFormula {
    /// `½(TP/(TP+FP) + TN/(TN+FN))`
    #[default]
    Printed,
    /// `½(TP/(TP+FN) + TN/(TN+FP))`, the true positive and true negative rates.
    Rates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreStatus {
    Scored,
    /// Only the positive-prediction ratio was defined.
    PositiveTermOnly,
    /// Only the negative-prediction ratio was defined.
    NegativeTermOnly,
    /// All ground-truth labels fall in one class.
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationScore {
    pub neuron: NeuronHandle,
    pub head: HeadId,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub formula: ScoreFormula,
    pub status: ScoreStatus,
    /// `None` exactly when discarded.
    pub score: Option<f64>,
}

impl ExplanationScore {
    pub fn from_counts(
        neuron: NeuronHandle,
        head: HeadId,
        [tp, fp, tn, fn_]: [usize; 4],
        formula: ScoreFormula,
    ) -> Self {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let single_class = tp + fn_ == 0 || tn + fp == 0;
        let (first, second) = match formula {
            ScoreFormula::Printed => (ratio(tp, tp + fp), ratio(tn, tn + fn_)),
            ScoreFormula::Rates => (ratio(tp, tp + fn_), ratio(tn, tn + fp)),
        };
        let (status, score) = match (single_class, first, second) {
            (true, _, _) | (false, None, None) => (ScoreStatus::Discarded, None),
            (false, Some(a), Some(b)) => (ScoreStatus::Scored, Some(0.5 * (a + b))),
            (false, Some(a), None) => (ScoreStatus::PositiveTermOnly, Some(a)),
            (false, None, Some(b)) => (ScoreStatus::NegativeTermOnly, Some(b)),
        };
        Self { neuron, head, tp, fp, tn, fn_, formula, status, score }
    }
}

pub fn confusion_counts(outcomes: &[ClassificationOutcome]) -> [usize; 4] {
    let mut c = [0; 4];
    for o in outcomes {
        let idx = match (o.predicted_active, o.ground_truth_active) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        c[idx] += 1;
    }
    c
}

/// Score a head's classification outcomes; empty input is discarded.
pub fn explanation_score(
    neuron: NeuronHandle,
    head: HeadId,
    outcomes: &[ClassificationOutcome],
    formula: ScoreFormula,
) -> ExplanationScore {
    ExplanationScore::from_counts(neuron, head, confusion_counts(outcomes), formula)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::time::Duration;

    const N: NeuronHandle = NeuronHandle { layer: 11, neuron: 42 };
    const H: HeadId = HeadId { layer: 9, head: 3 };

    fn settings() -> ExplainerSettings {
        ExplainerSettings { retry: RetryPolicy { max_attempts: 5, base_delay: Duration::ZERO }, ..Default::default() }
    }

    fn figure_request() -> ExplanationRequest {
        ExplanationRequest {
            token_text: " as".into(),
            active_prompts: vec![
                "could begin as early as".into(),
                "will be available in schools as early as".into(),
                "The lead would reach as high as".into(),
            ],
            inactive_prompts: vec!["a video game console such as".into(), "whatever he wants so long as".into()],
        }
    }

    fn explanation(text: &str) -> HeadExplanation {
        HeadExplanation { neuron: N, head: H, explanation_text: text.into(), request_fingerprint: String::new() }
    }

    fn item(id: &str, text: &str, active: bool) -> ClassificationItem {
        ClassificationItem { prompt_id: id.into(), text: text.into(), ground_truth_active: active }
    }

    fn score(c: [usize; 4]) -> ExplanationScore {
        ExplanationScore::from_counts(N, H, c, ScoreFormula::Printed)
    }

    #[test]
    fn explanation_prompt_layout() {
        let text = build_explanation_prompt(&figure_request()).unwrap();
        assert!(text.starts_with("We are studying attention heads in a transformer architecture neural network."));
        assert!(text.contains("helps to predict that the last token is \" as\""));
        let active = text.find("Examples where the attention head is active:").unwrap();
        let inactive = text.find("Examples where the attention head is inactive:").unwrap();
        let early = text.find("- could begin as early as\n").unwrap();
        let console = text.find("- a video game console such as\n").unwrap();
        assert!(active < early && early < inactive && inactive < console);
        assert!(text.find("- will be available").unwrap() < text.find("- The lead would").unwrap());
        assert!(text.ends_with(STEM));

        let one = ExplanationRequest {
            token_text: "x".into(),
            active_prompts: vec!["line one\nline two".into()],
            inactive_prompts: vec!["b".into()],
        };
        let text = build_explanation_prompt(&one).unwrap();
        assert!(text.contains("- line one line two\n") && text.contains("- b\n"));

        let empty = ExplanationRequest { inactive_prompts: vec![], ..one };
        assert!(matches!(build_explanation_prompt(&empty), Err(ExplainError::EmptyPartition)));
    }

    #[test]
    fn example_cap() {
        let mut r = figure_request();
        r.active_prompts = vec!["a".into(); 19];
        assert!(matches!(r.validate(20), Err(ExplainError::TooManyExamples { count: 21, cap: 20 })));
    }

    #[test]
    fn stub_explanation_verbatim_and_fingerprint() {
        let stub = StubBackend::new("contains a range phrase like \"as early as\".", StubFallback::Reply("No".into()));
        let e = generate_explanation(&stub, N, H, &figure_request(), &settings()).unwrap();
        assert_eq!(e.explanation_text, "contains a range phrase like \"as early as\".");
        assert_eq!(e.paragraph(), "This attention head is active when the document contains a range phrase like \"as early as\".");
        let again = generate_explanation(&stub, N, H, &figure_request(), &settings()).unwrap();
        assert_eq!(e.request_fingerprint, again.request_fingerprint);
        let mut other = figure_request();
        other.active_prompts.swap(0, 1);
        let moved = generate_explanation(&stub, N, H, &other, &settings()).unwrap();
        assert_ne!(e.request_fingerprint, moved.request_fingerprint);
    }

    #[test]
    fn whitespace_completion_is_an_error() {
        let stub = StubBackend::new(" \n\t ", StubFallback::Reply("No".into()));
        assert!(matches!(generate_explanation(&stub, N, H, &figure_request(), &settings()), Err(ExplainError::EmptyCompletion)));
    }

    #[test]
    fn unreachable_backend() {
        struct Down;
        impl ChatBackend for Down {
            fn complete(&self, _: &ChatRequest) -> Result<String, BackendError> {
                Err(BackendError::Transient("connection refused".into()))
            }
        }
        let err = generate_explanation(&Down, N, H, &figure_request(), &settings()).unwrap_err();
        assert!(matches!(err, ExplainError::BackendUnavailable { attempts: 5, .. }));
    }

    #[test]
    fn classification_prompt_layout() {
        let text = build_classification_prompt(&explanation("uses \"only\" after a purpose."), "shown for illustrative purposes only");
        assert!(text.starts_with("Is the given example an active example? (Yes/No)\n\nThis attention head is active when"));
        assert!(text.ends_with("Example:\n\"shown for illustrative purposes only\"\n\nAnswer:"));
        let full = explanation("This head is active when the document contains \"only\".");
        assert!(build_classification_prompt(&full, "x").contains("\n\nThis head is active when the document contains"));
    }

    #[test]
    fn classification_replies() {
        let e = explanation("mentions a purpose");
        let yes = StubBackend::new("", StubFallback::Reply("Yes".into()));
        assert!(classify_prompt(&yes, &e, &item("a", "p", false), &settings()).unwrap().predicted_active);
        let no = StubBackend::new("", StubFallback::Reply(" no, because the phrase is absent".into()));
        let o = classify_prompt(&no, &e, &item("a", "p", true), &settings()).unwrap();
        assert!(!o.predicted_active && o.ground_truth_active);
        let maybe = StubBackend::new("", StubFallback::Reply("maybe".into()));
        assert!(matches!(
            classify_prompt(&maybe, &e, &item("a", "p", true), &settings()),
            Err(ExplainError::UnparseableReply { .. })
        ));
        assert_eq!(parse_yes_no("YES."), Some(true));
        assert_eq!(parse_yes_no("Yesterday"), None);
        assert_eq!(parse_yes_no(""), None);
    }

    #[test]
    fn reprompt_recovers() {
        struct SecondTime;
        impl ChatBackend for SecondTime {
            fn complete(&self, r: &ChatRequest) -> Result<String, BackendError> {
                Ok(if r.messages.len() == 1 { "I think so".into() } else { "Yes".into() })
            }
        }
        let o = classify_prompt(&SecondTime, &explanation("x"), &item("a", "p", true), &settings()).unwrap();
        assert!(o.predicted_active);
        assert_eq!(o.raw_reply, "Yes");
    }

    #[test]
    fn score_table() {
        assert_eq!(score([5, 0, 5, 0]).score, Some(1.0));
        let s = score([3, 1, 4, 2]).score.unwrap();
        assert!((s - 0.5 * (0.75 + 4.0 / 6.0)).abs() < 1e-15);
        assert!((s - 0.708_333_333).abs() < 1e-9);
        let fb = score([6, 4, 0, 0]);
        assert_eq!((fb.score, fb.status), (Some(0.6), ScoreStatus::PositiveTermOnly));
        let fb = score([0, 0, 3, 1]);
        assert_eq!((fb.score, fb.status), (Some(0.75), ScoreStatus::NegativeTermOnly));
        let all_active = score([4, 0, 0, 2]);
        assert_eq!((all_active.score, all_active.status), (None, ScoreStatus::Discarded));
        assert_eq!(score([0, 0, 0, 0]).status, ScoreStatus::Discarded);
        let rates = ExplanationScore::from_counts(N, H, [3, 1, 4, 2], ScoreFormula::Rates).score.unwrap();
        assert!((rates - 0.5 * (0.6 + 0.8)).abs() < 1e-15);
        let json = serde_json::to_value(score([1, 2, 3, 4])).unwrap();
        assert_eq!(json["fn"], 4);
    }

    fn balanced_items(head: usize, n: usize) -> Vec<ClassificationItem> {
        (0..n).map(|i| item(&format!("h{head}-p{i}"), &format!("head {head} prompt {i}"), i % 2 == 0)).collect()
    }

    #[test]
    fn oracle_and_anti_oracle() {
        let items = balanced_items(0, 10);
        let active: Vec<&str> = items.iter().filter(|i| i.ground_truth_active).map(|i| i.text.as_str()).collect();
        let inactive: Vec<&str> = items.iter().filter(|i| !i.ground_truth_active).map(|i| i.text.as_str()).collect();
        let e = explanation("x");
        let oracle = StubBackend::ground_truth_echo("x", active.clone(), inactive.clone());
        let outcomes = classify_all(&oracle, &e, &items, &settings()).unwrap();
        assert_eq!(explanation_score(N, H, &outcomes, ScoreFormula::Printed).score, Some(1.0));
        assert_eq!(outcomes.iter().map(|o| &o.prompt_id).collect::<Vec<_>>(), items.iter().map(|i| &i.prompt_id).collect::<Vec<_>>());
        let anti = StubBackend::ground_truth_echo("x", inactive, active);
        let outcomes = classify_all(&anti, &e, &items, &settings()).unwrap();
        assert_eq!(explanation_score(N, H, &outcomes, ScoreFormula::Printed).score, Some(0.0));
    }

    #[test]
    fn fair_coin_scores_near_chance() {
        let coin = StubBackend::new("x", StubFallback::Coin { seed: 2024 });
        let e = explanation("x");
        let scores: Vec<f64> = (0..200)
            .filter_map(|h| {
                let outcomes = classify_all(&coin, &e, &balanced_items(h, 10), &settings()).unwrap();
                explanation_score(N, H, &outcomes, ScoreFormula::Printed).score
            })
            .collect();
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        assert!(scores.len() >= 190);
        assert!((mean - 0.5).abs() <= 0.15, "{mean}");
    }

    #[test]
    fn bounded_runner_keeps_order_and_bound() {
        let in_flight = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let items: Vec<usize> = (0..40).collect();
        let out = run_bounded(&items, 4, |&i| {
            let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(1));
            in_flight.fetch_sub(1, Ordering::SeqCst);
            Ok::<_, ()>(i * 2)
        })
        .unwrap();
        assert_eq!(out, items.iter().map(|i| i * 2).collect::<Vec<_>>());
        assert!(peak.load(Ordering::SeqCst) <= 4);
        let err = run_bounded(&items, 3, |&i| if i == 7 { Err(i) } else { Ok(i) });
        assert_eq!(err, Err(7));
    }

    proptest! {
        #[test]
        fn defined_scores_in_unit_interval(tp in 0usize..30, fp in 0usize..30, tn in 0usize..30, fn_ in 0usize..30) {
            for formula in [ScoreFormula::Printed, ScoreFormula::Rates] {
                let s = ExplanationScore::from_counts(N, H, [tp, fp, tn, fn_], formula);
                if let Some(v) = s.score {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert_eq!(s.score.is_none(), s.status == ScoreStatus::Discarded);
            }
        }

        #[test]
        fn label_swap_symmetry(tp in 0usize..30, fp in 0usize..30, tn in 0usize..30, fn_ in 0usize..30) {
            for formula in [ScoreFormula::Printed, ScoreFormula::Rates] {
                let a = ExplanationScore::from_counts(N, H, [tp, fp, tn, fn_], formula).score;
                let b = ExplanationScore::from_counts(N, H, [tn, fn_, tp, fp], formula).score;
                match (a, b) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-15),
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
        }

        #[test]
        fn identical_partitions_identical_fingerprints(active in prop::collection::vec("[a-z ]{1,12}", 1..6), inactive in prop::collection::vec("[a-z ]{1,12}", 1..6)) {
            let r = ExplanationRequest { token_text: " t".into(), active_prompts: active, inactive_prompts: inactive };
            let a = explanation_chat_request(&r, &settings()).unwrap().fingerprint();
            let b = explanation_chat_request(&r.clone(), &settings()).unwrap().fingerprint();
            prop_assert_eq!(a, b);
        }
    }
}
