use std::sync::LazyLock;

use regex::Regex;

use super::{Answer, FailureReason, ParseOutcome, Query, TraceRecord};

/// Direct-mode replies with more non-whitespace characters than this ahead
/// of the first answer marker are filtered.
pub const DEFAULT_PROSE_BUDGET: usize = 40;

static Q1: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)RESPONSE[\s*_`]*-[\s*_`]*Q1[\s*_`]*[=:]").unwrap());
static Q2: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)RESPONSE[\s*_`]*-[\s*_`]*Q2[\s*_`]*[=:]").unwrap());
static FUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)RESPONSE[\s*_`]*[=:]").unwrap());
static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"^[\s*_`"'\[(<]*([+-]?(?:\d+(?:\.\d*)?|\.\d+))"#).unwrap());

fn marker(query: Query) -> [&'static Regex; 2] {
    match query {
        Query::Payoff => [&Q1, &Q2],
        Query::Funness => [&FUN, &FUN],
    }
}

/// Value after the last match of `marker`.
fn last_value(text: &str, marker: &Regex) -> Result<f64, FailureReason> {
    let m = marker.find_iter(text).last().ok_or(FailureReason::MissingMarker)?;
    let caps = NUMBER.captures(&text[m.end()..]).ok_or(FailureReason::NotANumber)?;
    let v: f64 = caps[1].parse().map_err(|_| FailureReason::NotANumber)?;
    if !(0.0..=100.0).contains(&v) {
        return Err(FailureReason::OutOfRange);
    }
    Ok(v)
}

/// Reads the answer from the last occurrence of each marker. Never panics;
/// anything unusable is a classified failure.
pub fn parse_response(text: &str, query: Query) -> ParseOutcome {
    let result = match query {
        Query::Payoff => last_value(text, &Q1).and_then(|q1| Ok(Answer::Payoff { q1, q2: last_value(text, &Q2)? })),
        Query::Funness => last_value(text, &FUN).map(|rating| Answer::Funness { rating }),
    };
    match result {
        Ok(a) => ParseOutcome::Ok(a),
        Err(r) => ParseOutcome::Failed(r),
    }
}

/// Marks a parsed Direct-mode reply as filtered when more than
/// `prose_budget` non-whitespace characters precede the first marker.
/// Failed parses stay failed.
pub fn apply_direct_filter(mut record: TraceRecord, prose_budget: usize) -> TraceRecord {
    if !matches!(record.parse, ParseOutcome::Ok(_)) {
        return record;
    }
    let first = marker(record.key.query)[0].find(&record.raw_text).map_or(record.raw_text.len(), |m| m.start());
    let prose = record.raw_text[..first].chars().filter(|c| !c.is_whitespace()).count();
    if prose > prose_budget {
        record.parse = ParseOutcome::Filtered;
    }
    record
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{PromptMode, SampleKey};

    fn payoff(q1: f64, q2: f64) -> ParseOutcome {
        ParseOutcome::Ok(Answer::Payoff { q1, q2 })
    }

    #[test]
    fn documented_formats() {
        assert_eq!(parse_response("blah\nRESPONSE-Q1 = 70 and RESPONSE-Q2 = 30", Query::Payoff), payoff(70.0, 30.0));
        assert_eq!(
            parse_response("So RESPONSE = 35\n\n**RESPONSE = 30**", Query::Funness),
            ParseOutcome::Ok(Answer::Funness { rating: 30.0 })
        );
        assert_eq!(parse_response("**RESPONSE-Q1 = 5**  \n**RESPONSE-Q2 = 95**", Query::Payoff), payoff(5.0, 95.0));
    }

    #[test]
    fn failures_are_classified() {
        assert_eq!(parse_response("I think the game is fair.", Query::Payoff), ParseOutcome::Failed(FailureReason::MissingMarker));
        assert_eq!(parse_response("RESPONSE-Q1 = 60", Query::Payoff), ParseOutcome::Failed(FailureReason::MissingMarker));
        assert_eq!(parse_response("RESPONSE = high", Query::Funness), ParseOutcome::Failed(FailureReason::NotANumber));
        assert_eq!(parse_response("RESPONSE = 150", Query::Funness), ParseOutcome::Failed(FailureReason::OutOfRange));
        assert_eq!(parse_response("RESPONSE = -3", Query::Funness), ParseOutcome::Failed(FailureReason::OutOfRange));
    }

    #[test]
    fn payoff_markers_are_not_funness_markers() {
        assert_eq!(parse_response("RESPONSE-Q1 = 60 and RESPONSE-Q2 = 10", Query::Funness), ParseOutcome::Failed(FailureReason::MissingMarker));
    }

    fn record(text: &str, query: Query) -> TraceRecord {
        TraceRecord {
            key: SampleKey { evaluator_id: "m".into(), game_id: "g".into(), query, rollout: 0 },
            prompt_mode: PromptMode::Direct,
            raw_text: text.into(),
            trace_text: None,
            reasoning_tokens: None,
            parse: parse_response(text, query),
            coder_labels: Default::default(),
        }
    }

    #[test]
    fn filter_rules() {
        let kept = apply_direct_filter(record("RESPONSE-Q1 = 55 and RESPONSE-Q2 = 20", Query::Payoff), DEFAULT_PROSE_BUDGET);
        assert_eq!(kept.parse, payoff(55.0, 20.0));
        let text = "Let me think... the board is wide and the first player has an edge. RESPONSE-Q1 = 55 and RESPONSE-Q2 = 20";
        assert_eq!(apply_direct_filter(record(text, Query::Payoff), DEFAULT_PROSE_BUDGET).parse, ParseOutcome::Filtered);
        let empty = apply_direct_filter(record("", Query::Payoff), DEFAULT_PROSE_BUDGET);
        assert_eq!(empty.parse, ParseOutcome::Failed(FailureReason::MissingMarker));
    }
}
