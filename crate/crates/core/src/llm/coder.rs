use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Gateway, Query, TraceRecord};
use crate::error::{Error, Result};

/// Factors a reasoning trace is coded for: three evaluation methods and
/// five funness considerations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    ExplicitSimulation,
    AnalogicalReasoning,
    MathematicalComputation,
    Balance,
    Challenge,
    Length,
    StrategicRichness,
    Novelty,
}

impl Label {
    pub const ALL: [Label; 8] = [
        Label::ExplicitSimulation,
        Label::AnalogicalReasoning,
        Label::MathematicalComputation,
        Label::Balance,
        Label::Challenge,
        Label::Length,
        Label::StrategicRichness,
        Label::Novelty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Label::ExplicitSimulation => "explicit_simulation",
            Label::AnalogicalReasoning => "analogical_reasoning",
            Label::MathematicalComputation => "mathematical_computation",
            Label::Balance => "balance",
            Label::Challenge => "challenge",
            Label::Length => "length",
            Label::StrategicRichness => "strategic_richness",
            Label::Novelty => "novelty",
        }
    }

    pub fn from_name(name: &str) -> Option<Label> {
        Label::ALL.into_iter().find(|l| l.name() == name)
    }

    /// Instruction sent to the coder model; the trace follows it.
    pub fn prompt(self) -> &'static str {
        match self {
            Label::ExplicitSimulation => include_str!("prompts/coder_explicit_simulation.txt"),
            Label::AnalogicalReasoning => include_str!("prompts/coder_analogical_reasoning.txt"),
            Label::MathematicalComputation => include_str!("prompts/coder_mathematical_computation.txt"),
            Label::Balance => include_str!("prompts/coder_balance.txt"),
            Label::Challenge => include_str!("prompts/coder_challenge.txt"),
            Label::Length => include_str!("prompts/coder_length.txt"),
            Label::StrategicRichness => include_str!("prompts/coder_strategic_richness.txt"),
            Label::Novelty => include_str!("prompts/coder_novelty.txt"),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Leading YES or NO of a coder reply, ignoring case and markup.
pub fn parse_code_reply(reply: &str) -> Option<bool> {
    let word: String = reply
        .trim_start_matches(|c: char| c.is_whitespace() || "*_`\"'".contains(c))
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    match word.to_ascii_uppercase().as_str() {
        "YES" => Some(true),
        "NO" => Some(false),
        _ => None,
    }
}

/// One coder call: the label's instruction with the trace appended.
pub fn code_trace(coder: &Gateway, trace_text: &str, label: Label) -> Result<bool> {
    if trace_text.trim().is_empty() {
        return Err(Error::Config("cannot code an empty trace".into()));
    }
    let user = format!("{}\n\n{}", label.prompt(), trace_text);
    let reply = coder.complete("", &user, None)?;
    parse_code_reply(&reply.text)
        .ok_or_else(|| Error::Data(format!("coder reply for {label} is neither YES nor NO: {:?}", reply.text)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeGroup {
    Model,
    Game,
    Category,
}

/// Share of traces in a group coded true for a label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeRate {
    pub group: String,
    pub label: Label,
    /// Mean over the group's games of each game's share of true codes.
    pub rate: f64,
    pub payoff_rate: Option<f64>,
    pub funness_rate: Option<f64>,
    pub n_traces: usize,
}

fn per_game_mean(codes: &[(&str, bool)]) -> Option<f64> {
    if codes.is_empty() {
        return None;
    }
    let mut by_game: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for &(game, v) in codes {
        let e = by_game.entry(game).or_default();
        e.0 += v as usize;
        e.1 += 1;
    }
    Some(by_game.values().map(|&(t, n)| t as f64 / n as f64).sum::<f64>() / by_game.len() as f64)
}

/// Rates of each label per group, split by query where both are present.
/// `category_of` maps game ids to category labels for [`CodeGroup::Category`].
pub fn aggregate_codes(records: &[TraceRecord], by: CodeGroup, category_of: &BTreeMap<String, String>) -> Result<Vec<CodeRate>> {
    let mut groups: BTreeMap<(String, Label), Vec<(&str, Query, bool)>> = BTreeMap::new();
    for r in records {
        let group = match by {
            CodeGroup::Model => r.key.evaluator_id.clone(),
            CodeGroup::Game => r.key.game_id.clone(),
            CodeGroup::Category => category_of
                .get(&r.key.game_id)
                .cloned()
                .ok_or_else(|| Error::Data(format!("no category for game {}", r.key.game_id)))?,
        };
        for (&label, &v) in &r.coder_labels {
            groups.entry((group.clone(), label)).or_default().push((&r.key.game_id, r.key.query, v));
        }
    }
    if groups.is_empty() {
        return Err(Error::Data("no coded traces to aggregate".into()));
    }
    Ok(groups
        .into_iter()
        .map(|((group, label), codes)| {
            let pick = |q: Option<Query>| -> Vec<(&str, bool)> {
                codes.iter().filter(|c| q.is_none_or(|q| c.1 == q)).map(|c| (c.0, c.2)).collect()
            };
            CodeRate {
                group,
                label,
                rate: per_game_mean(&pick(None)).expect("group has codes"),
                payoff_rate: per_game_mean(&pick(Some(Query::Payoff))),
                funness_rate: per_game_mean(&pick(Some(Query::Funness))),
                n_traces: codes.len(),
            }
        })
        .collect())
}
