#![allow(dead_code)]

use gameeval::corpus::CategoryTemplate;
use gameeval::game::{Board, Category, GameSpec};
use gameeval::llm::{build_prompt, parse_response, Answer, Label, ParseOutcome, PromptMode, Query};

pub const SYSTEM_PAYOFF: &str = include_str!("../fixtures/prompts/system_payoff.txt");
pub const SYSTEM_FUNNESS: &str = include_str!("../fixtures/prompts/system_funness.txt");
pub const USER_PAYOFF_3X5: &str = include_str!("../fixtures/prompts/user_payoff_3x5_k3_cot.txt");
pub const USER_FUNNESS_7X7: &str = include_str!("../fixtures/prompts/user_funness_7x7_k4_p1_onlydiag_cot.txt");

pub const CODER: [(Label, &str); 8] = [
    (Label::ExplicitSimulation, include_str!("../fixtures/prompts/coder_explicit_simulation.txt")),
    (Label::AnalogicalReasoning, include_str!("../fixtures/prompts/coder_analogical_reasoning.txt")),
    (Label::MathematicalComputation, include_str!("../fixtures/prompts/coder_mathematical_computation.txt")),
    (Label::Balance, include_str!("../fixtures/prompts/coder_balance.txt")),
    (Label::Challenge, include_str!("../fixtures/prompts/coder_challenge.txt")),
    (Label::Length, include_str!("../fixtures/prompts/coder_length.txt")),
    (Label::StrategicRichness, include_str!("../fixtures/prompts/coder_strategic_richness.txt")),
    (Label::Novelty, include_str!("../fixtures/prompts/coder_novelty.txt")),
];

pub fn payoff_3x5() -> GameSpec {
    CategoryTemplate::standard(Category::KInARowRectangle).instantiate(Board::Finite { rows: 3, cols: 5 }, 3)
}

pub fn funness_7x7() -> GameSpec {
    CategoryTemplate::standard(Category::FirstPlayerOnlyDiagonal).instantiate(Board::square(7), 4)
}

/// Every mismatch between generated prompt text and the transcribed
/// fixtures, as human-readable lines. Empty when all match byte for byte.
pub fn golden_mismatches() -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |what: &str, got: &str, want: &str| {
        if got != want {
            let at = got.bytes().zip(want.bytes()).position(|(a, b)| a != b).unwrap_or(got.len().min(want.len()));
            out.push(format!("{what}: first difference at byte {at}"));
        }
    };
    let p = build_prompt(&payoff_3x5(), Query::Payoff, PromptMode::Cot, false).unwrap();
    check("payoff system", &p.system, SYSTEM_PAYOFF);
    check("payoff user", &p.user, USER_PAYOFF_3X5);
    let f = build_prompt(&funness_7x7(), Query::Funness, PromptMode::Cot, false).unwrap();
    check("funness system", &f.system, SYSTEM_FUNNESS);
    check("funness user", &f.user, USER_FUNNESS_7X7);
    for (label, want) in CODER {
        check(label.name(), label.prompt(), want);
    }
    out
}

/// The two worked reply formats: a payoff pair and a single rating.
pub fn worked_replies_parse() -> bool {
    let payoff = parse_response("Thinking about the board...\nRESPONSE-Q1 = 70\nRESPONSE-Q2 = 30", Query::Payoff);
    let fun = parse_response("I'd say it's fairly dull.\n\nRESPONSE = 30", Query::Funness);
    payoff == ParseOutcome::Ok(Answer::Payoff { q1: 70.0, q2: 30.0 })
        && fun == ParseOutcome::Ok(Answer::Funness { rating: 30.0 })
}
