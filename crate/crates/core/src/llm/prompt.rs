use crate::error::{Error, Result};
use crate::game::{Board, CompletionEffect, GameSpec, LineRule, Player};

use super::{PromptMode, Query};

const SYSTEM_PAYOFF: &str = include_str!("prompts/system_payoff.txt");
const SYSTEM_FUNNESS: &str = include_str!("prompts/system_funness.txt");

pub const SCRATCHPAD_SENTENCE: &str = "You may first write out your thoughts on a scratchpad.";

const PAYOFF_HEAD: &str = "Imagine you are playing the following game:\n\n";
const PAYOFF_BODY: &str = "\n\nYou will answer two questions. For each question, provide your a single number between 0 and 100.

Q1:
If the game does not end in a draw, assuming both players play reasonably, how likely is it that the first player is going to win (not draw)?

Answer on a scale of 0 to 100.
Let 0 = \"First player definitely going to lose\",
50 = \"Equally likely to win or lose\",
100 = \"First player definitely going to win\"

Q2:
Assuming both players play reasonably, how likely is the game to end in a draw?

Answer on a scale of 0 to 100.
Let 0 = \"Impossible to end in a draw\"
50 = \"Equally likely to end in a draw or not\",
100 = \"Definitely going to end in a draw\"

";
const PAYOFF_TAIL: &str = "When you feel you understand the game and are ready to respond, provide a single number between 0 to 100. Write your responses as a number, in the form RESPONSE-Q1 = <your-numerical-response-to-q1> and RESPONSE-Q2 = <your-numerical-response-to-q2>";

const FUNNESS_HEAD: &str = "Imagine you are playing the following game:  \n\n";
const FUNNESS_BODY: &str = concat!(
    " \n\n",
    "How fun is this game?  \n\n",
    "Answer on a scale of 0 to 100.  \n",
    "Let 0 = \"The least fun  of this class of grid-based game\"  \n",
    "50 = \"Neutral\"  \n",
    "100 = \"The most fun of this class of grid-based game\"  \n\n",
);
const FUNNESS_TAIL: &str = "When you feel you understand the game and are ready to respond, provide a single number between 0 to 100. Write your response as a number, in the form RESPONSE = <your-numerical-response>  ";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prompt {
    /// Empty when the system text was inlined into `user`.
    pub system: String,
    pub user: String,
}

/// The text after "Board size: ".
pub fn board_description(board: &Board) -> String {
    match board {
        Board::Finite { rows, cols } => format!("{rows} x {cols}"),
        Board::Infinite => "infinite".to_string(),
    }
}

fn ordinal(p: Player) -> &'static str {
    match p {
        Player::P1 => "first",
        Player::P2 => "second",
    }
}

/// Plain-English win conditions, the text after "Win conditions: ".
pub fn win_conditions(spec: &GameSpec) -> String {
    let misere = spec.completion_effect == CompletionEffect::Lose;
    let verb = if misere { "lose" } else { "win" };
    let restricted = [spec.line_rule_p1 != LineRule::All, spec.line_rule_p2 != LineRule::All];
    let mut out = Vec::new();
    if spec.k_p1 == spec.k_p2 {
        let k = spec.k_p1;
        match (misere, restricted.contains(&true)) {
            (false, false) => out.push(format!("{k} pieces in a row wins.")),
            (false, true) => out.push(format!("Each player needs {k} pieces in a row to win.")),
            (true, _) => out.push(format!("A player loses if they make {k} pieces in a row.")),
        }
    } else if misere {
        out.push(format!(
            "The first player loses if they make {} pieces in a row, and the second player loses if they make {}.",
            spec.k_p1, spec.k_p2
        ));
    } else if spec.k_p2 < spec.k_p1 {
        out.push(format!(
            "The first player needs {} pieces in a row to win, but the second player only needs {} pieces to win.",
            spec.k_p1, spec.k_p2
        ));
    } else {
        out.push(format!(
            "The first player only needs {} pieces in a row to win, but the second player needs {} pieces to win.",
            spec.k_p1, spec.k_p2
        ));
    }
    let rule_clause = |p: Player| match spec.line_rule(p) {
        LineRule::OnlyDiagonal => format!("The {} player can only {verb} by making a diagonal row", ordinal(p)),
        LineRule::NoDiagonal => format!(
            "The {} player cannot {verb} by making a diagonal row (only horizontal and vertical rows count)",
            ordinal(p)
        ),
        LineRule::All => unreachable!("only restricted rules are described"),
    };
    match restricted {
        [true, false] => out.push(format!("{}, but the second player does not have this restriction.", rule_clause(Player::P1))),
        [false, true] => out.push(format!("{}, but the first player does not have this restriction.", rule_clause(Player::P2))),
        [true, true] => {
            out.push(format!("{}.", rule_clause(Player::P1)));
            out.push(format!("{}.", rule_clause(Player::P2)));
        }
        [false, false] => {}
    }
    for p in [Player::P1, Player::P2] {
        let n = spec.opening_placements(p);
        if n > 1 {
            out.push(format!("The {} player can place {n} pieces as their first move.", ordinal(p)));
        }
    }
    if spec.board == Board::Infinite {
        out.push(format!("The game is a draw if nobody has won after {} moves.", spec.max_plies));
    }
    out.join(" ")
}

/// System and user prompt for one query about one game. Direct mode drops
/// the scratchpad sentence; Cot and Reasoning keep it. With `inline_system`
/// the system text is placed ahead of the user text and the system part is
/// left empty.
pub fn build_prompt(spec: &GameSpec, query: Query, mode: PromptMode, inline_system: bool) -> Result<Prompt> {
    spec.validate().map_err(|e| Error::Config(format!("cannot describe {}: {e}", spec.game_id)))?;
    let board = board_description(&spec.board);
    let win = win_conditions(spec);
    let scratchpad = |trailing: &str| match mode {
        PromptMode::Direct => String::new(),
        PromptMode::Cot | PromptMode::Reasoning => format!("{SCRATCHPAD_SENTENCE}{trailing}\n"),
    };
    let (system, user) = match query {
        Query::Payoff => (
            SYSTEM_PAYOFF,
            format!("{PAYOFF_HEAD}Board size: {board}\nWin conditions: {win}{PAYOFF_BODY}{}{PAYOFF_TAIL}", scratchpad("")),
        ),
        Query::Funness => (
            SYSTEM_FUNNESS,
            format!("{FUNNESS_HEAD}Board size: {board}\nWin conditions: {win}{FUNNESS_BODY}{}{FUNNESS_TAIL}", scratchpad("  ")),
        ),
    };
    Ok(if inline_system {
        Prompt { system: String::new(), user: format!("{system}\n\n{user}") }
    } else {
        Prompt { system: system.to_string(), user }
    })
}
