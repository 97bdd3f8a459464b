use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::parse;
use super::{AgentError, REPROMPT_REPLY, MAX_RETRIES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColourCode {
    Cyan,
    Green,
    Yellow,
    Orange,
    Red,
}

impl ColourCode {
    pub const ALL: [ColourCode; 5] = [
        ColourCode::Cyan,
        ColourCode::Green,
        ColourCode::Yellow,
        ColourCode::Orange,
        ColourCode::Red,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ColourCode::Cyan => "cyan",
            ColourCode::Green => "green",
            ColourCode::Yellow => "yellow",
            ColourCode::Orange => "orange",
            ColourCode::Red => "red",
        }
    }

    /// First colour word mentioned in `text`, if any.
    pub fn find_in(text: &str) -> Option<ColourCode> {
        text.split(|c: char| !c.is_alphabetic())
            .find_map(|w| w.to_lowercase().parse().ok())
    }
}

impl fmt::Display for ColourCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ColourCode {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ColourCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| AgentError::UnknownColour(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriageStep {
    Greet,
    AskSymptom,
    AskSeverity,
    AskDuration,
    AskBreathing,
    Done,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TriageSlots {
    pub symptom: Option<String>,
    pub severity: Option<u8>,
    pub duration_hours: Option<f64>,
    pub breathing_difficulty: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageState {
    pub step: TriageStep,
    pub slots: TriageSlots,
    pub code: Option<ColourCode>,
    /// Unparseable answers to the current question.
    pub retries: u8,
}

impl Default for TriageState {
    fn default() -> Self {
        TriageState {
            step: TriageStep::Greet,
            slots: TriageSlots::default(),
            code: None,
            retries: 0,
        }
    }
}

pub const TRIAGE_WELCOME: &str = "Welcome to triage. What symptom brings you in today?";

// Slot values used after MAX_RETRIES failed answers.
const FALLBACK_SYMPTOM: &str = "an unspecified symptom";
const FALLBACK_SEVERITY: u8 = 5;
const FALLBACK_DURATION_HOURS: f64 = 24.0;
const FALLBACK_BREATHING: bool = false;

/// Colour rubric: breathing difficulty is red; then severity and duration
/// thresholds decide the rest.
pub fn assign_colour(slots: &TriageSlots) -> Result<ColourCode, AgentError> {
    let (Some(_), Some(severity), Some(duration), Some(breathing)) = (
        &slots.symptom,
        slots.severity,
        slots.duration_hours,
        slots.breathing_difficulty,
    ) else {
        return Err(AgentError::IncompleteTriage);
    };
    Ok(if breathing {
        ColourCode::Red
    } else if severity >= 8 {
        ColourCode::Orange
    } else if severity >= 5 || duration >= 48.0 {
        ColourCode::Yellow
    } else if severity >= 1 {
        ColourCode::Green
    } else {
        ColourCode::Cyan
    })
}

fn question(step: TriageStep) -> &'static str {
    match step {
        TriageStep::Greet | TriageStep::AskSymptom => "What symptom brings you in today?",
        TriageStep::AskSeverity => "On a scale from zero to ten, how severe is it?",
        TriageStep::AskDuration => "How long have you had it? For example, two hours or three days.",
        TriageStep::AskBreathing => "Are you having any difficulty breathing?",
        TriageStep::Done => "",
    }
}

fn reask(step: TriageStep) -> String {
    let hint = match step {
        TriageStep::AskSeverity => "I need a number from zero to ten.",
        TriageStep::AskDuration => "I need a length of time, like two hours.",
        TriageStep::AskBreathing => "Please answer yes or no.",
        _ => "I did not understand that.",
    };
    format!("Sorry, {hint} {}", question(step))
}

fn announcement(code: ColourCode) -> String {
    format!("Thank you. Your triage colour code is {code}. Please proceed to the anamnesis room.")
}

/// Advances the triage dialogue by at most one step.
pub fn triage_step(state: &TriageState, user_text: &str) -> (TriageState, Vec<String>) {
    let mut next = state.clone();
    if user_text.trim().is_empty() {
        return (next, vec![REPROMPT_REPLY.to_owned()]);
    }
    let exhausted = state.retries >= MAX_RETRIES;

    let reply = match state.step {
        TriageStep::Greet => {
            next.step = TriageStep::AskSymptom;
            TRIAGE_WELCOME.to_owned()
        }
        TriageStep::AskSymptom => {
            let symptom = parse::free_text(user_text).unwrap_or_else(|| FALLBACK_SYMPTOM.into());
            let reply = format!("I see, {symptom}. {}", question(TriageStep::AskSeverity));
            next.slots.symptom = Some(symptom);
            next.step = TriageStep::AskSeverity;
            reply
        }
        TriageStep::AskSeverity => match parse::severity(user_text) {
            None if !exhausted => return retry(next),
            parsed => {
                next.slots.severity = Some(parsed.unwrap_or(FALLBACK_SEVERITY));
                next.step = TriageStep::AskDuration;
                question(TriageStep::AskDuration).to_owned()
            }
        },
        TriageStep::AskDuration => match parse::duration_hours(user_text) {
            None if !exhausted => return retry(next),
            parsed => {
                next.slots.duration_hours = Some(parsed.unwrap_or(FALLBACK_DURATION_HOURS));
                next.step = TriageStep::AskBreathing;
                question(TriageStep::AskBreathing).to_owned()
            }
        },
        TriageStep::AskBreathing => match parse::yes_no(user_text) {
            None if !exhausted => return retry(next),
            parsed => {
                next.slots.breathing_difficulty = Some(parsed.unwrap_or(FALLBACK_BREATHING));
                let code = assign_colour(&next.slots).expect("all slots filled");
                next.code = Some(code);
                next.step = TriageStep::Done;
                announcement(code)
            }
        },
        TriageStep::Done => {
            let code = state.code.expect("done implies a code");
            format!("Your triage is complete. Your colour code is {code}.")
        }
    };
    next.retries = 0;
    (next, vec![reply])
}

fn retry(mut state: TriageState) -> (TriageState, Vec<String>) {
    state.retries += 1;
    let reply = reask(state.step);
    (state, vec![reply])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn replay(answers: &[&str]) -> (TriageState, Vec<String>) {
        let mut state = TriageState::default();
        let mut last = Vec::new();
        for a in answers {
            let (s, r) = triage_step(&state, a);
            state = s;
            last = r;
        }
        (state, last)
    }

    fn slots(severity: u8, duration: f64, breathing: bool) -> TriageSlots {
        TriageSlots {
            symptom: Some("cough".into()),
            severity: Some(severity),
            duration_hours: Some(duration),
            breathing_difficulty: Some(breathing),
        }
    }

    #[test]
    fn greet_transition() {
        let (state, replies) = triage_step(&TriageState::default(), "hello");
        assert_eq!(state.step, TriageStep::AskSymptom);
        assert_eq!(replies, [TRIAGE_WELCOME]);
    }

    #[test]
    fn severity_answer_advances() {
        let (state, _) = replay(&["hello", "headache"]);
        assert_eq!(state.step, TriageStep::AskSeverity);
        let (state, _) = triage_step(&state, "about seven out of ten");
        assert_eq!(state.slots.severity, Some(7));
        assert_eq!(state.step, TriageStep::AskDuration);
    }

    #[test]
    fn breathing_yes_is_red() {
        let (state, replies) = replay(&["hello", "chest pain", "seven", "two hours", "yes"]);
        assert_eq!(state.step, TriageStep::Done);
        assert_eq!(state.code, Some(ColourCode::Red));
        assert!(replies[0].contains("red"));
        assert_eq!(ColourCode::find_in(&replies[0]), Some(ColourCode::Red));
    }

    #[test]
    fn rubric_rows() {
        assert_eq!(assign_colour(&slots(0, 0.0, true)).unwrap(), ColourCode::Red);
        assert_eq!(assign_colour(&slots(9, 1.0, false)).unwrap(), ColourCode::Orange);
        assert_eq!(assign_colour(&slots(5, 1.0, false)).unwrap(), ColourCode::Yellow);
        assert_eq!(assign_colour(&slots(1, 48.0, false)).unwrap(), ColourCode::Yellow);
        assert_eq!(assign_colour(&slots(2, 1.0, false)).unwrap(), ColourCode::Green);
        assert_eq!(assign_colour(&slots(0, 0.0, false)).unwrap(), ColourCode::Cyan);
        assert_eq!(
            assign_colour(&TriageSlots::default()),
            Err(AgentError::IncompleteTriage)
        );
    }

    #[test]
    fn colour_is_total_and_monotone_in_severity() {
        for breathing in [false, true] {
            for duration in [0.0, 1.0, 47.9, 48.0, 500.0] {
                let codes: Vec<ColourCode> = (0..=10)
                    .map(|s| assign_colour(&slots(s, duration, breathing)).unwrap())
                    .collect();
                assert!(codes.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn unparseable_answer_reasks_then_falls_back() {
        let (mut state, _) = replay(&["hello", "dizzy"]);
        for attempt in 1..=MAX_RETRIES {
            let (s, replies) = triage_step(&state, "pretty bad");
            assert_eq!(s.step, TriageStep::AskSeverity);
            assert_eq!(s.retries, attempt);
            assert!(replies[0].starts_with("Sorry"));
            state = s;
        }
        let (state, _) = triage_step(&state, "pretty bad");
        assert_eq!(state.step, TriageStep::AskDuration);
        assert_eq!(state.slots.severity, Some(FALLBACK_SEVERITY));
        assert_eq!(state.retries, 0);
    }

    #[test]
    fn empty_message_reprompts_without_state_change() {
        let (state, _) = replay(&["hello"]);
        let (after, replies) = triage_step(&state, "  ");
        assert_eq!(after, state);
        assert_eq!(replies, [REPROMPT_REPLY]);
    }

    #[test]
    fn done_repeats_code() {
        let (state, _) = replay(&["hello", "rash", "1", "an hour", "no"]);
        assert_eq!(state.code, Some(ColourCode::Green));
        let (_, replies) = triage_step(&state, "what now?");
        assert!(replies[0].contains("green"));
    }
}
