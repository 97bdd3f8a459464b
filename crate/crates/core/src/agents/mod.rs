//! Builtin scripted agents for a virtual point of care: a triage desk that
//! assigns a colour code and an anamnesis desk that collects medical
//! history. Both are plain state machines; one state value per conversation.

mod anamnesis;
mod parse;
mod triage;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use anamnesis::{anamnesis_step, AnamnesisSlots, AnamnesisState, AnamnesisStep, ANAMNESIS_WELCOME};
pub use parse::{duration_hours, severity, yes_no};
pub use triage::{
    assign_colour, triage_step, ColourCode, TriageSlots, TriageState, TriageStep, TRIAGE_WELCOME,
};

/// Re-asks per question before the slot falls back to a default.
pub const MAX_RETRIES: u8 = 3;

/// Reply to an empty or re-prompt message. State is left unchanged.
pub const REPROMPT_REPLY: &str = "Sorry, I did not catch that. Could you repeat?";

/// What the gateway forwards to an agent when the transcript is empty.
pub const REPROMPT_MESSAGE: &str = "/reprompt";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("triage slots are incomplete")]
    IncompleteTriage,
    #[error("unknown colour code {0:?}")]
    UnknownColour(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinAgentKind {
    Triage,
    Anamnesis,
    /// Replies with the user's message. Handy for timing experiments.
    Echo,
}

impl BuiltinAgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BuiltinAgentKind::Triage => "triage",
            BuiltinAgentKind::Anamnesis => "anamnesis",
            BuiltinAgentKind::Echo => "echo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "triage" => Some(BuiltinAgentKind::Triage),
            "anamnesis" => Some(BuiltinAgentKind::Anamnesis),
            "echo" => Some(BuiltinAgentKind::Echo),
            _ => None,
        }
    }
}

/// Conversation state of any builtin agent.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentState {
    Triage(TriageState),
    Anamnesis(AnamnesisState),
    Echo,
}

impl AgentState {
    pub fn new(kind: BuiltinAgentKind) -> Self {
        match kind {
            BuiltinAgentKind::Triage => AgentState::Triage(TriageState::default()),
            BuiltinAgentKind::Anamnesis => AgentState::Anamnesis(AnamnesisState::default()),
            BuiltinAgentKind::Echo => AgentState::Echo,
        }
    }

    pub fn is_done(&self) -> bool {
        match self {
            AgentState::Triage(s) => s.step == TriageStep::Done,
            AgentState::Anamnesis(s) => s.step == AnamnesisStep::Done,
            AgentState::Echo => false,
        }
    }

    /// Feeds one user message and returns the replies.
    pub fn step(&mut self, message: &str) -> Vec<String> {
        let message = if message.trim() == REPROMPT_MESSAGE { "" } else { message };
        match self {
            AgentState::Triage(s) => {
                let (next, replies) = triage_step(s, message);
                *s = next;
                replies
            }
            AgentState::Anamnesis(s) => {
                let (next, replies) = anamnesis_step(s, message);
                *s = next;
                replies
            }
            AgentState::Echo if message.trim().is_empty() => vec![REPROMPT_REPLY.to_owned()],
            AgentState::Echo => vec![message.to_owned()],
        }
    }
}
