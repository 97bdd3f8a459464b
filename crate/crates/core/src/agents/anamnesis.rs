use serde::{Deserialize, Serialize};

use super::parse;
use super::{MAX_RETRIES, REPROMPT_REPLY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnamnesisStep {
    Greet,
    ConfirmSymptom,
    AskAllergies,
    AskMedications,
    AskConditions,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnamnesisSlots {
    pub symptom_confirmed: Option<bool>,
    pub allergies: Option<String>,
    pub medications: Option<String>,
    pub prior_conditions: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnamnesisState {
    pub step: AnamnesisStep,
    pub slots: AnamnesisSlots,
    pub retries: u8,
}

impl Default for AnamnesisState {
    fn default() -> Self {
        AnamnesisState {
            step: AnamnesisStep::Greet,
            slots: AnamnesisSlots::default(),
            retries: 0,
        }
    }
}

pub const ANAMNESIS_WELCOME: &str =
    "Before we continue, do you still have the symptom you reported at triage?";

impl AnamnesisState {
    /// Summary sentence, available once the dialogue is done.
    pub fn summary(&self) -> Option<String> {
        if self.step != AnamnesisStep::Done {
            return None;
        }
        let s = &self.slots;
        let confirmed = if s.symptom_confirmed? { "yes" } else { "no" };
        Some(format!(
            "Thank you, here is your medical history. Symptom still present, {confirmed}. \
             Allergies, {}. Medications, {}. Prior conditions, {}.",
            s.allergies.as_deref()?,
            s.medications.as_deref()?,
            s.prior_conditions.as_deref()?,
        ))
    }
}

fn question(step: AnamnesisStep) -> &'static str {
    match step {
        AnamnesisStep::Greet | AnamnesisStep::ConfirmSymptom => ANAMNESIS_WELCOME,
        AnamnesisStep::AskAllergies => "Do you have any allergies?",
        AnamnesisStep::AskMedications => "Which medications are you currently taking?",
        AnamnesisStep::AskConditions => {
            "Have you been diagnosed with any other medical conditions in the past?"
        }
        AnamnesisStep::Done => "",
    }
}

const FALLBACK_TEXT: &str = "not stated";

pub fn anamnesis_step(state: &AnamnesisState, user_text: &str) -> (AnamnesisState, Vec<String>) {
    let mut next = state.clone();
    if user_text.trim().is_empty() {
        return (next, vec![REPROMPT_REPLY.to_owned()]);
    }
    let text = parse::free_text(user_text).unwrap_or_else(|| FALLBACK_TEXT.into());

    let reply = match state.step {
        AnamnesisStep::Greet => {
            next.step = AnamnesisStep::ConfirmSymptom;
            ANAMNESIS_WELCOME.to_owned()
        }
        AnamnesisStep::ConfirmSymptom => match parse::yes_no(user_text) {
            None if state.retries < MAX_RETRIES => {
                next.retries += 1;
                return (
                    next,
                    vec![format!("Sorry, please answer yes or no. {ANAMNESIS_WELCOME}")],
                );
            }
            parsed => {
                // an unclear answer is recorded as still present
                next.slots.symptom_confirmed = Some(parsed.unwrap_or(true));
                next.step = AnamnesisStep::AskAllergies;
                question(AnamnesisStep::AskAllergies).to_owned()
            }
        },
        AnamnesisStep::AskAllergies => {
            next.slots.allergies = Some(text);
            next.step = AnamnesisStep::AskMedications;
            question(AnamnesisStep::AskMedications).to_owned()
        }
        AnamnesisStep::AskMedications => {
            next.slots.medications = Some(text);
            next.step = AnamnesisStep::AskConditions;
            question(AnamnesisStep::AskConditions).to_owned()
        }
        AnamnesisStep::AskConditions => {
            next.slots.prior_conditions = Some(text);
            next.step = AnamnesisStep::Done;
            next.summary().expect("all slots filled")
        }
        AnamnesisStep::Done => state.summary().expect("done implies a summary"),
    };
    next.retries = 0;
    (next, vec![reply])
}
