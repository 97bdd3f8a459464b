//! Scripted conversations replayed against a gateway, with expectations
//! checked at the end.
//!
//! ```toml
//! agent_id = "triage"
//! voice_id = "f1"
//! mode = "audio"
//! utterances = ["hello", "chest pain", "seven", "two hours", "yes"]
//!
//! [expect]
//! colour = "red"
//! masked = true
//! ```

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::ColourCode;
use crate::backends::VoiceDescriptor;
use crate::gateway::{ClientError, ConfigError, Gateway, GatewayClient, GatewayConfig, Transport};
use crate::protocol::{encode_sim_audio, CodecError, ErrorInfo, TurnReport};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid script: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("script has no utterances")]
    Empty,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceMode {
    /// Utterances are encoded as SIMA1 audio and go through STT.
    #[default]
    Audio,
    Text,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expectation {
    pub colour: Option<ColourCode>,
    /// Substrings the final reply must contain.
    pub reply_contains: Vec<String>,
    /// Required masking status of every turn.
    pub masked: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    #[serde(default)]
    pub name: Option<String>,
    pub agent_id: String,
    #[serde(default)]
    pub voice_id: Option<String>,
    #[serde(default)]
    pub mode: UtteranceMode,
    pub utterances: Vec<String>,
    #[serde(default)]
    pub expect: Expectation,
}

impl ScenarioScript {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let script: Self = toml::from_str(text)?;
        if script.utterances.is_empty() {
            return Err(ScenarioError::Empty);
        }
        Ok(script)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut script = Self::from_toml(&text)?;
        if script.name.is_none() {
            script.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(script)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TurnRecord {
    pub utterance: String,
    pub transcript: Option<String>,
    pub reply: String,
    pub report: Option<TurnReport>,
    pub error: Option<ErrorInfo>,
    pub ordering_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub turns: Vec<TurnRecord>,
    pub colour: Option<ColourCode>,
    /// One line per unmet expectation; empty when the script passed.
    pub failures: Vec<String>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn final_reply(&self) -> &str {
        self.turns.last().map_or("", |t| t.reply.as_str())
    }
}

/// The voice scripted callers speak with.
pub fn caller_voice() -> VoiceDescriptor {
    VoiceDescriptor::new("caller", "Scripted caller", 400, 120)
}

fn announced_colour(reply: &str) -> Option<ColourCode> {
    let at = reply.find("colour code")?;
    ColourCode::find_in(&reply[at..])
}

/// Plays the script over an already greeted client.
pub async fn run_script<T: Transport>(
    client: &mut GatewayClient<T>,
    script: &ScenarioScript,
) -> Result<ScenarioOutcome, ScenarioError> {
    client.select_agent(&script.agent_id).await?;
    if let Some(voice) = &script.voice_id {
        client.select_voice(voice).await?;
    }
    let caller = caller_voice();

    let mut turns = Vec::with_capacity(script.utterances.len());
    for utterance in &script.utterances {
        let started = Instant::now();
        let nonce = match script.mode {
            UtteranceMode::Text => client.send_text(utterance).await?,
            UtteranceMode::Audio => client.send_audio(encode_sim_audio(utterance, &caller)?).await?,
        };
        let result = client.collect_turn(nonce, started).await?;
        turns.push(TurnRecord {
            utterance: utterance.clone(),
            transcript: result.transcript.clone(),
            reply: result.reply_text(),
            ordering_ok: result.ordering_ok(),
            report: result.report,
            error: result.error,
        });
    }

    let colour = turns.iter().rev().find_map(|t| announced_colour(&t.reply));
    let failures = check(script, &turns, colour);
    Ok(ScenarioOutcome {
        name: script.name.clone().unwrap_or_else(|| script.agent_id.clone()),
        turns,
        colour,
        failures,
    })
}

fn check(script: &ScenarioScript, turns: &[TurnRecord], colour: Option<ColourCode>) -> Vec<String> {
    let mut failures = Vec::new();
    for (i, t) in turns.iter().enumerate() {
        if let Some(err) = &t.error {
            failures.push(format!("turn {}: error {:?}: {}", i + 1, err.code, err.detail));
        } else if !t.ordering_ok {
            failures.push(format!("turn {}: messages out of order", i + 1));
        }
        if script.mode == UtteranceMode::Audio && t.transcript.as_deref() != Some(t.utterance.as_str()) {
            failures.push(format!(
                "turn {}: transcript {:?} differs from utterance {:?}",
                i + 1,
                t.transcript,
                t.utterance
            ));
        }
    }

    let expect = &script.expect;
    if let Some(want) = expect.colour {
        if colour != Some(want) {
            let got = colour.map_or("none".to_owned(), |c| c.to_string());
            failures.push(format!("colour: expected {want}, got {got}"));
        }
    }
    let last = turns.last().map_or("", |t| t.reply.as_str());
    for needle in &expect.reply_contains {
        if !last.contains(needle.as_str()) {
            failures.push(format!("final reply lacks {needle:?}: {last:?}"));
        }
    }
    if let Some(want) = expect.masked {
        for (i, t) in turns.iter().enumerate() {
            if let Some(report) = &t.report {
                if report.masked != want {
                    failures.push(format!(
                        "turn {}: masked is {}, expected {want} (gaps {:?})",
                        i + 1,
                        report.masked,
                        report.gaps_ms
                    ));
                }
            }
        }
    }
    failures
}

/// Runs the script on a fresh in-process gateway in simulated time with
/// builtin backends.
pub async fn simulate(
    script: &ScenarioScript,
    mut config: GatewayConfig,
) -> Result<ScenarioOutcome, ScenarioError> {
    config.time_mode = crate::backends::TimeMode::Simulated;
    config.force_builtin();
    let gateway = Gateway::new(config)?;
    let mut client = gateway.connect();
    client.hello().await?;
    let outcome = run_script(&mut client, script).await?;
    client.bye().await?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIAGE: &str = r#"
agent_id = "triage"
utterances = ["hello", "chest pain", "seven", "two hours", "yes"]
[expect]
colour = "red"
"#;

    #[test]
    fn parses_with_defaults() {
        let s = ScenarioScript::from_toml(TRIAGE).unwrap();
        assert_eq!(s.mode, UtteranceMode::Audio);
        assert_eq!(s.voice_id, None);
        assert_eq!(s.expect.colour, Some(ColourCode::Red));
    }

    #[test]
    fn rejects_empty_and_unknown_fields() {
        assert!(matches!(
            ScenarioScript::from_toml("agent_id = \"triage\"\nutterances = []"),
            Err(ScenarioError::Empty)
        ));
        assert!(ScenarioScript::from_toml("agent_id = \"x\"\nutterances = [\"a\"]\nbogus = 1").is_err());
        assert!(ScenarioScript::from_toml("agent_id = \"x\"\nutterances = [\"a\"]\n[expect]\ncolour = \"purple\"").is_err());
    }

    #[test]
    fn colour_comes_from_the_announcement() {
        assert_eq!(
            announced_colour("Thank you. Your triage colour code is orange. Please proceed."),
            Some(ColourCode::Orange)
        );
        assert_eq!(announced_colour("red herring"), None);
    }

    #[tokio::test]
    async fn triage_script_passes_in_simulation() {
        let s = ScenarioScript::from_toml(TRIAGE).unwrap();
        let outcome = simulate(&s, GatewayConfig::simulated()).await.unwrap();
        assert!(outcome.passed(), "{:?}", outcome.failures);
        assert_eq!(outcome.turns.len(), 5);
    }

    #[tokio::test]
    async fn wrong_expectation_is_reported() {
        let mut s = ScenarioScript::from_toml(TRIAGE).unwrap();
        s.expect.colour = Some(ColourCode::Green);
        s.expect.reply_contains = vec!["zebra".into()];
        let outcome = simulate(&s, GatewayConfig::simulated()).await.unwrap();
        assert_eq!(outcome.failures.len(), 2, "{:?}", outcome.failures);
        assert!(outcome.failures[0].contains("expected green, got red"));
    }
}
