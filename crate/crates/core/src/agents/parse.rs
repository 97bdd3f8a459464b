//! Tiny answer extractors for the scripted agents.

const NUMBER_WORDS: [&str; 11] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric() && c != '.')
        .map(|w| w.trim_matches('.').to_lowercase())
        .filter(|w| !w.is_empty())
}

fn number_word(word: &str) -> Option<u32> {
    NUMBER_WORDS
        .iter()
        .position(|w| *w == word)
        .map(|i| i as u32)
}

/// Severity on the 0 to 10 scale: the first integer token in range, else the
/// first number word.
pub fn severity(text: &str) -> Option<u8> {
    let tokens: Vec<String> = words(text).collect();
    tokens
        .iter()
        .find_map(|t| t.parse::<u8>().ok().filter(|n| *n <= 10))
        .or_else(|| tokens.iter().find_map(|t| number_word(t).map(|n| n as u8)))
}

/// Duration in hours. Accepts digits, decimals, number words and "a"/"an",
/// followed by an optional unit (minutes, hours, days, weeks; hours if
/// absent).
pub fn duration_hours(text: &str) -> Option<f64> {
    let tokens: Vec<String> = words(text).collect();
    let (idx, amount) = tokens.iter().enumerate().find_map(|(i, t)| {
        let value = t
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .or_else(|| number_word(t).map(f64::from))
            .or_else(|| matches!(t.as_str(), "a" | "an").then_some(1.0))?;
        Some((i, value))
    })?;
    let unit = tokens.get(idx + 1).map(String::as_str).unwrap_or("hours");
    let scale = match unit.trim_end_matches('s') {
        "minute" | "min" => 1.0 / 60.0,
        "hour" | "hr" | "h" => 1.0,
        "day" => 24.0,
        "week" => 168.0,
        // "a" without a unit is not a duration
        _ if matches!(tokens[idx].as_str(), "a" | "an") => return None,
        _ => 1.0,
    };
    Some(amount * scale)
}

const YES: &[&str] = &["yes", "yeah", "yep", "y", "sure", "affirmative", "correct", "still"];
const NO: &[&str] = &["no", "nope", "n", "not", "none", "nah", "never"];

pub fn yes_no(text: &str) -> Option<bool> {
    for w in words(text) {
        if YES.contains(&w.as_str()) {
            return Some(true);
        }
        if NO.contains(&w.as_str()) {
            return Some(false);
        }
    }
    None
}

/// Trimmed free-text answer, or `None` when there is nothing to record.
pub fn free_text(text: &str) -> Option<String> {
    let t = text.split_whitespace().collect::<Vec<_>>().join(" ");
    (!t.is_empty()).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn severity_extraction() {
        assert_eq!(severity("about seven out of ten"), Some(7));
        assert_eq!(severity("seven"), Some(7));
        assert_eq!(severity("7/10"), Some(7));
        assert_eq!(severity("it's a 12, no, 9"), Some(9));
        assert_eq!(severity("maybe 3"), Some(3));
        assert_eq!(severity("0"), Some(0));
        assert_eq!(severity("pretty bad"), None);
        assert_eq!(severity(""), None);
    }

    #[test]
    fn duration_extraction() {
        assert_eq!(duration_hours("two hours"), Some(2.0));
        assert_eq!(duration_hours("3 days"), Some(72.0));
        assert_eq!(duration_hours("30 minutes"), Some(0.5));
        assert_eq!(duration_hours("a week"), Some(168.0));
        assert_eq!(duration_hours("1.5 hours"), Some(1.5));
        assert_eq!(duration_hours("since 5"), Some(5.0));
        assert_eq!(duration_hours("a while"), None);
        assert_eq!(duration_hours("since yesterday"), None);
    }

    #[test]
    fn yes_no_extraction() {
        assert_eq!(yes_no("yes"), Some(true));
        assert_eq!(yes_no("Yes, I do."), Some(true));
        assert_eq!(yes_no("no"), Some(false));
        assert_eq!(yes_no("I am not"), Some(false));
        assert_eq!(yes_no("what?"), None);
    }
}
