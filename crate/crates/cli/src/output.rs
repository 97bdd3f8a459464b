use voxhub_core::bench::BenchReport;
use voxhub_core::protocol::TurnReport;
use voxhub_core::scenario::ScenarioOutcome;
use voxhub_core::stats::LatencyStats;

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn report_line(r: &TurnReport) -> String {
    format!(
        "stt {} ms, agent {} ms, tts {:?} ms, first audio {} ms, gaps {:?} ms, masked {}",
        r.stt_ms,
        r.agent_ms,
        r.tts_ms_per_chunk,
        r.first_audio_ms,
        r.gaps_ms,
        yes_no(r.masked)
    )
}

pub fn print_outcome(outcome: &ScenarioOutcome) {
    println!("== {}", outcome.name);
    for (i, turn) in outcome.turns.iter().enumerate() {
        println!("[{}] > {}", i + 1, turn.utterance);
        if let Some(err) = &turn.error {
            println!("    ! {:?}: {}", err.code, err.detail);
        } else {
            println!("    < {}", turn.reply);
        }
        if let Some(report) = &turn.report {
            println!("      {}", report_line(report));
        }
    }
    if let Some(colour) = outcome.colour {
        println!("colour code: {colour}");
    }
    if outcome.passed() {
        println!("PASS");
    } else {
        println!("FAIL");
        for f in &outcome.failures {
            println!("  - {f}");
        }
    }
}

fn stats_line(name: &str, stats: &Option<LatencyStats>) -> String {
    match stats {
        Some(s) => format!(
            "{name:<12} n={} mean={:.1} p50={} p95={} max={} ms",
            s.count, s.mean_ms, s.p50_ms, s.p95_ms, s.max_ms
        ),
        None => format!("{name:<12} no samples"),
    }
}

pub fn print_bench(r: &BenchReport) {
    println!(
        "{} sessions x {} turns in {} ms: {} completed, {} failed",
        r.sessions, r.turns_per_session, r.elapsed_ms, r.completed_turns, r.failed_turns
    );
    println!("{}", stats_line("first_audio", &r.first_audio));
    println!("{}", stats_line("max_gap", &r.max_gap));
    println!("{}", stats_line("overhead", &r.overhead));
    println!("leakage {}, ordering violations {}", r.leakage, r.ordering_violations);
    for e in &r.session_errors {
        println!("  ! {e}");
    }
}
