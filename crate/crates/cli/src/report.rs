use std::fmt::Write;
use std::fs;
use std::path::Path;

use stablab::bounds::display_value;
use stablab::harness::{BoundCheck, SweepReport, REPORT_FILE};

fn result(c: &BoundCheck) -> &'static str {
    match c.pass {
        None => "info",
        Some(_) if c.vacuous => "vacuous",
        Some(true) => "PASS",
        Some(false) => "FAIL",
    }
}

/// Markdown summary of `dir/report.json`, with its overall verdict.
pub fn render(dir: &Path) -> Result<(String, bool), Box<dyn std::error::Error + Send + Sync>> {
    let r: SweepReport = serde_json::from_str(&fs::read_to_string(dir.join(REPORT_FILE))?)?;
    let mut s = String::new();
    writeln!(s, "# {}", r.statistic)?;
    writeln!(s)?;
    writeln!(
        s,
        "- n = {}, trials = {}, failed trials = {}",
        r.n,
        r.trials,
        r.failed_trials.len()
    )?;
    writeln!(s, "- declared γ = {}", display_value(r.gamma))?;
    writeln!(
        s,
        "- mean Δ = {} ± {}",
        display_value(r.mean_delta.mean),
        display_value(r.mean_delta.se)
    )?;
    writeln!(
        s,
        "- mean Δ² = {} ± {}",
        display_value(r.mean_delta_sq.mean),
        display_value(r.mean_delta_sq.se)
    )?;
    for t in &r.tails {
        writeln!(
            s,
            "- (1−{}) quantile of Δ = {}",
            t.delta,
            display_value(t.quantile)
        )?;
    }
    if let Some(b) = &r.beta {
        writeln!(
            s,
            "- β = {} (bound {}, {})",
            display_value(b.beta),
            display_value(b.bound),
            if b.pass { "PASS" } else { "FAIL" }
        )?;
    }
    writeln!(s)?;
    writeln!(s, "| bound | δ | value | observed | interval | result |")?;
    writeln!(s, "|---|---|---|---|---|---|")?;
    for c in &r.checks {
        writeln!(
            s,
            "| {} | {} | {} | {} | [{}, {}] | {} |",
            c.id,
            c.delta.map_or("".into(), |d| d.to_string()),
            display_value(c.value),
            display_value(c.statistic),
            display_value(c.ci_low),
            display_value(c.ci_high),
            result(c)
        )?;
    }
    writeln!(s)?;
    writeln!(s, "overall: {}", if r.all_pass { "PASS" } else { "FAIL" })?;
    Ok((s, r.all_pass))
}
