use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use wildset_core::dedup::{lower_bound_accuracy, read_verdicts, round_display, summarize, DedupSummary, Label};

use crate::run::Run;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Verdicts (possibly labelled by reviewers) from `dedup`.
    #[arg(long)]
    verdicts: PathBuf,
    /// Number of query images the verdicts cover.
    #[arg(long)]
    queries: usize,
    /// Measured accuracy on the test set, as a fraction.
    #[arg(long)]
    accuracy: Option<f64>,
    /// Test-set size for the bound; defaults to --queries.
    #[arg(long)]
    test_size: Option<u64>,
    /// Duplicate count for the bound; defaults to reviewer-confirmed queries,
    /// or flagged queries when nothing has been reviewed.
    #[arg(long)]
    duplicates: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Bound {
    measured: f64,
    duplicates: u64,
    duplicates_basis: &'static str,
    test_size: u64,
    lower_bound: f64,
    lower_bound_display: String,
}

#[derive(Serialize)]
struct Report {
    summary: DedupSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<Bound>,
}

pub fn run(a: ReportArgs, run: &mut Run) -> Result<()> {
    let verdicts = {
        let r = run.open("--verdicts", &a.verdicts)?;
        read_verdicts(r).with_context(|| format!("--verdicts: {}", a.verdicts.display()))?
    };
    let summary = summarize(&verdicts, a.queries);
    let accuracy = match a.accuracy {
        None => None,
        Some(measured) => {
            let reviewed = verdicts.iter().any(|v| v.label != Label::Unreviewed);
            let (duplicates, basis) = match a.duplicates {
                Some(d) => (d, "given"),
                None if reviewed => (summary.confirmed_queries as u64, "confirmed"),
                None => (summary.flagged_queries as u64, "flagged"),
            };
            let test_size = a.test_size.unwrap_or(a.queries as u64);
            let lower_bound = lower_bound_accuracy(measured, duplicates, test_size).context("--accuracy")?;
            Some(Bound {
                measured,
                duplicates,
                duplicates_basis: basis,
                test_size,
                lower_bound,
                lower_bound_display: format!("{:.1}%", 100.0 * round_display(lower_bound)),
            })
        }
    };
    let report = Report { summary, accuracy };
    run.write_or_print("--out", a.out.as_deref(), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)?;
        Ok(())
    })
}
