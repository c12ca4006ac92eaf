//! Output plumbing: JSON or CSV, stdout or file.

use std::io::Write;

use permclt::report::SuiteReport;
use permclt::Result;
use serde_json::{json, Value};

use crate::GlobalArgs;

/// A command's primary output in both formats.
pub struct Document {
    pub json: Value,
    pub csv: String,
}

pub fn emit(global: &GlobalArgs, doc: &Document) -> Result<()> {
    let text = match global.format.as_str() {
        "csv" => doc.csv.clone(),
        _ => {
            let mut s = serde_json::to_string_pretty(&doc.json)?;
            s.push('\n');
            s
        }
    };
    match &global.out {
        Some(path) => {
            std::fs::write(path, text)?;
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

pub fn verify_doc(report: &SuiteReport, global: &GlobalArgs) -> Document {
    let json = serde_json::to_value(report).expect("suite report serializes");
    Document { json, csv: suite_csv(std::slice::from_ref(report), global) }
}

pub fn verify_all_doc(reports: &[SuiteReport], global: &GlobalArgs) -> Document {
    let json = json!({
        "schema": permclt::report::SCHEMA_VERSION,
        "command": "verify",
        "pass": reports.iter().all(|r| r.pass),
        "suites": reports,
    });
    Document { json, csv: suite_csv(reports, global) }
}

fn suite_csv(reports: &[SuiteReport], _global: &GlobalArgs) -> String {
    let mut csv = String::from("suite,check,target,estimate,tolerance,tolerance_kind,pass\n");
    for report in reports {
        for c in &report.checks {
            csv.push_str(&format!(
                "{},{:?},{},{},{},{},{}\n",
                report.suite, c.name, c.target, c.estimate, c.tolerance, c.tolerance_kind, c.pass
            ));
        }
    }
    csv
}
