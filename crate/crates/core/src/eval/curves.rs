use std::collections::BTreeSet;

use crate::vocoder::{LogSplit, NllLog};

/// Aligned NLL curves. Columns are `step`, then `<label>_train` and
/// `<label>_valid` for each log in the order given.
#[derive(Debug, Clone, PartialEq)]
pub struct NllCurves {
    pub header: Vec<String>,
    pub rows: Vec<(u64, Vec<Option<f64>>)>,
}

impl NllCurves {
    /// Comma-separated, missing values as empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for (step, cells) in &self.rows {
            out.push_str(&step.to_string());
            for c in cells {
                out.push(',');
                if let Some(v) = c {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    /// Whitespace-separated with a `#` header; missing values are `NaN`,
    /// which gnuplot skips.
    pub fn to_gnuplot(&self) -> String {
        let mut out = format!("# {}\n", self.header.join(" "));
        for (step, cells) in &self.rows {
            out.push_str(&step.to_string());
            for c in cells {
                match c {
                    Some(v) => out.push_str(&format!(" {v}")),
                    None => out.push_str(" NaN"),
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn export_nll_curves(logs: &[(&str, &NllLog)]) -> NllCurves {
    let mut header = vec!["step".to_string()];
    for (label, _) in logs {
        header.push(format!("{label}_train"));
        header.push(format!("{label}_valid"));
    }
    let steps: BTreeSet<u64> = logs
        .iter()
        .flat_map(|(_, log)| log.records.iter().map(|r| r.step))
        .collect();
    let lookup = |log: &NllLog, split: LogSplit, step: u64| {
        log.records
            .iter()
            .find(|r| r.split == split && r.step == step)
            .map(|r| r.nll)
    };
    let rows = steps
        .into_iter()
        .map(|step| {
            let cells = logs
                .iter()
                .flat_map(|(_, log)| {
                    [
                        lookup(log, LogSplit::Train, step),
                        lookup(log, LogSplit::Valid, step),
                    ]
                })
                .collect();
            (step, cells)
        })
        .collect();
    NllCurves { header, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocoder::NllRecord;

    fn log(points: &[(u64, LogSplit, f64)]) -> NllLog {
        NllLog {
            records: points
                .iter()
                .map(|&(step, split, nll)| NllRecord { step, split, nll })
                .collect(),
        }
    }

    #[test]
    fn two_logs_give_four_columns() {
        let a = log(&[(1, LogSplit::Train, 5.0), (1, LogSplit::Valid, 5.1)]);
        let b = log(&[(1, LogSplit::Train, 4.0), (1, LogSplit::Valid, 4.1)]);
        let c = export_nll_curves(&[("plain", &a), ("mbg", &b)]);
        assert_eq!(c.header, ["step", "plain_train", "plain_valid", "mbg_train", "mbg_valid"]);
        assert_eq!(c.to_csv(), "step,plain_train,plain_valid,mbg_train,mbg_valid\n1,5,5.1,4,4.1\n");
    }

    #[test]
    fn missing_steps_stay_empty() {
        let a = log(&[(1, LogSplit::Train, 5.0), (3, LogSplit::Train, 4.0)]);
        let b = log(&[(2, LogSplit::Valid, 4.5)]);
        let c = export_nll_curves(&[("plain", &a), ("mbg", &b)]);
        assert_eq!(
            c.to_csv(),
            "step,plain_train,plain_valid,mbg_train,mbg_valid\n1,5,,,\n2,,,,4.5\n3,4,,,\n"
        );
        assert!(c.to_gnuplot().contains("2 NaN NaN NaN 4.5"));
    }
}
