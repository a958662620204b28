use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::editor::RewardKind;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageResult {
    pub id: String,
    pub l_origin: f64,
    pub l_final: f64,
    /// `(l_final - l_origin) / l_origin`.
    pub relative_gain: f64,
    pub consistency: f64,
    pub final_id: String,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub rows: Vec<MessageResult>,
    /// Messages left out because their origin influence was 0.
    pub excluded: Vec<String>,
    pub mean_gain: f64,
    pub mean_consistency: f64,
}

impl EvalReport {
    pub fn new(method: impl Into<String>, rows: Vec<MessageResult>, excluded: Vec<String>) -> Self {
        let n = rows.len().max(1) as f64;
        let mean_gain = rows.iter().map(|r| r.relative_gain).sum::<f64>() / n;
        let mean_consistency = if rows.is_empty() {
            0.0
        } else {
            rows.iter().map(|r| r.consistency).sum::<f64>() / n
        };
        Self {
            method: method.into(),
            rows,
            excluded,
            mean_gain,
            mean_consistency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalSuite {
    pub reports: Vec<EvalReport>,
}

impl EvalSuite {
    pub fn get(&self, method: &str) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.method == method)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Method | Diffusion Gain | Consistency | Messages | Excluded |\n|---|---:|---:|---:|---:|\n");
        for r in &self.reports {
            let _ = writeln!(
                out,
                "| {} | {:.2}% | {:.4} | {} | {} |",
                r.method,
                100.0 * r.mean_gain,
                r.mean_consistency,
                r.rows.len(),
                r.excluded.len()
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub reward: RewardKind,
    pub seed: u64,
    pub mean_gain: f64,
    pub mean_consistency: f64,
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut out = String::from("reward,seed,mean_gain,mean_consistency\n");
    for r in rows {
        let kind = match r.reward {
            RewardKind::Full => "full",
            RewardKind::GainOnly => "gain_only",
        };
        let _ = writeln!(out, "{kind},{},{},{}", r.seed, r.mean_gain, r.mean_consistency);
    }
    crate::io::write_string(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(l0: f64, l1: f64, c: f64) -> MessageResult {
        MessageResult {
            id: "m".into(),
            l_origin: l0,
            l_final: l1,
            relative_gain: (l1 - l0) / l0,
            consistency: c,
            final_id: "m".into(),
            truncated: false,
        }
    }

    proptest! {
        #[test]
        fn aggregates_match_rows(v in prop::collection::vec((0.01f64..1.0, 0.0f64..1.0, 0.0f64..=1.0), 1..30)) {
            let rows: Vec<_> = v.iter().map(|&(a, b, c)| row(a, b, c)).collect();
            let rep = EvalReport::new("x", rows.clone(), vec![]);
            let g: f64 = rows.iter().map(|r| (r.l_final - r.l_origin) / r.l_origin).sum::<f64>() / rows.len() as f64;
            let c: f64 = rows.iter().map(|r| r.consistency).sum::<f64>() / rows.len() as f64;
            prop_assert!((rep.mean_gain - g).abs() <= 1e-12 * (1.0 + g.abs()));
            prop_assert!((rep.mean_consistency - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn markdown_has_one_line_per_method() {
        let suite = EvalSuite {
            reports: vec![EvalReport::new("learned", vec![row(0.2, 0.3, 0.9)], vec![])],
        };
        let md = suite.to_markdown();
        assert!(md.contains("| learned | 50.00% | 0.9000 | 1 | 0 |"));
    }

    #[test]
    fn ablation_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_ablation_csv(
            &p,
            &[AblationRow {
                reward: RewardKind::GainOnly,
                seed: 3,
                mean_gain: 0.25,
                mean_consistency: 0.5,
            }],
        )
        .unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "reward,seed,mean_gain,mean_consistency\ngain_only,3,0.25,0.5\n");
    }
}
