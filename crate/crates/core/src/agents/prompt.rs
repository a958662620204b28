//! Editing instructions rendered from an action vector.
//!
//! Template, one line per retained dimension:
//!
//! ```text
//! Rewrite the message below, adjusting these aspects:
//! - adjust Emotion: +50% (stirs high-energy feelings such as awe, excitement or amusement)
//! Preserve the original meaning.
//!
//! Message:
//! <content>
//! ```
//!
//! Dimensions with `|a_i| < 0.05` are left out. With none left, only the
//! fidelity clause and the message remain.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::editor::{ActionSpace, ActionVector, Modality};

pub const OMIT_BELOW: f64 = 0.05;
pub const FIDELITY_CLAUSE: &str = "Preserve the original meaning.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditInstruction {
    pub dim: String,
    pub percent: i32,
    pub text: String,
}

pub fn instructions(action: &ActionVector, space: &ActionSpace) -> Vec<EditInstruction> {
    action
        .values()
        .iter()
        .zip(&space.dims)
        .filter(|(a, _)| a.abs() >= OMIT_BELOW)
        .map(|(a, d)| {
            let percent = (a * 100.0).round() as i32;
            EditInstruction {
                dim: d.name.clone(),
                percent,
                text: format!("adjust {}: {:+}% ({})", d.name, percent, d.description),
            }
        })
        .collect()
}

pub fn render_prompt(action: &ActionVector, space: &ActionSpace, content: &str) -> String {
    let lines = instructions(action, space);
    let mut out = String::new();
    if !lines.is_empty() {
        let header = match space.modality {
            Modality::Text => "Rewrite the message below, adjusting these aspects:",
            Modality::Image => "Write a text-to-image prompt for the message below, adjusting these visual aspects:",
        };
        out.push_str(header);
        out.push('\n');
        for l in &lines {
            let _ = writeln!(out, "- {}", l.text);
        }
    }
    out.push_str(FIDELITY_CLAUSE);
    out.push_str("\n\nMessage:\n");
    out.push_str(content);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_action_has_no_dimension_lines() {
        let p = render_prompt(&ActionVector::zeros(6), &ActionSpace::text(), "hello");
        assert_eq!(p, "Preserve the original meaning.\n\nMessage:\nhello");
    }

    #[test]
    fn emotion_line() {
        let space = ActionSpace::text();
        let mut a = vec![0.0; 6];
        a[space.index_of("Emotion").unwrap()] = 0.5;
        let p = render_prompt(&ActionVector::new(a).unwrap(), &space, "x");
        let line = p.lines().find(|l| l.contains("Emotion")).unwrap();
        assert!(line.contains("+50%"));
        assert!(line.contains(&space.dims[2].description));
        assert_eq!(p.lines().filter(|l| l.starts_with("- ")).count(), 1);
    }

    #[test]
    fn all_negative_boundary() {
        let p = render_prompt(&ActionVector::clamped(vec![-1.0; 8]).unwrap(), &ActionSpace::image(), "x");
        assert_eq!(p.matches("-100%").count(), 8);
        assert!(p.starts_with("Write a text-to-image prompt"));
    }

    #[test]
    fn small_components_are_omitted() {
        let p = render_prompt(&ActionVector::new(vec![0.049, -0.049, 0.05, 0.0, 0.0, 0.0]).unwrap(), &ActionSpace::text(), "x");
        assert_eq!(p.lines().filter(|l| l.starts_with("- ")).count(), 1);
        assert!(p.contains("Social Currency") == false && p.contains("+5%"));
    }

    proptest! {
        #[test]
        fn distinct_rounded_patterns_give_distinct_prompts(
            a in prop::collection::vec(-0.99f64..0.99, 6),
            b in prop::collection::vec(-0.99f64..0.99, 6),
        ) {
            let space = ActionSpace::text();
            let pattern = |v: &[f64]| instructions(&ActionVector::new(v.to_vec()).unwrap(), &space)
                .into_iter().map(|i| (i.dim, i.percent)).collect::<Vec<_>>();
            let (pa, pb) = (pattern(&a), pattern(&b));
            let ra = render_prompt(&ActionVector::new(a).unwrap(), &space, "m");
            let rb = render_prompt(&ActionVector::new(b).unwrap(), &space, "m");
            prop_assert_eq!(pa == pb, ra == rb);
        }
    }
}
