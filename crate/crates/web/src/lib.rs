//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes and returns plain numbers or strings; structured
//! results are JSON.

use docg_core::agents::{render_prompt as core_render_prompt, MockAgent, MockAgentConfig};
use docg_core::editor::{consistency, gain_only_value, reward_value, ActionSpace, ActionVector};
use docg_core::embedding::{cosine, EmbeddingProvider, SyntheticEmbedder, Content};
use serde_json::json;
use wasm_bindgen::prelude::*;

const DIM: usize = 16;
const TOPIC_WEIGHT: f64 = 0.7;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Editing dimensions of the text action space, as a JSON array of
/// `{name, description}`.
#[wasm_bindgen]
pub fn action_dims() -> String {
    let dims: Vec<_> = ActionSpace::text()
        .dims
        .iter()
        .map(|d| json!({ "name": d.name, "description": d.description }))
        .collect();
    serde_json::Value::Array(dims).to_string()
}

/// Full and gain-only rewards for an influence change and a consistency.
#[wasm_bindgen]
pub fn reward(delta_l: f64, consistency: f64) -> String {
    json!({
        "full": reward_value(delta_l, consistency),
        "gain_only": gain_only_value(delta_l),
    })
    .to_string()
}

fn actions(values: &[f64]) -> Result<ActionVector, String> {
    let space = ActionSpace::text();
    if values.len() != space.len() {
        return Err(format!("expected {} action values, got {}", space.len(), values.len()));
    }
    ActionVector::clamped(values.to_vec()).map_err(err)
}

/// The instruction an editing agent would receive for this action.
#[wasm_bindgen]
pub fn render_prompt(values: Vec<f64>, message: &str) -> Result<String, String> {
    Ok(core_render_prompt(&actions(&values)?, &ActionSpace::text(), message))
}

/// Embeds a `#topicN`-tagged message, moves it with the mock agent whose
/// first direction is `target_topic`, and reports how far it moved.
#[wasm_bindgen]
pub fn mock_edit(values: Vec<f64>, message: &str, target_topic: usize, step_size: f64, seed: u64) -> Result<String, String> {
    let action = actions(&values)?;
    let embedder = SyntheticEmbedder::new(DIM, seed, TOPIC_WEIGHT);
    let origin = embedder.embed(&Content::text(message)).map_err(err)?;
    let target = embedder.topic_direction(target_topic);
    let agent = MockAgent::new(&MockAgentConfig {
        dim: DIM,
        action_dims: action.len(),
        step_size,
        seed,
        planted: Some(target.clone()),
    })
    .map_err(err)?;
    let revised = agent.mock_edit(&origin, &action).map_err(err)?;
    let before = cosine(&origin, &target).map_err(err)?;
    let after = cosine(&revised, &target).map_err(err)?;
    Ok(json!({
        "topics": SyntheticEmbedder::topic_tags(message),
        "alignment_before": before,
        "alignment_after": after,
        "consistency": consistency(&revised, &origin).map_err(err)?,
    })
    .to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn reward_matches_hand_values() {
        let r = parse(&reward(0.36, 0.25));
        assert!((r["full"].as_f64().unwrap() - 0.3).abs() < 1e-12);
        assert!((r["gain_only"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn dims_and_prompt_agree() {
        let n = parse(&action_dims()).as_array().unwrap().len();
        let mut a = vec![0.0; n];
        assert!(render_prompt(a.clone(), "hi").unwrap().ends_with("hi"));
        a[0] = 0.5;
        assert!(render_prompt(a, "hi").unwrap().contains("+50%"));
        assert!(render_prompt(vec![0.0], "hi").is_err());
    }

    #[test]
    fn pushing_the_first_dimension_moves_toward_the_target() {
        let n = parse(&action_dims()).as_array().unwrap().len();
        let mut a = vec![0.0; n];
        let still = parse(&mock_edit(a.clone(), "hello #topic2", 0, 0.25, 1).unwrap());
        assert_eq!(still["consistency"].as_f64().unwrap(), 1.0);
        a[0] = 1.0;
        let moved = parse(&mock_edit(a, "hello #topic2", 0, 0.25, 1).unwrap());
        assert!(moved["alignment_after"].as_f64().unwrap() > moved["alignment_before"].as_f64().unwrap());
        assert!(moved["consistency"].as_f64().unwrap() < 1.0);
    }
}
