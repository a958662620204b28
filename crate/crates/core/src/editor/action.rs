use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest magnitude an action component may take.
pub const ACTION_LIMIT: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Modality::Text),
            "image" => Ok(Modality::Image),
            other => Err(Error::InvalidInput(format!("unknown modality {other:?} (text|image)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDim {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub modality: Modality,
    pub dims: Vec<ActionDim>,
}

const TEXT_DIMS: [(&str, &str); 6] = [
    ("Social Currency", "how much passing the message on flatters the person who shares it"),
    ("Triggers", "ties to everyday situations that keep bringing the message back to mind"),
    ("Emotion", "stirs high-energy feelings such as awe, excitement or amusement"),
    ("Public", "easy to pass along and noticeable once shared"),
    ("Practical Value", "gives readers something concrete and useful to act on"),
    ("Stories", "carries the point inside a narrative or a memorable hook"),
];

const IMAGE_DIMS: [(&str, &str); 8] = [
    ("Colorfulness", "vivid, saturated palette with strong colour contrast"),
    ("Human Scene", "people present in the scene to draw empathy"),
    ("Emotion", "expressions or moments that provoke a strong feeling"),
    ("Professional", "polished, studio-grade photographic quality"),
    ("Brightness", "well-lit, luminous overall exposure"),
    ("Clarity", "sharp focus with crisp, visible detail"),
    ("Visual Balance", "elements spread evenly across the frame"),
    ("Focus of the Picture", "one clear subject without distracting clutter"),
];

impl ActionSpace {
    pub fn text() -> Self {
        Self::from_table(Modality::Text, &TEXT_DIMS)
    }

    pub fn image() -> Self {
        Self::from_table(Modality::Image, &IMAGE_DIMS)
    }

    pub fn for_modality(m: Modality) -> Self {
        match m {
            Modality::Text => Self::text(),
            Modality::Image => Self::image(),
        }
    }

    fn from_table(modality: Modality, table: &[(&str, &str)]) -> Self {
        Self {
            modality,
            dims: table
                .iter()
                .map(|(n, d)| ActionDim {
                    name: (*n).into(),
                    description: (*d).into(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.dims.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }
}

/// Per-dimension edit intensities, each strictly inside `(-1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionVector(Vec<f64>);

impl ActionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && v.abs() < 1.0)) {
            return Err(Error::InvalidInput(format!("action component {v} outside (-1, 1)")));
        }
        Ok(Self(values))
    }

    /// Clamps each component into `[-ACTION_LIMIT, ACTION_LIMIT]`.
    pub fn clamped(values: Vec<f64>) -> Result<Self> {
        Self::new(values.into_iter().map(|v| v.clamp(-ACTION_LIMIT, ACTION_LIMIT)).collect())
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_space(&self, space: &ActionSpace) -> Result<()> {
        if self.len() != space.len() {
            return Err(Error::shape("action vector", space.len(), self.len()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_sizes() {
        assert_eq!(ActionSpace::text().len(), 6);
        assert_eq!(ActionSpace::image().len(), 8);
        assert_eq!(ActionSpace::text().index_of("Emotion"), Some(2));
        assert_eq!(ActionSpace::image().names()[7], "Focus of the Picture");
    }

    #[test]
    fn actions_must_be_strictly_inside() {
        assert!(ActionVector::new(vec![0.5, -0.99]).is_ok());
        assert!(ActionVector::new(vec![1.0]).is_err());
        assert!(ActionVector::new(vec![f64::NAN]).is_err());
        assert_eq!(ActionVector::clamped(vec![1.0]).unwrap().values()[0], ACTION_LIMIT);
    }
}
