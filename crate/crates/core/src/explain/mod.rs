//! Explanations for predicted links: textual verification, surrogate anchor
//! rules and ranked graph paths.

pub mod anchors;
pub mod path;
pub mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Verification,
    Anchors,
    PathRanking,
}

impl Technique {
    pub const ALL: [Technique; 3] = [
        Technique::Verification,
        Technique::Anchors,
        Technique::PathRanking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Technique::Verification => "verification",
            Technique::Anchors => "anchors",
            Technique::PathRanking => "path_ranking",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown technique `{0}` (expected verification, anchors or path_ranking)")]
pub struct UnknownTechnique(pub String);

impl FromStr for Technique {
    type Err = UnknownTechnique;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Technique::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTechnique(s.to_string()))
    }
}

/// A predicted link as referenced by explanations and feedback. The id is
/// `u~v`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkRef {
    pub id: String,
    pub u: NodeId,
    pub v: NodeId,
}

impl LinkRef {
    pub fn new(u: NodeId, v: NodeId) -> Self {
        LinkRef {
            id: format!("{u}~{v}"),
            u,
            v,
        }
    }

    /// Parse `u~v`.
    pub fn parse(id: &str) -> Option<Self> {
        let (u, v) = id.split_once('~')?;
        if u.is_empty() || v.is_empty() || v.contains('~') {
            return None;
        }
        Some(LinkRef::new(u.into(), v.into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Explanation {
    Verification(verify::VerificationResult),
    Anchors(anchors::AnchorsRule),
    PathRanking(path::RankedPathExplanation),
}

impl Explanation {
    pub fn technique(&self) -> Technique {
        match self {
            Explanation::Verification(_) => Technique::Verification,
            Explanation::Anchors(_) => Technique::Anchors,
            Explanation::PathRanking(_) => Technique::PathRanking,
        }
    }
}

/// What the service returns for one explanation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationEnvelope {
    pub technique: Technique,
    pub link: LinkRef,
    pub payload: Explanation,
    pub generated_at: String,
}

impl ExplanationEnvelope {
    pub fn new(link: LinkRef, payload: Explanation, generated_at: impl Into<String>) -> Self {
        ExplanationEnvelope {
            technique: payload.technique(),
            link,
            payload,
            generated_at: generated_at.into(),
        }
    }
}
