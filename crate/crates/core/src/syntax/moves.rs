//! JSON move scripts for the environment role.

use serde::{Deserialize, Serialize};

use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MovePayload {
    Pick { pick: usize },
    Term { term: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveEntry {
    #[serde(flatten)]
    pub payload: MovePayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_site: Option<String>,
}

impl MoveEntry {
    pub fn pick(i: usize) -> Self {
        MoveEntry {
            payload: MovePayload::Pick { pick: i },
            expected_site: None,
        }
    }

    pub fn term(text: &str) -> Self {
        MoveEntry {
            payload: MovePayload::Term { term: text.to_string() },
            expected_site: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveScript {
    pub moves: Vec<MoveEntry>,
}

pub fn parse_moves(text: &str) -> Result<MoveScript, ParseError> {
    serde_json::from_str(text).map_err(|e| ParseError {
        line: e.line(),
        col: e.column(),
        message: format!("bad move script: {e}"),
        expected: vec![r#"{"moves":[{"pick":<int>} | {"term":"<text>"}]}"#.into()],
    })
}
