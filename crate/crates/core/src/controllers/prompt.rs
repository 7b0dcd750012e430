//! Plain-text prompt templates with `<$name$>` placeholders, and the adapter
//! interface an external model backend implements. The scripted controllers
//! never use these.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{invalid, Error, Result};

const OPEN: &str = "<$";
const CLOSE: &str = "$>";

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Field(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    id: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    pub fn parse(id: impl Into<String>, text: &str) -> Result<Self> {
        let mut pieces = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find(OPEN) {
            if start > 0 {
                pieces.push(Piece::Text(rest[..start].to_string()));
            }
            let after = &rest[start + OPEN.len()..];
            let end = after.find(CLOSE).ok_or_else(|| invalid("unterminated placeholder"))?;
            let name = &after[..end];
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(invalid(format!("bad placeholder name {name:?}")));
            }
            pieces.push(Piece::Field(name.to_string()));
            rest = &after[end + CLOSE.len()..];
        }
        if !rest.is_empty() {
            pieces.push(Piece::Text(rest.to_string()));
        }
        Ok(PromptTemplate { id: id.into(), pieces })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Distinct placeholder names, sorted.
    pub fn fields(&self) -> BTreeSet<&str> {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Field(f) => Some(f.as_str()),
                Piece::Text(_) => None,
            })
            .collect()
    }

    pub fn render(&self, values: &BTreeMap<String, String>) -> Result<String> {
        let mut out = String::new();
        for p in &self.pieces {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Field(f) => out.push_str(values.get(f).ok_or_else(|| invalid(format!("template {} needs field {f:?}", self.id)))?),
            }
        }
        Ok(out)
    }
}

/// Loads every `*.txt` file in `dir`; the file stem is the template id.
pub fn load_templates(dir: &Path) -> Result<BTreeMap<String, PromptTemplate>> {
    let mut out = BTreeMap::new();
    let mut paths: Vec<_> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    paths.sort();
    for path in paths.into_iter().filter(|p| p.extension().is_some_and(|e| e == "txt")) {
        let id = path.file_stem().and_then(|s| s.to_str()).ok_or_else(|| invalid("template file name is not UTF-8"))?;
        let text = std::fs::read_to_string(&path)?;
        let t = PromptTemplate::parse(id, &text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        out.insert(id.to_string(), t);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
}

/// Backend for model-driven controllers: template id plus field values in,
/// completion text and token counts out.
pub trait ModelAdapter {
    fn complete(&mut self, template_id: &str, fields: &BTreeMap<String, String>) -> Result<Completion>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_placeholders() {
        let t = PromptTemplate::parse("r", "Task: <$task_description$>\nReason: <$trigger_reason$> (<$task_description$>)").unwrap();
        assert_eq!(t.fields().into_iter().collect::<Vec<_>>(), ["task_description", "trigger_reason"]);
        let values =
            BTreeMap::from([("task_description".to_string(), "fish".to_string()), ("trigger_reason".to_string(), "stall".to_string())]);
        assert_eq!(t.render(&values).unwrap(), "Task: fish\nReason: stall (fish)");
    }

    #[test]
    fn missing_field_and_bad_syntax() {
        let t = PromptTemplate::parse("r", "<$suggested_action$>").unwrap();
        assert!(t.render(&BTreeMap::new()).is_err());
        assert!(PromptTemplate::parse("r", "<$open").is_err());
        assert!(PromptTemplate::parse("r", "<$bad name$>").is_err());
        assert_eq!(PromptTemplate::parse("r", "plain").unwrap().render(&BTreeMap::new()).unwrap(), "plain");
    }
}
