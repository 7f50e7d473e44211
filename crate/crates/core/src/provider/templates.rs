//! Prompt templates sent to live backends.
//!
//! Templates are plain text with `{name}` placeholders (lowercase letters and
//! underscores). Literal JSON braces in the text are left alone because they
//! never match that shape.

pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub name: &'static str,
    pub text: &'static str,
}

pub const SYSTEM: Template = Template { name: "system", text: include_str!("../../templates/v1/system.txt") };
pub const INITIAL_ATTRIBUTES: Template =
    Template { name: "initial_attributes", text: include_str!("../../templates/v1/initial_attributes.txt") };
pub const BLEND_ATTRIBUTE: Template =
    Template { name: "blend_attribute", text: include_str!("../../templates/v1/blend_attribute.txt") };
pub const JUDGE_SIMILARITY: Template =
    Template { name: "judge_similarity", text: include_str!("../../templates/v1/judge_similarity.txt") };
pub const NOVEL_ALTERNATIVES: Template =
    Template { name: "novel_alternatives", text: include_str!("../../templates/v1/novel_alternatives.txt") };
pub const IMAGE_PROMPT: Template =
    Template { name: "image_prompt", text: include_str!("../../templates/v1/image_prompt.txt") };
pub const DIFFERENCE_SCORE: Template =
    Template { name: "difference_score", text: include_str!("../../templates/v1/difference_score.txt") };

pub const ALL: [Template; 7] =
    [SYSTEM, INITIAL_ATTRIBUTES, BLEND_ATTRIBUTE, JUDGE_SIMILARITY, NOVEL_ALTERNATIVES, IMAGE_PROMPT, DIFFERENCE_SCORE];

impl Template {
    /// Names of the placeholders that occur in the template, in order of first use.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        let text = self.text;
        let mut rest = 0;
        while let Some(open) = text[rest..].find('{') {
            let start = rest + open + 1;
            let name_len = text[start..]
                .bytes()
                .take_while(|b| b.is_ascii_lowercase() || *b == b'_')
                .count();
            if name_len > 0 && text[start + name_len..].starts_with('}') {
                let name = &text[start..start + name_len];
                if !names.contains(&name) {
                    names.push(name);
                }
                rest = start + name_len + 1;
            } else {
                rest = start;
            }
        }
        names
    }

    /// Substitutes every placeholder. Panics if a placeholder has no value,
    /// which would be a programming error in the caller.
    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = self.text.to_string();
        for name in self.placeholders() {
            let value = values
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("template {} needs a value for {{{name}}}", self.name));
            out = out.replace(&format!("{{{name}}}"), value);
        }
        out
    }
}
