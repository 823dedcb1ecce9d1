//! Single-pass `{placeholder}` substitution for prompt templates.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("no value for template placeholder {{{0}}}")]
    Missing(String),
    #[error("value for {{{0}}} is empty")]
    Empty(String),
}

fn is_key_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Substitutes every `{key}` in `template`. Substituted text is never
/// rescanned, so values may contain braces. A brace not followed by
/// `identifier}` is copied literally.
pub fn render(template: &str, values: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let key_len = after.find(|c: char| !is_key_char(c)).unwrap_or(after.len());
        if key_len > 0 && after[key_len..].starts_with('}') {
            let key = &after[..key_len];
            let value = values
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::Missing(key.to_string()))?;
            out.push_str(value);
            rest = &after[key_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Like [`render`], but every value must be non-empty.
pub fn render_strict(template: &str, values: &[(&str, &str)]) -> Result<String, TemplateError> {
    if let Some((key, _)) = values.iter().find(|(_, v)| v.is_empty()) {
        return Err(TemplateError::Empty(key.to_string()));
    }
    render(template, values)
}
