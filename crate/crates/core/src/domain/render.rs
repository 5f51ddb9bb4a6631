use super::schema::{AttributeSchema, FeatureSet, SceneState};
use crate::Result;

/// Render the canonical full description of a state:
/// "The floor is {floor color}, the wall is {wall color}, the
/// {object color} {size} {object} is in the {position}."
pub fn render_description(schema: &AttributeSchema, state: &SceneState) -> Result<String> {
    let (floor, wall, object_color, shape, size, position) = schema.roles.require()?;
    Ok(format!(
        "The floor is {}, the wall is {}, the {} {} {} is in the {}.",
        state.lexeme(schema, floor),
        state.lexeme(schema, wall),
        state.lexeme(schema, object_color),
        state.lexeme(schema, size),
        state.lexeme(schema, shape),
        state.lexeme(schema, position),
    ))
}

/// Render a partial feature set as a conjunction of template fragments, in
/// canonical attribute order. Every output round-trips through
/// `parse_utterance`.
pub fn render_features(schema: &AttributeSchema, features: &FeatureSet) -> Result<String> {
    let (floor, wall, object_color, shape, size, position) = schema.roles.require()?;
    if features.is_empty() {
        return Err(crate::Error::EmptyInput("features"));
    }

    let lex = |attr: usize, v: u8| schema.lexeme(attr, v);
    let mut clauses: Vec<String> = Vec::new();
    if let Some(v) = features.get(floor) {
        clauses.push(format!("the floor is {}", lex(floor, v)));
    }
    if let Some(v) = features.get(wall) {
        clauses.push(format!("the wall is {}", lex(wall, v)));
    }

    let color = features.get(object_color);
    let sz = features.get(size);
    let sh = features.get(shape);
    let pos = features.get(position);
    if color.is_some() || sz.is_some() || sh.is_some() || pos.is_some() {
        let mut np = String::new();
        if let Some(v) = color {
            np.push_str(lex(object_color, v));
            np.push(' ');
        }
        if let Some(v) = sz {
            np.push_str(lex(size, v));
            np.push(' ');
        }
        match sh {
            Some(v) => np.push_str(lex(shape, v)),
            None => np.push_str("object"),
        }
        if let Some(v) = pos {
            clauses.push(format!("the {} is in the {}", np, lex(position, v)));
        } else {
            let article = if np.starts_with(['a', 'e', 'i', 'o', 'u']) {
                "an"
            } else {
                "a"
            };
            clauses.push(format!("there is {} {}", article, np));
        }
    }

    let mut text = clauses.join(" and ");
    let first = text.remove(0).to_ascii_uppercase();
    text.insert(0, first);
    text.push('.');
    Ok(text)
}
