use super::AstTree;

const INTEGER: &str = "IntegerLiteralExpr";
const LONG: &str = "LongLiteralExpr";
const DOUBLE: &str = "DoubleLiteralExpr";
const STRING: &str = "StringLiteralExpr";
const CHAR: &str = "CharLiteralExpr";

/// True when `label` is a literal value as written in source (a number,
/// quoted string or character) rather than a type or name.
pub fn is_raw_literal(label: &str) -> bool {
    literal_type(label).is_some()
}

fn literal_type(label: &str) -> Option<&'static str> {
    let mut chars = label.chars();
    let first = chars.next()?;
    match first {
        '"' => return Some(STRING),
        '\'' => return Some(CHAR),
        _ => {}
    }
    let digits = match first {
        '-' | '+' | '.' => label[1..].trim_start_matches('.'),
        _ => label,
    };
    if !digits.starts_with(|c: char| c.is_ascii_digit()) {
        return None;
    }
    let lower = label.to_ascii_lowercase();
    let hex = lower.trim_start_matches(['-', '+']).starts_with("0x");
    Some(if lower.ends_with('l') {
        LONG
    } else if hex {
        INTEGER
    } else if lower.contains('.') || lower.contains('e') || lower.ends_with('f') || lower.ends_with('d') {
        DOUBLE
    } else {
        INTEGER
    })
}

fn is_literal_type_name(label: &str) -> bool {
    label.ends_with("LiteralExpr")
}

/// Replaces literal values by their literal type name. A literal-type node
/// whose children are only raw values (as some external AST dumps emit)
/// becomes a leaf. Identifiers and production names are kept verbatim.
pub fn normalize_in_place(tree: &mut AstTree) {
    let mut stack = vec![tree];
    while let Some(node) = stack.pop() {
        if is_literal_type_name(&node.label)
            && !node.children.is_empty()
            && node.children.iter().all(|c| c.is_leaf() && is_raw_literal(&c.label))
        {
            node.children.clear();
        }
        if let Some(ty) = literal_type(&node.label) {
            node.label = ty.to_string();
        }
        stack.extend(node.children.iter_mut());
    }
}

pub fn normalize_labels(mut tree: AstTree) -> AstTree {
    normalize_in_place(&mut tree);
    tree
}
