//! Newick and DOT text forms of the hierarchy.
//!
//! Internal vertices carry their merge height as the node label (written
//! with shortest-round-trip float formatting, so heights survive a
//! write/read cycle exactly); branch lengths are the parent/child height
//! differences for compatibility with ordinary tree viewers. Children are
//! emitted sorted by smallest contained node index, making the output
//! canonical for a given hierarchy.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;

const MAX_DEPTH: usize = 1000;

fn needs_quoting(name: &str) -> bool {
    name.is_empty()
        || name
            .chars()
            .any(|c| c.is_whitespace() || "()[]':;,".contains(c))
}

fn write_name(out: &mut String, name: &str) {
    if needs_quoting(name) {
        out.push('\'');
        for c in name.chars() {
            if c == '\'' {
                out.push('\'');
            }
            out.push(c);
        }
        out.push('\'');
    } else {
        out.push_str(name);
    }
}

/// Serializes the hierarchy with `names[i]` as the label of leaf `i`.
pub fn to_newick(hier: &Hierarchy, names: &[String]) -> Result<String> {
    if names.len() != hier.n_leaves() {
        return Err(Error::Validation(format!(
            "{} names supplied for {} leaves",
            names.len(),
            hier.n_leaves()
        )));
    }
    let mut out = String::new();
    write_vertex(hier, names, hier.root(), None, &mut out, 0)?;
    out.push(';');
    Ok(out)
}

fn min_leaf(hier: &Hierarchy, v: usize) -> usize {
    hier.leaves_under(v).into_iter().min().unwrap()
}

fn write_vertex(
    hier: &Hierarchy,
    names: &[String],
    v: usize,
    parent_height: Option<f64>,
    out: &mut String,
    depth: usize,
) -> Result<()> {
    if depth > MAX_DEPTH {
        return Err(Error::Validation("hierarchy too deep to serialize".into()));
    }
    if hier.is_leaf(v) {
        write_name(out, &names[v]);
    } else {
        let mut kids: Vec<usize> = hier.children(v).to_vec();
        kids.sort_by_key(|&c| min_leaf(hier, c));
        out.push('(');
        for (i, &c) in kids.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_vertex(hier, names, c, Some(hier.height(v)), out, depth + 1)?;
        }
        out.push(')');
        let _ = write!(out, "{}", hier.height(v));
    }
    if let Some(ph) = parent_height {
        let _ = write!(out, ":{}", ph - hier.height(v));
    }
    Ok(())
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: usize,
}

enum PNode {
    Leaf(String),
    Internal { height: f64, children: Vec<PNode> },
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            chars: text.chars().peekable(),
            pos: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: "<newick>".into(),
            line: 1,
            message: format!("at char {}: {}", self.pos, msg.into()),
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn parse_name(&mut self) -> Result<String> {
        self.skip_ws();
        let mut name = String::new();
        if self.peek() == Some('\'') {
            self.bump();
            loop {
                match self.bump() {
                    Some('\'') => {
                        if self.peek() == Some('\'') {
                            self.bump();
                            name.push('\'');
                        } else {
                            break;
                        }
                    }
                    Some(c) => name.push(c),
                    None => return Err(self.err("unterminated quoted name")),
                }
            }
        } else {
            while let Some(c) = self.peek() {
                if c.is_whitespace() || "()[]':;,".contains(c) {
                    break;
                }
                name.push(c);
                self.bump();
            }
        }
        Ok(name)
    }

    fn parse_number_token(&mut self) -> Result<f64> {
        self.skip_ws();
        let mut tok = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || "+-.eE".contains(c) {
                tok.push(c);
                self.bump();
            } else {
                break;
            }
        }
        tok.parse()
            .map_err(|_| self.err(format!("invalid number `{tok}`")))
    }

    fn skip_branch_length(&mut self) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(':') {
            self.bump();
            self.parse_number_token()?;
        }
        Ok(())
    }

    fn parse_element(&mut self, depth: usize) -> Result<PNode> {
        if depth > MAX_DEPTH {
            return Err(self.err("nesting too deep"));
        }
        self.skip_ws();
        if self.peek() == Some('(') {
            self.bump();
            let mut children = vec![self.parse_element(depth + 1)?];
            loop {
                self.skip_ws();
                match self.peek() {
                    Some(',') => {
                        self.bump();
                        children.push(self.parse_element(depth + 1)?);
                    }
                    Some(')') => {
                        self.bump();
                        break;
                    }
                    _ => return Err(self.err("expected `,` or `)`")),
                }
            }
            if children.len() < 2 {
                return Err(self.err("internal vertex needs at least two children"));
            }
            self.skip_ws();
            let height = self.parse_number_token().map_err(|_| {
                self.err("internal vertex is missing its height label")
            })?;
            if !(height > 0.0 && height < 1.0) {
                return Err(self.err(format!("height {height} outside the open interval (0, 1)")));
            }
            self.skip_branch_length()?;
            Ok(PNode::Internal { height, children })
        } else {
            let name = self.parse_name()?;
            if name.is_empty() {
                return Err(self.err("empty leaf name"));
            }
            self.skip_branch_length()?;
            Ok(PNode::Leaf(name))
        }
    }
}

/// Parses a hierarchy written by [`to_newick`]; returns the tree and the
/// leaf names indexed by node. The ladder is the set of distinct heights
/// found in the text.
pub fn from_newick(text: &str) -> Result<(Hierarchy, Vec<String>)> {
    let mut parser = Parser::new(text);
    let root = parser.parse_element(0)?;
    parser.skip_ws();
    if parser.peek() != Some(';') {
        return Err(parser.err("expected terminating `;`"));
    }

    let mut names = Vec::new();
    collect_names(&root, &mut names);
    {
        let mut sorted = names.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate leaf names in hierarchy".into()));
        }
    }
    let mut heights = Vec::new();
    collect_heights(&root, &mut heights);
    heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    heights.dedup();
    let ladder = if heights.is_empty() { vec![0.5] } else { heights };

    let mut hier = Hierarchy::with_leaves(names.len(), ladder);
    let mut next_leaf = 0usize;
    let root_id = build_vertex(&mut hier, &root, &mut next_leaf);
    hier.set_root(root_id);
    hier.validate()?;
    Ok((hier, names))
}

fn collect_names(node: &PNode, out: &mut Vec<String>) {
    match node {
        PNode::Leaf(name) => out.push(name.clone()),
        PNode::Internal { children, .. } => {
            for c in children {
                collect_names(c, out);
            }
        }
    }
}

fn collect_heights(node: &PNode, out: &mut Vec<f64>) {
    if let PNode::Internal { height, children } = node {
        out.push(*height);
        for c in children {
            collect_heights(c, out);
        }
    }
}

fn build_vertex(hier: &mut Hierarchy, node: &PNode, next_leaf: &mut usize) -> usize {
    match node {
        PNode::Leaf(_) => {
            let id = *next_leaf;
            *next_leaf += 1;
            id
        }
        PNode::Internal { height, children } => {
            let kids: Vec<usize> = children
                .iter()
                .map(|c| build_vertex(hier, c, next_leaf))
                .collect();
            hier.alloc_internal(*height, kids)
        }
    }
}

/// GraphViz DOT rendering of the dendrogram.
pub fn to_dot(hier: &Hierarchy, names: &[String]) -> Result<String> {
    if names.len() != hier.n_leaves() {
        return Err(Error::Validation(format!(
            "{} names supplied for {} leaves",
            names.len(),
            hier.n_leaves()
        )));
    }
    let mut out = String::from("digraph hierarchy {\n  rankdir=TB;\n");
    for v in 0..hier.n_leaves() {
        let _ = writeln!(
            out,
            "  v{v} [shape=box, label=\"{}\"];",
            names[v].replace('"', "\\\"")
        );
    }
    let mut internals: Vec<usize> = hier.internal_vertices().collect();
    internals.sort_by_key(|&v| min_leaf(hier, v));
    for v in internals {
        let _ = writeln!(out, "  v{v} [shape=ellipse, label=\"{}\"];", hier.height(v));
        let mut kids: Vec<usize> = hier.children(v).to_vec();
        kids.sort_by_key(|&c| min_leaf(hier, c));
        for c in kids {
            let _ = writeln!(out, "  v{v} -> v{c};");
        }
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{default_ladder, random_hierarchy};

    #[test]
    fn round_trip_preserves_levels() {
        let ladder = default_ladder(10);
        for seed in 0..10 {
            let hier = random_hierarchy(8, &ladder, seed).unwrap();
            let names: Vec<String> = (0..8).map(|i| format!("n{i}")).collect();
            let text = to_newick(&hier, &names).unwrap();
            let (parsed, parsed_names) = from_newick(&text).unwrap();
            // leaf indices follow text order, so compare levels by name
            let index_of = |name: &str| parsed_names.iter().position(|n| n == name).unwrap();
            for a in 0..8 {
                for b in 0..8 {
                    let (pa, pb) = (index_of(&names[a]), index_of(&names[b]));
                    assert_eq!(
                        parsed.height_of_pair(pa, pb).unwrap(),
                        hier.height_of_pair(a, b).unwrap()
                    );
                }
            }
            // canonical form is stable under re-serialization
            assert_eq!(to_newick(&parsed, &parsed_names).unwrap(), text);
        }
    }

    #[test]
    fn quoted_names_round_trip() {
        let ladder = vec![0.25, 0.75];
        let hier = random_hierarchy(3, &ladder, 5).unwrap();
        let names = vec!["plain".to_string(), "with space".to_string(), "o'brien".to_string()];
        let text = to_newick(&hier, &names).unwrap();
        let (_, parsed_names) = from_newick(&text).unwrap();
        assert_eq!(parsed_names, names);
    }

    #[test]
    fn single_leaf_round_trip() {
        let hier = random_hierarchy(1, &[0.5], 0).unwrap();
        let text = to_newick(&hier, &["only".to_string()]).unwrap();
        assert_eq!(text, "only;");
        let (parsed, names) = from_newick(&text).unwrap();
        assert_eq!(parsed.n_leaves(), 1);
        assert_eq!(names, vec!["only".to_string()]);
    }

    #[test]
    fn missing_height_label_rejected() {
        assert!(from_newick("(a:0.3,b:0.3):0;").is_err());
        assert!(from_newick("(a,b)0.3;").is_ok());
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(from_newick("(a,a)0.3;").is_err());
    }

    #[test]
    fn nonmonotone_heights_rejected() {
        // inner merge above its parent
        assert!(from_newick("((a,b)0.8,c)0.3;").is_err());
    }

    #[test]
    fn dot_mentions_every_vertex() {
        let ladder = default_ladder(10);
        let hier = random_hierarchy(5, &ladder, 1).unwrap();
        let names: Vec<String> = (0..5).map(|i| format!("n{i}")).collect();
        let dot = to_dot(&hier, &names).unwrap();
        for name in &names {
            assert!(dot.contains(name.as_str()));
        }
        assert!(dot.contains("->"));
    }
}
