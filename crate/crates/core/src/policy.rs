//! Policy trees over factor slots.
//!
//! Text syntax: a slot id, or `and(...)`, `or(...)`, `Kof(...)` with
//! comma-separated children, e.g. `and(pw, or(totp, recovery))`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PolicyTree {
    Leaf(String),
    Gate {
        threshold: usize,
        children: Vec<PolicyTree>,
    },
}

impl PolicyTree {
    pub fn leaf(id: impl Into<String>) -> PolicyTree {
        PolicyTree::Leaf(id.into())
    }

    pub fn and(children: Vec<PolicyTree>) -> PolicyTree {
        PolicyTree::Gate {
            threshold: children.len(),
            children,
        }
    }

    pub fn or(children: Vec<PolicyTree>) -> PolicyTree {
        PolicyTree::Gate {
            threshold: 1,
            children,
        }
    }

    pub fn threshold(t: usize, children: Vec<PolicyTree>) -> PolicyTree {
        PolicyTree::Gate {
            threshold: t,
            children,
        }
    }

    /// Leaf ids in left-to-right order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            PolicyTree::Leaf(id) => out.push(id),
            PolicyTree::Gate { children, .. } => children.iter().for_each(|c| c.collect(out)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            PolicyTree::Leaf(_) => 0,
            PolicyTree::Gate { children, .. } => {
                1 + children.iter().map(|c| c.depth()).max().unwrap_or(0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn walk(t: &PolicyTree) -> Result<()> {
            match t {
                PolicyTree::Leaf(id) if id.is_empty() => {
                    Err(Error::InvalidParameter("empty slot id in policy".into()))
                }
                PolicyTree::Leaf(_) => Ok(()),
                PolicyTree::Gate {
                    threshold,
                    children,
                } => {
                    if children.is_empty() {
                        return Err(Error::InvalidParameter(
                            "policy gate without children".into(),
                        ));
                    }
                    if children.len() > 255 || *threshold == 0 || *threshold > children.len() {
                        return Err(Error::InvalidParameter(format!(
                            "gate threshold {threshold} invalid for {} children",
                            children.len()
                        )));
                    }
                    children.iter().try_for_each(walk)
                }
            }
        }
        walk(self)?;
        if self.depth() > MAX_DEPTH {
            return Err(Error::InvalidParameter(format!(
                "policy deeper than {MAX_DEPTH} levels"
            )));
        }
        let leaves = self.leaves();
        let mut seen = HashSet::new();
        for l in &leaves {
            if !seen.insert(*l) {
                return Err(Error::InvalidParameter(format!(
                    "slot {l:?} appears twice in policy"
                )));
            }
        }
        Ok(())
    }

    /// A root leaf becomes a 1-of-1 gate.
    pub fn normalized(self) -> PolicyTree {
        match self {
            leaf @ PolicyTree::Leaf(_) => PolicyTree::Gate {
                threshold: 1,
                children: vec![leaf],
            },
            g => g,
        }
    }

    pub fn satisfied_by(&self, present: &BTreeSet<String>) -> bool {
        match self {
            PolicyTree::Leaf(id) => present.contains(id),
            PolicyTree::Gate {
                threshold,
                children,
            } => children.iter().filter(|c| c.satisfied_by(present)).count() >= *threshold,
        }
    }

    pub fn parse(text: &str) -> Result<PolicyTree> {
        let mut p = Parser {
            s: text.as_bytes(),
            i: 0,
        };
        let t = p.node()?;
        p.ws();
        if p.i != p.s.len() {
            return Err(p.err("trailing input"));
        }
        Ok(t)
    }
}

pub const MAX_DEPTH: usize = 16;

impl fmt::Display for PolicyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyTree::Leaf(id) => f.write_str(id),
            PolicyTree::Gate {
                threshold,
                children,
            } => {
                if *threshold == children.len() {
                    f.write_str("and(")?;
                } else if *threshold == 1 {
                    f.write_str("or(")?;
                } else {
                    write!(f, "{threshold}of(")?;
                }
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn err(&self, what: &str) -> Error {
        Error::InvalidParameter(format!("policy parse error at {}: {what}", self.i))
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.ws();
        let start = self.i;
        while self.i < self.s.len()
            && (self.s[self.i].is_ascii_alphanumeric() || b"-_.:@".contains(&self.s[self.i]))
        {
            self.i += 1;
        }
        if start == self.i {
            return Err(self.err("expected a slot id or gate"));
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.i]).into_owned())
    }

    fn node(&mut self) -> Result<PolicyTree> {
        let name = self.ident()?;
        self.ws();
        if self.i >= self.s.len() || self.s[self.i] != b'(' {
            return Ok(PolicyTree::Leaf(name));
        }
        self.i += 1;
        let mut children = vec![self.node()?];
        loop {
            self.ws();
            match self.s.get(self.i) {
                Some(b',') => {
                    self.i += 1;
                    children.push(self.node()?);
                }
                Some(b')') => {
                    self.i += 1;
                    break;
                }
                _ => return Err(self.err("expected ',' or ')'")),
            }
        }
        let threshold = match name.to_ascii_lowercase().as_str() {
            "and" => children.len(),
            "or" => 1,
            other => other
                .strip_suffix("of")
                .and_then(|k| k.parse::<usize>().ok())
                .ok_or_else(|| self.err("unknown gate; use and, or or Kof"))?,
        };
        Ok(PolicyTree::Gate {
            threshold,
            children,
        })
    }
}
