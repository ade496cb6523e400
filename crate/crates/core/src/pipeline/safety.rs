// Copyright 2026 The PoAI Simnet Authors
// SPDX-License-Identifier: Apache-2.0

//! Static vetting of plugin source against a declarative policy.
//!
//! Policy file (TOML):
//!
//! ```toml
//! max_bytes = 512
//! max_tokens = 256
//! max_depth = 16
//! import_keywords = ["import", "include", "require", "use", "from"]
//! allowed_imports = ["math"]
//! allowed_identifiers = ["x", "acc", "min", "max"]
//! allowed_prefixes = ["param_"]
//!
//! [[deny]]
//! class = "process spawn"
//! tokens = ["system", "popen", "spawn"]
//! ```
//!
//! Every identifier is checked against the deny classes first, then the
//! allowlist. The verdict lists every violation found, not just the first.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::lang::{tokenize, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenyClass {
    pub class: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyPolicy {
    pub max_bytes: usize,
    pub max_tokens: usize,
    /// Bracket nesting limit.
    pub max_depth: usize,
    #[serde(default)]
    pub import_keywords: Vec<String>,
    #[serde(default)]
    pub allowed_imports: Vec<String>,
    #[serde(default)]
    pub allowed_identifiers: Vec<String>,
    #[serde(default)]
    pub allowed_prefixes: Vec<String>,
    #[serde(default)]
    pub deny: Vec<DenyClass>,
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("invalid safety policy: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid safety policy: {0}")]
    Invalid(String),
}

pub const CLASS_IMPORT: &str = "import";
pub const CLASS_SIZE: &str = "size";
pub const CLASS_TOKENS: &str = "token count";
pub const CLASS_DEPTH: &str = "nesting depth";
pub const CLASS_IDENTIFIER: &str = "identifier";
pub const CLASS_CHARACTER: &str = "character";

impl SafetyPolicy {
    pub fn from_toml(text: &str) -> Result<Self, PolicyError> {
        let p: SafetyPolicy = toml::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    /// Deny classes must be named, distinct, and disjoint from the allow list.
    pub fn validate(&self) -> Result<(), PolicyError> {
        let p = self;
        let mut classes = BTreeSet::new();
        for d in &p.deny {
            if d.class.trim().is_empty() {
                return Err(PolicyError::Invalid("deny class with empty name".into()));
            }
            if !classes.insert(d.class.as_str()) {
                return Err(PolicyError::Invalid(format!("deny class `{}` listed twice", d.class)));
            }
        }
        for d in &p.deny {
            if let Some(t) = d.tokens.iter().find(|t| p.allowed_identifiers.contains(t)) {
                return Err(PolicyError::Invalid(format!(
                    "`{t}` is both allowed and denied ({})",
                    d.class
                )));
            }
        }
        Ok(())
    }

    /// The policy shipped with the tool.
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_POLICY).expect("builtin policy parses")
    }

    fn denied_class(&self, ident: &str) -> Option<&str> {
        self.deny
            .iter()
            .find(|d| d.tokens.iter().any(|t| t == ident))
            .map(|d| d.class.as_str())
    }

    fn allowed(&self, ident: &str) -> bool {
        self.allowed_identifiers.iter().any(|a| a == ident)
            || self.allowed_prefixes.iter().any(|p| ident.starts_with(p.as_str()))
            || self.allowed_imports.iter().any(|m| m == ident)
    }
}

pub const BUILTIN_POLICY: &str = include_str!("builtin_policy.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub class: String,
    pub detail: String,
    pub offset: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} (byte {})", self.class, self.detail, self.offset)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "reasons", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CodeVerdict {
    Unchecked,
    Safe,
    Rejected(Vec<Violation>),
}

impl CodeVerdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, CodeVerdict::Safe)
    }

    pub fn classes(&self) -> BTreeSet<&str> {
        match self {
            CodeVerdict::Rejected(v) => v.iter().map(|v| v.class.as_str()).collect(),
            _ => BTreeSet::new(),
        }
    }

    pub fn rejected(class: &str, detail: impl Into<String>) -> Self {
        CodeVerdict::Rejected(vec![Violation {
            class: class.into(),
            detail: detail.into(),
            offset: 0,
        }])
    }
}

impl fmt::Display for CodeVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeVerdict::Unchecked => f.write_str("UNCHECKED"),
            CodeVerdict::Safe => f.write_str("SAFE"),
            CodeVerdict::Rejected(vs) => {
                f.write_str("REJECTED(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Pure function of the source bytes and the policy.
pub fn safety_check(source: &str, policy: &SafetyPolicy) -> CodeVerdict {
    let mut out = Vec::new();
    let mut push = |class: &str, detail: String, offset: usize| {
        out.push(Violation {
            class: class.to_string(),
            detail,
            offset,
        })
    };
    if source.len() > policy.max_bytes {
        push(
            CLASS_SIZE,
            format!("{} bytes exceeds limit {}", source.len(), policy.max_bytes),
            policy.max_bytes,
        );
    }
    let toks = tokenize(source);
    if toks.len() > policy.max_tokens {
        push(
            CLASS_TOKENS,
            format!("{} tokens exceeds limit {}", toks.len(), policy.max_tokens),
            toks[policy.max_tokens].offset,
        );
    }
    let mut depth = 0usize;
    let mut deepest_reported = false;
    for (i, t) in toks.iter().enumerate() {
        match &t.kind {
            TokenKind::Sym("(") | TokenKind::Sym("[") => {
                depth += 1;
                if depth > policy.max_depth && !deepest_reported {
                    deepest_reported = true;
                    push(
                        CLASS_DEPTH,
                        format!("nesting exceeds limit {}", policy.max_depth),
                        t.offset,
                    );
                }
            }
            TokenKind::Sym(")") | TokenKind::Sym("]") => depth = depth.saturating_sub(1),
            TokenKind::Ident(id) if policy.import_keywords.contains(id) => {
                let module = toks.get(i + 1).map(|n| n.kind.clone());
                match module {
                    Some(TokenKind::Ident(m) | TokenKind::Str(m)) if policy.allowed_imports.contains(&m) => {}
                    Some(TokenKind::Sym("(")) => {
                        // `require("x")` style.
                        match toks.get(i + 2).map(|n| &n.kind) {
                            Some(TokenKind::Ident(m) | TokenKind::Str(m)) if policy.allowed_imports.contains(m) => {}
                            other => push(
                                CLASS_IMPORT,
                                format!("`{id}` of {}", other.map_or("nothing".into(), |k| format!("`{k}`"))),
                                t.offset,
                            ),
                        }
                    }
                    other => push(
                        CLASS_IMPORT,
                        format!("`{id}` of {}", other.map_or("nothing".into(), |k| format!("`{k}`"))),
                        t.offset,
                    ),
                }
            }
            TokenKind::Ident(id) => {
                if let Some(class) = policy.denied_class(id) {
                    push(class, format!("`{id}`"), t.offset);
                } else if !policy.allowed(id) {
                    push(CLASS_IDENTIFIER, format!("`{id}` is not allowlisted"), t.offset);
                }
            }
            TokenKind::Str(s) => {
                // Literal text is not code, but it must not smuggle a denied
                // name into something that might evaluate it.
                for word in s.split(|c: char| !(c == '_' || c.is_alphanumeric())) {
                    if let Some(class) = policy.denied_class(word) {
                        push(class, format!("`{word}` inside string literal"), t.offset);
                    }
                }
            }
            TokenKind::Other(c) => push(CLASS_CHARACTER, format!("`{c}` is not part of the language"), t.offset),
            TokenKind::Number(_) | TokenKind::Sym(_) => {}
        }
    }
    if out.is_empty() {
        CodeVerdict::Safe
    } else {
        CodeVerdict::Rejected(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(src: &str) -> CodeVerdict {
        safety_check(src, &SafetyPolicy::builtin())
    }

    #[test]
    fn arithmetic_is_safe() {
        assert_eq!(check("acc + x * 2"), CodeVerdict::Safe);
        assert_eq!(check("import math;\nmath.sqrt(abs(x)) + param_worker1"), CodeVerdict::Safe);
    }

    #[test]
    fn process_spawn_rejected() {
        let v = check("acc + system(\"ls\")");
        assert_eq!(v.classes(), BTreeSet::from(["process spawn"]));
    }

    #[test]
    fn size_boundary() {
        let p = SafetyPolicy::builtin();
        let at_cap = format!("x{}", " ".repeat(p.max_bytes - 1));
        assert_eq!(safety_check(&at_cap, &p), CodeVerdict::Safe);
        let over = format!("{at_cap} ");
        assert_eq!(safety_check(&over, &p).classes(), BTreeSet::from([CLASS_SIZE]));
    }

    #[test]
    fn import_of_unlisted_module() {
        assert!(check("import os; x").classes().contains(CLASS_IMPORT));
        assert!(check("require('net')").classes().contains(CLASS_IMPORT));
        assert_eq!(check("import math; x"), CodeVerdict::Safe);
    }

    #[test]
    fn every_violation_listed() {
        let v = check("eval(open(x)) + socket + $");
        let classes = v.classes();
        for c in ["reflective evaluation", "filesystem", "network", CLASS_CHARACTER] {
            assert!(classes.contains(c), "{c} missing from {v}");
        }
    }

    #[test]
    fn policy_validation() {
        let bad = "max_bytes = 1\nmax_tokens = 1\nmax_depth = 1\nallowed_identifiers = [\"x\"]\n[[deny]]\nclass = \"a\"\ntokens = [\"x\"]\n";
        assert!(SafetyPolicy::from_toml(bad).is_err());
        assert!(SafetyPolicy::from_toml("max_bytes = 1\nbogus = 2").is_err());
    }
}
