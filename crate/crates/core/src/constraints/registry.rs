use serde::Serialize;
use serde_json::{Map, Value};

use super::ConstraintError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    UInt,
    Bool,
    String,
    StringList,
}

impl ParamType {
    fn describe(self) -> &'static str {
        match self {
            ParamType::UInt => "a non-negative integer",
            ParamType::Bool => "a boolean",
            ParamType::String => "a string",
            ParamType::StringList => "a list of strings",
        }
    }

    fn accepts(self, v: &Value) -> bool {
        match self {
            ParamType::UInt => v.as_u64().is_some(),
            ParamType::Bool => v.is_boolean(),
            ParamType::String => v.is_string(),
            ParamType::StringList => v
                .as_array()
                .is_some_and(|a| a.iter().all(Value::is_string)),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    pub doc: &'static str,
}

/// One registered verifier kind: its name, parameter schema and a params
/// example that must validate against that schema.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KindDescriptor {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [ParamSpec],
    pub example: &'static str,
}

impl KindDescriptor {
    pub fn example_params(&self) -> Map<String, Value> {
        match serde_json::from_str(self.example) {
            Ok(Value::Object(m)) => m,
            _ => panic!("descriptor `{}` has a non-object example", self.name),
        }
    }

    /// Structural check of `params` against this schema: no unknown fields,
    /// every required field present, every value of the declared type.
    pub fn check_params(&self, params: &Map<String, Value>) -> Result<(), ConstraintError> {
        for key in params.keys() {
            if !self.params.iter().any(|p| p.name == key) {
                return Err(ConstraintError::violation(key, "unknown parameter for this kind"));
            }
        }
        for p in self.params {
            match params.get(p.name) {
                None if p.required => {
                    return Err(ConstraintError::violation(p.name, "required parameter is missing"))
                }
                None => {}
                Some(v) if !p.ty.accepts(v) => {
                    return Err(ConstraintError::violation(
                        p.name,
                        format!("expected {}", p.ty.describe()),
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

const fn param(name: &'static str, ty: ParamType, required: bool, doc: &'static str) -> ParamSpec {
    ParamSpec { name, ty, required, doc }
}

const BOUNDS: &[ParamSpec] = &[
    param("min", ParamType::UInt, false, "inclusive lower bound"),
    param("max", ParamType::UInt, false, "inclusive upper bound"),
];

const POLICY: &[ParamSpec] = &[
    param(
        "allow_digits_punct",
        ParamType::Bool,
        false,
        "ASCII digits and common punctuation pass (default true)",
    ),
    param("allowlist", ParamType::StringList, false, "names exempt from the check"),
];

static KINDS: &[KindDescriptor] = &[
    KindDescriptor {
        name: "word_count",
        summary: "number of whitespace-separated tokens lies in [min, max]",
        params: BOUNDS,
        example: r#"{"min": 10, "max": 20}"#,
    },
    KindDescriptor {
        name: "char_count",
        summary: "number of Unicode scalar values lies in [min, max]",
        params: BOUNDS,
        example: r#"{"min": 50, "max": 400}"#,
    },
    KindDescriptor {
        name: "keyword_include",
        summary: "every listed word occurs as a substring",
        params: &[param("words", ParamType::StringList, true, "required substrings")],
        example: r#"{"words": ["กรุงเทพ"]}"#,
    },
    KindDescriptor {
        name: "keyword_exclude",
        summary: "no listed word occurs as a substring",
        params: &[param("words", ParamType::StringList, true, "forbidden substrings")],
        example: r#"{"words": ["อย่างไรก็ตาม"]}"#,
    },
    KindDescriptor {
        name: "starts_with",
        summary: "response, ignoring leading whitespace, starts with prefix",
        params: &[param("prefix", ParamType::String, true, "required prefix")],
        example: r#"{"prefix": "สรุป"}"#,
    },
    KindDescriptor {
        name: "ends_with",
        summary: "response, ignoring trailing whitespace, ends with suffix",
        params: &[param("suffix", ParamType::String, true, "required suffix")],
        example: r#"{"suffix": "ครับ"}"#,
    },
    KindDescriptor {
        name: "line_count",
        summary: "number of lines (a final newline does not open a new line) lies in [min, max]",
        params: BOUNDS,
        example: r#"{"min": 1, "max": 5}"#,
    },
    KindDescriptor {
        name: "bullet_count",
        summary: "exactly N lines start with a bullet marker (`* `, `- `, `• `)",
        params: &[param("exact", ParamType::UInt, true, "required bullet count")],
        example: r#"{"exact": 3}"#,
    },
    KindDescriptor {
        name: "sentence_count",
        summary: "exactly N non-blank segments between terminators",
        params: &[
            param("exact", ParamType::UInt, true, "required sentence count"),
            param(
                "terminators",
                ParamType::StringList,
                false,
                "sentence terminators (default [\".\", \"!\", \"?\"])",
            ),
        ],
        example: r#"{"exact": 2, "terminators": [".", "!", "?"]}"#,
    },
    KindDescriptor {
        name: "json_object",
        summary: "response (optionally inside a ``` fence) is a JSON object with the required keys",
        params: &[param("required_keys", ParamType::StringList, false, "keys that must be present")],
        example: r#"{"required_keys": ["title", "summary"]}"#,
    },
    KindDescriptor {
        name: "no_code_switching",
        summary: "no Latin or other-script characters outside URLs, identifiers and allowlisted names",
        params: POLICY,
        example: r#"{"allow_digits_punct": true, "allowlist": ["GPT-4o"]}"#,
    },
    KindDescriptor {
        name: "thai_orthography_valid",
        summary: "Thai cluster ordering rules hold",
        params: &[],
        example: "{}",
    },
    KindDescriptor {
        name: "thai_only",
        summary: "contains Thai text and nothing else outside the purity exclusions",
        params: POLICY,
        example: "{}",
    },
    KindDescriptor {
        name: "forbidden_chars",
        summary: "none of the characters in `set` occur",
        params: &[param("set", ParamType::String, true, "characters to reject")],
        example: r#"{"set": "!?"}"#,
    },
    KindDescriptor {
        name: "paragraph_count",
        summary: "exactly N paragraphs separated by blank lines",
        params: &[param("exact", ParamType::UInt, true, "required paragraph count")],
        example: r#"{"exact": 2}"#,
    },
];

/// The fixed verifier registry.
pub fn registered_kinds() -> &'static [KindDescriptor] {
    KINDS
}

pub fn descriptor(kind: &str) -> Option<&'static KindDescriptor> {
    KINDS.iter().find(|d| d.name == kind)
}
