use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "system" => Ok(Role::System),
            "user" => Ok(Role::User),
            "assistant" => Ok(Role::Assistant),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

/// Why a message list is not a well-formed conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleError {
    #[error("conversation has no messages")]
    NoMessages,
    #[error("message {index}: content is empty")]
    EmptyContent { index: usize },
    #[error("message {index}: system message is only allowed first")]
    MisplacedSystem { index: usize },
    #[error("message {index}: expected {expected}, found {found}")]
    AlternationViolation { index: usize, expected: Role, found: Role },
    #[error("conversation must end with an assistant message")]
    MissingFinalAssistant,
}

/// A validated conversation.
///
/// At most one system message, only at position 0; after it, user and
/// assistant strictly alternate, starting with user and ending with
/// assistant. `turns` is the number of user messages and is at least one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChatSample {
    messages: Vec<ChatMessage>,
    source: String,
    turns: usize,
}

impl ChatSample {
    pub fn new(messages: Vec<ChatMessage>, source: impl Into<String>) -> Result<Self, SampleError> {
        if messages.is_empty() {
            return Err(SampleError::NoMessages);
        }
        if let Some(index) = messages.iter().position(|m| m.content.trim().is_empty()) {
            return Err(SampleError::EmptyContent { index });
        }
        let body_start = usize::from(messages[0].role == Role::System);
        let mut expected = Role::User;
        for (index, m) in messages.iter().enumerate().skip(body_start) {
            if m.role == Role::System {
                return Err(SampleError::MisplacedSystem { index });
            }
            if m.role != expected {
                return Err(SampleError::AlternationViolation {
                    index,
                    expected,
                    found: m.role,
                });
            }
            expected = match expected {
                Role::User => Role::Assistant,
                _ => Role::User,
            };
        }
        if messages.last().map(|m| m.role) != Some(Role::Assistant) {
            return Err(SampleError::MissingFinalAssistant);
        }
        let turns = messages.iter().filter(|m| m.role == Role::User).count();
        Ok(ChatSample {
            messages,
            source: source.into(),
            turns,
        })
    }

    /// Single-turn instruction/response pair.
    pub fn pair(instruction: impl Into<String>, response: impl Into<String>, source: impl Into<String>) -> Result<Self, SampleError> {
        Self::new(
            vec![ChatMessage::user(instruction), ChatMessage::assistant(response)],
            source,
        )
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn turns(&self) -> usize {
        self.turns
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn assistant_messages(&self) -> impl Iterator<Item = &ChatMessage> {
        self.messages.iter().filter(|m| m.role == Role::Assistant)
    }

    pub fn to_record(&self) -> ChatRecord {
        ChatRecord {
            messages: self
                .messages
                .iter()
                .map(|m| RecordMessage {
                    role: m.role.as_str().to_string(),
                    content: m.content.clone(),
                })
                .collect(),
            source: Some(self.source.clone()),
        }
    }
}

impl Serialize for ChatSample {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

/// One line of the chat-record format, before validation.
///
/// Roles are kept as strings so that an unknown role becomes a diagnostic
/// instead of a generic decode failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub messages: Vec<RecordMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMessage {
    pub role: String,
    pub content: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(roles: &[Role]) -> Vec<ChatMessage> {
        roles.iter().map(|r| ChatMessage::new(*r, "x")).collect()
    }

    #[test]
    fn three_turn_sample() {
        use Role::*;
        let s = ChatSample::new(conv(&[System, User, Assistant, User, Assistant, User, Assistant]), "t").unwrap();
        assert_eq!(s.turns(), 3);
    }

    #[test]
    fn structural_errors() {
        use Role::*;
        assert_eq!(ChatSample::new(vec![], "t"), Err(SampleError::NoMessages));
        assert_eq!(
            ChatSample::new(conv(&[User, User, Assistant]), "t"),
            Err(SampleError::AlternationViolation { index: 1, expected: Assistant, found: User })
        );
        assert_eq!(
            ChatSample::new(conv(&[User, Assistant, System, User, Assistant]), "t"),
            Err(SampleError::MisplacedSystem { index: 2 })
        );
        assert_eq!(
            ChatSample::new(conv(&[System, System, User, Assistant]), "t"),
            Err(SampleError::MisplacedSystem { index: 1 })
        );
        assert_eq!(
            ChatSample::new(conv(&[Assistant]), "t"),
            Err(SampleError::AlternationViolation { index: 0, expected: User, found: Assistant })
        );
        assert_eq!(ChatSample::new(conv(&[User]), "t"), Err(SampleError::MissingFinalAssistant));
        assert_eq!(ChatSample::new(conv(&[System]), "t"), Err(SampleError::MissingFinalAssistant));
        assert_eq!(
            ChatSample::new(vec![ChatMessage::user("q"), ChatMessage::assistant("  \n")], "t"),
            Err(SampleError::EmptyContent { index: 1 })
        );
    }
}
