use std::collections::HashMap;

/// Who may log in as which address-of-record.
#[derive(Debug, Clone, Default)]
pub struct Credentials {
    /// Secret accepted for any aor without its own entry.
    pub shared_secret: Option<String>,
    pub users: HashMap<String, String>,
}

impl Credentials {
    pub fn shared(secret: impl Into<String>) -> Self {
        Self {
            shared_secret: Some(secret.into()),
            users: HashMap::new(),
        }
    }

    pub fn with_user(mut self, aor: impl Into<String>, secret: impl Into<String>) -> Self {
        self.users.insert(aor.into(), secret.into());
        self
    }

    pub fn check(&self, aor: &str, secret: &str) -> bool {
        match self.users.get(aor) {
            Some(s) => s == secret,
            None => self.shared_secret.as_deref() == Some(secret),
        }
    }
}

/// Issues an opaque bearer token: 128 random bits, hex encoded.
pub fn new_token() -> String {
    hex::encode(rand::random::<[u8; 16]>())
}

pub fn is_valid_aor(aor: &str) -> bool {
    let mut parts = aor.splitn(2, '@');
    let user = parts.next().unwrap_or("");
    let host = parts.next().unwrap_or("");
    !user.is_empty()
        && !host.is_empty()
        && !host.contains('@')
        && !aor.contains('/')
        && !aor.chars().any(char::is_whitespace)
}
