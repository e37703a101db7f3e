#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub default_expiry_secs: u64,
    pub min_expiry_secs: u64,
    pub max_expiry_secs: u64,
    /// How long an empty conference survives before it is collected.
    pub grace_ms: u64,
    pub default_limit: u32,
    pub max_limit: u32,
    /// Undelivered frames a subscriber may accumulate before its stream is cut.
    pub subscriber_queue: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            default_expiry_secs: 3600,
            min_expiry_secs: 60,
            max_expiry_secs: 86_400,
            grace_ms: 30_000,
            default_limit: 20,
            max_limit: 100,
            subscriber_queue: 4096,
        }
    }
}

impl ServerConfig {
    pub fn clamp_expiry(&self, requested: Option<u64>) -> u64 {
        requested
            .unwrap_or(self.default_expiry_secs)
            .clamp(self.min_expiry_secs, self.max_expiry_secs)
    }
}
