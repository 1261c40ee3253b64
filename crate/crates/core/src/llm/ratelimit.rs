use std::sync::Mutex;
use std::time::{Duration, Instant};

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("rate limited; retry after {retry_after:?}")]
pub struct RateLimited {
    pub retry_after: Duration,
}

#[derive(Debug)]
struct Bucket {
    tokens: f64,
    last: Instant,
}

/// Token bucket refilled continuously at `rate_per_sec` up to `capacity`.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    rate_per_sec: f64,
    state: Mutex<Bucket>,
}

impl TokenBucket {
    pub fn new(capacity: u32, rate_per_sec: f64) -> Self {
        assert!(capacity > 0 && rate_per_sec > 0.0);
        Self {
            capacity: f64::from(capacity),
            rate_per_sec,
            state: Mutex::new(Bucket {
                tokens: f64::from(capacity),
                last: Instant::now(),
            }),
        }
    }

    pub fn try_acquire(&self) -> Result<(), RateLimited> {
        self.try_acquire_at(Instant::now())
    }

    pub fn try_acquire_at(&self, now: Instant) -> Result<(), RateLimited> {
        let mut b = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let elapsed = now.saturating_duration_since(b.last).as_secs_f64();
        b.tokens = (b.tokens + elapsed * self.rate_per_sec).min(self.capacity);
        b.last = b.last.max(now);
        if b.tokens >= 1.0 {
            b.tokens -= 1.0;
            Ok(())
        } else {
            let wait = (1.0 - b.tokens) / self.rate_per_sec;
            Err(RateLimited {
                retry_after: Duration::from_secs_f64(wait),
            })
        }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        while let Err(e) = self.try_acquire() {
            std::thread::sleep(e.retry_after);
        }
    }
}
