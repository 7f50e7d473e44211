//! Sliding-window gate for image-generation requests.
//!
//! The limiter keeps the start time of every admitted request still inside
//! the window. A request is admitted when fewer than `capacity` starts fall in
//! the last `window`; otherwise the caller sleeps until the oldest start ages
//! out. Time comes from an injectable [`Clock`] so the behaviour can be checked
//! on a simulated timeline.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::ProviderError;

/// Images admitted per window when talking to a live backend.
pub const DEFAULT_IMAGES_PER_WINDOW: usize = 5;
pub const DEFAULT_WINDOW: Duration = Duration::from_secs(60);

pub trait Clock: Send + Sync {
    /// Time elapsed since the clock's epoch.
    fn now(&self) -> Duration;
    /// Blocks until `now()` reaches `deadline`.
    fn sleep_until(&self, deadline: Duration);
}

/// Wall clock backed by [`Instant`].
#[derive(Debug)]
pub struct SystemClock {
    epoch: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { epoch: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.epoch.elapsed()
    }

    fn sleep_until(&self, deadline: Duration) {
        std::thread::sleep(deadline.saturating_sub(self.now()));
    }
}

/// Simulated clock. Sleeping jumps time forward instead of blocking.
#[derive(Debug, Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
}

impl ManualClock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Moves time forward to `t`; never moves it backwards.
    pub fn advance_to(&self, t: Duration) {
        let mut now = self.now.lock().unwrap();
        if t > *now {
            *now = t;
        }
    }

    pub fn advance(&self, d: Duration) {
        let mut now = self.now.lock().unwrap();
        *now += d;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep_until(&self, deadline: Duration) {
        self.advance_to(deadline);
    }
}

#[derive(Debug)]
struct Window {
    capacity: usize,
    length: Duration,
    starts: VecDeque<Duration>,
}

impl Window {
    fn evict(&mut self, now: Duration) {
        while let Some(&oldest) = self.starts.front() {
            if oldest + self.length <= now {
                self.starts.pop_front();
            } else {
                break;
            }
        }
    }
}

pub struct RateLimiter {
    window: Option<Mutex<Window>>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for RateLimiter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.window {
            Some(w) => {
                let w = w.lock().unwrap();
                write!(f, "RateLimiter({} per {:?})", w.capacity, w.length)
            }
            None => f.write_str("RateLimiter(unlimited)"),
        }
    }
}

impl RateLimiter {
    pub fn new(capacity: usize, window: Duration, clock: Arc<dyn Clock>) -> Self {
        assert!(capacity > 0, "rate limiter capacity must be positive");
        RateLimiter {
            window: Some(Mutex::new(Window { capacity, length: window, starts: VecDeque::new() })),
            clock,
        }
    }

    /// Five requests per sixty seconds on the wall clock.
    pub fn images_per_minute() -> Self {
        Self::new(DEFAULT_IMAGES_PER_WINDOW, DEFAULT_WINDOW, Arc::new(SystemClock::new()))
    }

    pub fn unlimited() -> Self {
        RateLimiter { window: None, clock: Arc::new(SystemClock::new()) }
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Admits a request now (returning its start), or returns the time at
    /// which the next slot frees up.
    fn admit(&self) -> Result<Duration, Duration> {
        let Some(window) = &self.window else {
            return Ok(self.clock.now());
        };
        let mut w = window.lock().unwrap();
        let now = self.clock.now();
        w.evict(now);
        if w.starts.len() < w.capacity {
            w.starts.push_back(now);
            Ok(now)
        } else {
            let oldest = *w.starts.front().expect("full window is non-empty");
            Err(oldest + w.length)
        }
    }

    /// Admits a request now, or reports how long until a slot frees up.
    pub fn try_acquire(&self) -> Result<Duration, Duration> {
        self.admit().map_err(|free_at| free_at.saturating_sub(self.clock.now()))
    }

    /// Blocks until a request may start. Returns the start time on the
    /// limiter's clock.
    pub fn acquire(&self, timeout: Duration) -> Result<Duration, ProviderError> {
        let give_up = self.clock.now() + timeout;
        loop {
            match self.admit() {
                Ok(start) => return Ok(start),
                Err(free_at) if free_at > give_up => return Err(ProviderError::RateLimitTimeout(timeout)),
                Err(free_at) => self.clock.sleep_until(free_at),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn limiter() -> (Arc<ManualClock>, RateLimiter) {
        let clock = Arc::new(ManualClock::new());
        let limiter = RateLimiter::new(5, Duration::from_secs(60), clock.clone());
        (clock, limiter)
    }

    fn max_in_window(starts: &[Duration], window: Duration) -> usize {
        starts
            .iter()
            .map(|s| starts.iter().filter(|t| **t >= *s && **t < *s + window).count())
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn sixth_request_waits_for_oldest_to_age_out() {
        let (clock, limiter) = limiter();
        for i in 0..5 {
            clock.advance_to(Duration::from_secs(i * 2));
            assert!(limiter.try_acquire().is_ok());
        }
        clock.advance_to(Duration::from_secs(10));
        assert_eq!(limiter.try_acquire(), Err(Duration::from_secs(50)));
        let start = limiter.acquire(Duration::from_secs(120)).unwrap();
        assert_eq!(start, Duration::from_secs(60));
    }

    #[test]
    fn burst_of_eight_on_simulated_clock() {
        let (_clock, limiter) = limiter();
        let starts: Vec<_> = (0..8).map(|_| limiter.acquire(Duration::from_secs(600)).unwrap()).collect();
        let secs: Vec<_> = starts.iter().map(|d| d.as_secs()).collect();
        assert_eq!(secs, [0, 0, 0, 0, 0, 60, 60, 60]);
        assert!(max_in_window(&starts, Duration::from_secs(60)) <= 5);
    }

    #[test]
    fn concurrent_burst_on_simulated_clock() {
        let (_clock, limiter) = limiter();
        let mut starts: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> =
                (0..8).map(|_| scope.spawn(|| limiter.acquire(Duration::from_secs(600)).unwrap())).collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        starts.sort();
        assert_eq!(starts.iter().map(|d| d.as_secs()).collect::<Vec<_>>(), [0, 0, 0, 0, 0, 60, 60, 60]);
    }

    #[test]
    fn times_out_when_wait_exceeds_budget() {
        let (_clock, limiter) = limiter();
        for _ in 0..5 {
            limiter.acquire(Duration::ZERO).unwrap();
        }
        assert!(matches!(
            limiter.acquire(Duration::from_secs(30)),
            Err(ProviderError::RateLimitTimeout(_))
        ));
    }

    #[test]
    fn unlimited_never_waits() {
        let limiter = RateLimiter::unlimited();
        for _ in 0..100 {
            assert!(limiter.try_acquire().is_ok());
        }
    }

    proptest! {
        #[test]
        fn never_more_than_capacity_in_any_window(mut arrivals in proptest::collection::vec(0u64..180_000, 1..30)) {
            arrivals.sort_unstable();
            let (clock, limiter) = limiter();
            let mut starts = Vec::new();
            for ms in arrivals {
                clock.advance_to(Duration::from_millis(ms));
                starts.push(limiter.acquire(Duration::from_secs(3600)).unwrap());
            }
            prop_assert!(max_in_window(&starts, Duration::from_secs(60)) <= 5);
        }
    }
}
