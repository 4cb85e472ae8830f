/// Engagements are maximal runs of at least this many turns on one topic.
pub const MIN_ENGAGEMENT_DEPTH: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngagementSummary {
    pub count: usize,
    pub max_depth: usize,
}

/// Incremental engagement detection over a stream of per-turn topic tags.
/// `None` marks a turn with no topic (unknown or a special state); it never
/// joins a run.
#[derive(Debug, Clone)]
pub struct EngagementTracker<T> {
    current: Option<T>,
    run_len: usize,
    summary: EngagementSummary,
}

impl<T> Default for EngagementTracker<T> {
    fn default() -> Self {
        Self {
            current: None,
            run_len: 0,
            summary: EngagementSummary::default(),
        }
    }
}

impl<T: PartialEq + Clone> EngagementTracker<T> {
    pub fn push(&mut self, topic: Option<&T>) {
        match (topic, &self.current) {
            (Some(t), Some(cur)) if t == cur => self.run_len += 1,
            (Some(t), _) => {
                self.current = Some(t.clone());
                self.run_len = 1;
            }
            (None, _) => {
                self.current = None;
                self.run_len = 0;
            }
        }
        if self.run_len == MIN_ENGAGEMENT_DEPTH {
            self.summary.count += 1;
        }
        if self.run_len >= MIN_ENGAGEMENT_DEPTH {
            self.summary.max_depth = self.summary.max_depth.max(self.run_len);
        }
    }

    pub fn summary(&self) -> EngagementSummary {
        self.summary
    }

    /// Length of the run that includes the most recent turn.
    pub fn current_run(&self) -> usize {
        self.run_len
    }
}

pub fn detect_engagements<T: PartialEq + Clone>(topics: &[Option<T>]) -> EngagementSummary {
    let mut tracker = EngagementTracker::default();
    for t in topics {
        tracker.push(t.as_ref());
    }
    tracker.summary()
}
