//! Build jobs: a status board plus one worker that runs builds strictly one at a time.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use seglab_core::pipeline::{BuildConfig, FieldError};
use seglab_core::store::VersionId;
use tokio::sync::mpsc;

use crate::error::{ApiError, ErrorBody};
use crate::store::Store;

pub type JobId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Ready,
    Failed,
}

impl JobState {
    fn rank(self) -> u8 {
        match self {
            JobState::Queued => 0,
            JobState::Running => 1,
            JobState::Ready | JobState::Failed => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: JobId,
    pub state: JobState,
    pub progress: String,
    pub version_id: Option<VersionId>,
    pub error: Option<ErrorBody>,
}

impl JobStatus {
    pub fn is_finished(&self) -> bool {
        matches!(self.state, JobState::Ready | JobState::Failed)
    }
}

#[derive(Default)]
struct Table {
    next: JobId,
    jobs: BTreeMap<JobId, JobStatus>,
}

/// Job statuses plus the queue feeding the worker.
pub struct JobBoard {
    table: Mutex<Table>,
    queue: mpsc::UnboundedSender<(JobId, BuildConfig)>,
}

impl JobBoard {
    /// Creates the board and starts its worker on the current tokio runtime.
    pub fn start(store: Arc<Store>) -> Arc<Self> {
        let (tx, rx) = mpsc::unbounded_channel();
        let board = Arc::new(Self {
            table: Mutex::new(Table::default()),
            queue: tx,
        });
        tokio::spawn(worker(Arc::downgrade(&board), store, rx));
        board
    }

    fn insert(&self, state: JobState, progress: &str, error: Option<ErrorBody>) -> JobStatus {
        let mut t = self.table.lock().unwrap();
        t.next += 1;
        let status = JobStatus {
            job_id: t.next,
            state,
            progress: progress.into(),
            version_id: None,
            error,
        };
        t.jobs.insert(status.job_id, status.clone());
        status
    }

    pub fn enqueue(&self, config: BuildConfig) -> JobStatus {
        let status = self.insert(JobState::Queued, "waiting for the build worker", None);
        // the worker lives as long as the board, so the receiver is still open
        let _ = self.queue.send((status.job_id, config));
        status
    }

    /// Records a request that failed validation; it never enters the queue.
    pub fn reject(&self, fields: Vec<FieldError>) -> JobStatus {
        self.insert(JobState::Failed, "request rejected", Some(ApiError::invalid(fields).body))
    }

    pub fn get(&self, id: JobId) -> Option<JobStatus> {
        self.table.lock().unwrap().jobs.get(&id).cloned()
    }

    /// Moves a job forward. Backward or sideways transitions are ignored.
    fn advance(&self, id: JobId, update: impl FnOnce(&mut JobStatus)) {
        let mut t = self.table.lock().unwrap();
        let Some(job) = t.jobs.get_mut(&id) else { return };
        let mut next = job.clone();
        update(&mut next);
        if next.state.rank() > job.state.rank() {
            *job = next;
        }
    }
}

async fn worker(
    board: std::sync::Weak<JobBoard>,
    store: Arc<Store>,
    mut rx: mpsc::UnboundedReceiver<(JobId, BuildConfig)>,
) {
    while let Some((id, config)) = rx.recv().await {
        let Some(b) = board.upgrade() else { break };
        b.advance(id, |j| {
            j.state = JobState::Running;
            j.progress = "building".into();
        });
        drop(b);

        let s = store.clone();
        let outcome = tokio::task::spawn_blocking(move || s.build(&config, Utc::now())).await;
        let Some(b) = board.upgrade() else { break };
        match outcome {
            Ok(Ok(version)) => {
                tracing::info!(job = id, version, "build ready");
                b.advance(id, |j| {
                    j.state = JobState::Ready;
                    j.progress = "done".into();
                    j.version_id = Some(version);
                });
            }
            Ok(Err(e)) => {
                tracing::warn!(job = id, error = %e, "build failed");
                b.advance(id, |j| {
                    j.state = JobState::Failed;
                    j.progress = "build failed".into();
                    j.error = Some(ApiError::from(e).body);
                });
            }
            Err(join) => {
                tracing::error!(job = id, error = %join, "build task panicked");
                b.advance(id, |j| {
                    j.state = JobState::Failed;
                    j.progress = "build failed".into();
                    j.error = Some(ApiError::internal("build task aborted").body);
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test]
    async fn states_only_move_forward() {
        let dir = tempfile::tempdir().unwrap();
        let board = JobBoard::start(Arc::new(Store::open(dir.path()).unwrap()));
        let job = board.reject(vec![FieldError {
            field: "params.k".into(),
            message: "bad".into(),
        }]);
        board.advance(job.job_id, |j| j.state = JobState::Running);
        board.advance(job.job_id, |j| j.state = JobState::Ready);
        assert_eq!(board.get(job.job_id).unwrap().state, JobState::Failed);
        assert!(board.get(job.job_id + 1).is_none());
    }
}
