use std::time::Instant;

use super::{run_cycle, CycleOutcome, PipelineConfig, PipelineError, Sources};

/// Result of one watcher poll.
#[derive(Debug)]
pub enum PollOutcome {
    /// Inputs have the fingerprint of the last cycle.
    Unchanged,
    /// An input file could not be read; retried on the next poll.
    Waiting(PipelineError),
    Cycle {
        number: usize,
        outcome: Box<CycleOutcome>,
        elapsed_ms: f64,
    },
    /// The cycle failed; previous outputs are untouched.
    Failed { number: usize, error: PipelineError },
}

impl PollOutcome {
    /// One-line log entry, `None` when nothing happened.
    pub fn log_line(&self) -> Option<String> {
        match self {
            PollOutcome::Unchanged => None,
            PollOutcome::Waiting(e) => Some(format!("waiting for inputs: {e}")),
            PollOutcome::Cycle {
                number,
                outcome,
                elapsed_ms,
            } => Some(format!(
                "cycle {number}: {} ({elapsed_ms:.0} ms)",
                outcome.summary()
            )),
            PollOutcome::Failed { number, error } => {
                let first = error.to_string();
                let first = first.lines().next().unwrap_or_default().to_string();
                Some(format!("cycle {number} failed, outputs kept: {first}"))
            }
        }
    }
}

/// Polls the input fingerprints and runs a check-and-generate cycle when
/// they change. Edits made between two polls coalesce into one cycle on
/// the latest content. A failing cycle is recorded so the same broken
/// content is not retried.
#[derive(Debug)]
pub struct Watcher {
    cfg: PipelineConfig,
    last: Option<String>,
    cycles: usize,
}

impl Watcher {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.check_paths(false)?;
        Ok(Watcher {
            cfg,
            last: None,
            cycles: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn poll_once(&mut self) -> PollOutcome {
        let src = match Sources::read(&self.cfg) {
            Ok(s) => s,
            Err(e) => return PollOutcome::Waiting(e),
        };
        let fp = src.fingerprint();
        if self.last.as_deref() == Some(fp.as_str()) {
            return PollOutcome::Unchanged;
        }
        self.last = Some(fp);
        self.cycles += 1;
        let number = self.cycles;
        let start = Instant::now();
        match run_cycle(&self.cfg, &src) {
            Ok(outcome) => PollOutcome::Cycle {
                number,
                outcome: Box::new(outcome),
                elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            },
            Err(error) => PollOutcome::Failed { number, error },
        }
    }

    /// Polls at the configured interval until `keep_going` returns false.
    pub fn run(&mut self, mut keep_going: impl FnMut(&PollOutcome) -> bool) {
        loop {
            let outcome = self.poll_once();
            if !keep_going(&outcome) {
                return;
            }
            std::thread::sleep(self.cfg.poll_interval);
        }
    }
}
