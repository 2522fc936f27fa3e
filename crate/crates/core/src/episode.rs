//! Budgeted submit-and-feedback episodes and their newline-delimited JSON protocol.
//!
//! Each episode is single-writer: its messages are applied strictly in `seq`
//! order under the episode's own lock. Distinct episodes share nothing but the
//! read-only task table, so they proceed in parallel.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{evaluate_capped, CriteriaReport, MatchConfig, Submission};
use crate::schema::{Observations, SCHEMA_VERSION};
use crate::task::{TaskBundle, Tier};

/// Resource limits of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub tier: Tier,
    pub max_tokens: u64,
    pub max_wall_seconds: f64,
    pub max_submissions: usize,
    pub max_planets_per_submission: usize,
}

impl EpisodeConfig {
    pub fn for_tier(tier: Tier) -> Self {
        let (max_tokens, max_wall_seconds, max_submissions, max_planets_per_submission) = match tier {
            Tier::Easy => (200_000, 600.0, 3, 3),
            Tier::Medium => (450_000, 900.0, 5, 5),
            Tier::Hard => (900_000, 1500.0, 10, 8),
        };
        Self {
            tier,
            max_tokens,
            max_wall_seconds,
            max_submissions,
            max_planets_per_submission,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    EnvDone,
    BudgetExceeded,
}

impl EpisodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeStatus::Running => "running",
            EpisodeStatus::EnvDone => "env_done",
            EpisodeStatus::BudgetExceeded => "budget_exceeded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalizeReason {
    AgentDone,
    Cap,
    Timeout,
    TokenLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SubmissionOutcome {
    Graded { report: CriteriaReport },
    Rejected { reason: String },
}

impl SubmissionOutcome {
    pub fn report(&self) -> Option<&CriteriaReport> {
        match self {
            SubmissionOutcome::Graded { report } => Some(report),
            SubmissionOutcome::Rejected { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub index: usize,
    pub submission: Submission,
    pub outcome: SubmissionOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub tokens_used: u64,
    pub max_tokens: u64,
    pub elapsed_seconds: f64,
    pub max_wall_seconds: f64,
    pub attempts_used: usize,
    pub attempts_remaining: usize,
    pub max_planets_per_submission: usize,
}

/// The agent-visible part of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPayload {
    pub schema_version: u32,
    pub task_id: String,
    pub tier: Tier,
    pub observations: Observations,
    pub star_mass_sun: f64,
    pub t_ref_days: f64,
}

impl TaskPayload {
    pub fn from_bundle(bundle: &TaskBundle) -> Self {
        let ds = &bundle.dataset;
        Self {
            schema_version: SCHEMA_VERSION,
            task_id: bundle.task_id.clone(),
            tier: bundle.tier,
            observations: Observations {
                times_days: ds.times_days.clone(),
                rvs_ms: ds.rvs_ms.clone(),
                sigmas_ms: ds.sigmas_ms.clone(),
                labels: ds.labels.clone(),
            },
            star_mass_sun: ds.star_mass_sun,
            t_ref_days: ds.t_ref_days,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub schema_version: u32,
    pub episode_id: String,
    pub task_id: String,
    pub tier: Tier,
    pub passed: bool,
    pub status: EpisodeStatus,
    pub reason: FinalizeReason,
    pub best_index: Option<usize>,
    pub best_report: Option<CriteriaReport>,
    pub submissions: Vec<SubmissionRecord>,
    pub tokens_used: u64,
    pub tool_calls: u64,
    pub elapsed_seconds: f64,
}

/// Snapshot of an episode's bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeState {
    pub episode_id: String,
    pub task_id: String,
    pub config: EpisodeConfig,
    pub tokens_used: u64,
    pub tool_calls: u64,
    pub elapsed_seconds: f64,
    pub submissions: Vec<SubmissionRecord>,
    pub best_index: Option<usize>,
    pub status: EpisodeStatus,
}

/// Source of wall-clock time in seconds.
pub trait Clock: Send + Sync {
    fn now_seconds(&self) -> f64;
}

#[derive(Debug)]
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now_seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Manually advanced clock for tests and scripted transcripts.
#[derive(Debug, Default)]
pub struct MockClock(Mutex<f64>);

impl MockClock {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn advance(&self, seconds: f64) {
        *self.0.lock().unwrap() += seconds;
    }

    pub fn set(&self, seconds: f64) {
        *self.0.lock().unwrap() = seconds;
    }
}

impl Clock for MockClock {
    fn now_seconds(&self) -> f64 {
        *self.0.lock().unwrap()
    }
}

/// Best graded submission: highest match score, then lowest RMS, then earliest.
pub fn best_submission(records: &[SubmissionRecord]) -> Option<usize> {
    let mut best: Option<(usize, &CriteriaReport)> = None;
    for rec in records {
        let Some(r) = rec.outcome.report() else { continue };
        let better = match best {
            None => true,
            Some((_, b)) => {
                r.match_score > b.match_score || (r.match_score == b.match_score && r.rms_ms < b.rms_ms)
            }
        };
        if better {
            best = Some((rec.index, r));
        }
    }
    best.map(|(i, _)| i)
}

struct Episode {
    id: String,
    bundle: Arc<TaskBundle>,
    config: EpisodeConfig,
    started_at: f64,
    tokens_used: u64,
    tool_calls: u64,
    submissions: Vec<SubmissionRecord>,
    status: EpisodeStatus,
    end_reason: Option<FinalizeReason>,
    next_seq: u64,
    result: Option<EpisodeResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub index: usize,
    pub outcome: SubmissionOutcome,
    pub episode_status: EpisodeStatus,
    pub budget: BudgetSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageAck {
    pub accepted: bool,
    pub episode_status: EpisodeStatus,
    pub budget: BudgetSummary,
}

/// Serves episodes over a fixed table of tasks.
pub struct Engine {
    tasks: BTreeMap<String, Arc<TaskBundle>>,
    episodes: Mutex<HashMap<String, Arc<Mutex<Episode>>>>,
    clock: Arc<dyn Clock>,
    replay: bool,
    match_cfg: MatchConfig,
    next_id: AtomicU64,
}

impl Engine {
    pub fn new(tasks: Vec<TaskBundle>, clock: Arc<dyn Clock>) -> Self {
        Self {
            tasks: tasks
                .into_iter()
                .map(|b| (b.task_id.clone(), Arc::new(b)))
                .collect(),
            episodes: Mutex::new(HashMap::new()),
            clock,
            replay: false,
            match_cfg: MatchConfig::default(),
            next_id: AtomicU64::new(0),
        }
    }

    /// Replay mode: wall-clock limits are not enforced and elapsed time reads as zero.
    pub fn with_replay(mut self, replay: bool) -> Self {
        self.replay = replay;
        self
    }

    pub fn with_match_config(mut self, cfg: MatchConfig) -> Self {
        self.match_cfg = cfg;
        self
    }

    pub fn task_ids(&self) -> Vec<String> {
        self.tasks.keys().cloned().collect()
    }

    fn episode(&self, id: &str) -> Result<Arc<Mutex<Episode>>> {
        self.episodes
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::EpisodeNotFound(id.to_string()))
    }

    fn elapsed(&self, ep: &Episode) -> f64 {
        if self.replay {
            0.0
        } else {
            self.clock.now_seconds() - ep.started_at
        }
    }

    fn budget(&self, ep: &Episode) -> BudgetSummary {
        BudgetSummary {
            tokens_used: ep.tokens_used,
            max_tokens: ep.config.max_tokens,
            elapsed_seconds: self.elapsed(ep),
            max_wall_seconds: ep.config.max_wall_seconds,
            attempts_used: ep.submissions.len(),
            attempts_remaining: ep.config.max_submissions - ep.submissions.len(),
            max_planets_per_submission: ep.config.max_planets_per_submission,
        }
    }

    /// Terminates a running episode whose wall-clock budget is spent.
    fn check_wall_clock(&self, ep: &mut Episode) -> Result<()> {
        if self.replay {
            return Ok(());
        }
        let elapsed = self.elapsed(ep);
        if elapsed > ep.config.max_wall_seconds {
            if ep.status == EpisodeStatus::Running {
                ep.status = EpisodeStatus::BudgetExceeded;
                ep.end_reason = Some(FinalizeReason::Timeout);
            }
            return Err(Error::BudgetExceeded(format!(
                "wall-clock limit of {} s passed ({elapsed:.1} s elapsed)",
                ep.config.max_wall_seconds
            )));
        }
        Ok(())
    }

    /// Opens an episode on `task_id` with the tier's default budgets.
    pub fn start_episode(&self, task_id: &str, episode_id: Option<String>) -> Result<(String, TaskPayload, BudgetSummary)> {
        let bundle = self
            .tasks
            .get(task_id)
            .ok_or_else(|| Error::TaskNotFound(task_id.to_string()))?;
        self.start_episode_with(task_id, episode_id, EpisodeConfig::for_tier(bundle.tier))
    }

    pub fn start_episode_with(
        &self,
        task_id: &str,
        episode_id: Option<String>,
        config: EpisodeConfig,
    ) -> Result<(String, TaskPayload, BudgetSummary)> {
        let bundle = self
            .tasks
            .get(task_id)
            .cloned()
            .ok_or_else(|| Error::TaskNotFound(task_id.to_string()))?;
        if bundle.tier != config.tier {
            return Err(Error::InvalidArgument(format!(
                "task tier {} does not match episode tier {}",
                bundle.tier, config.tier
            )));
        }
        let mut episodes = self.episodes.lock().unwrap();
        let id = match episode_id {
            Some(id) => id,
            None => loop {
                let n = self.next_id.fetch_add(1, Ordering::SeqCst);
                let candidate = format!("ep_{n:06}");
                if !episodes.contains_key(&candidate) {
                    break candidate;
                }
            },
        };
        if episodes.contains_key(&id) {
            return Err(Error::EpisodeConflict(id));
        }
        let ep = Episode {
            id: id.clone(),
            config,
            started_at: self.clock.now_seconds(),
            tokens_used: 0,
            tool_calls: 0,
            submissions: Vec::new(),
            status: EpisodeStatus::Running,
            end_reason: None,
            next_seq: 1,
            result: None,
            bundle: bundle.clone(),
        };
        let budget = self.budget(&ep);
        episodes.insert(id.clone(), Arc::new(Mutex::new(ep)));
        Ok((id, TaskPayload::from_bundle(&bundle), budget))
    }

    pub fn handle_submit(&self, episode_id: &str, sub: Submission) -> Result<SubmitResponse> {
        let ep = self.episode(episode_id)?;
        let mut ep = ep.lock().unwrap();
        self.submit_locked(&mut ep, sub)
    }

    fn submit_locked(&self, ep: &mut Episode, sub: Submission) -> Result<SubmitResponse> {
        self.check_wall_clock(ep)?;
        if ep.status != EpisodeStatus::Running {
            if ep.submissions.len() >= ep.config.max_submissions {
                return Err(Error::AttemptCap(ep.config.max_submissions));
            }
            return Err(Error::TerminalState(ep.status.as_str().into()));
        }
        let index = ep.submissions.len();
        let outcome = match evaluate_capped(
            &sub,
            &ep.bundle,
            &self.match_cfg,
            ep.config.max_planets_per_submission,
        ) {
            Ok(report) => SubmissionOutcome::Graded { report },
            Err(Error::RejectedSubmission(reason)) | Err(Error::MissingOffset(reason)) => {
                SubmissionOutcome::Rejected { reason }
            }
            Err(e) => return Err(e),
        };
        ep.submissions.push(SubmissionRecord {
            index,
            submission: sub,
            outcome: outcome.clone(),
        });
        if ep.submissions.len() >= ep.config.max_submissions {
            ep.status = EpisodeStatus::EnvDone;
            ep.end_reason = Some(FinalizeReason::Cap);
        }
        Ok(SubmitResponse {
            index,
            outcome,
            episode_status: ep.status,
            budget: self.budget(ep),
        })
    }

    /// Records the client-reported cumulative token count.
    pub fn report_usage(&self, episode_id: &str, tokens: u64, tool_calls: Option<u64>) -> Result<UsageAck> {
        let ep = self.episode(episode_id)?;
        let mut ep = ep.lock().unwrap();
        self.usage_locked(&mut ep, tokens, tool_calls)
    }

    fn usage_locked(&self, ep: &mut Episode, tokens: u64, tool_calls: Option<u64>) -> Result<UsageAck> {
        self.check_wall_clock(ep)?;
        if ep.status != EpisodeStatus::Running {
            return Err(Error::TerminalState(ep.status.as_str().into()));
        }
        if tokens < ep.tokens_used {
            return Err(Error::InvalidUsage(format!(
                "token counter decreased from {} to {tokens}",
                ep.tokens_used
            )));
        }
        if let Some(calls) = tool_calls {
            if calls < ep.tool_calls {
                return Err(Error::InvalidUsage(format!(
                    "tool-call counter decreased from {} to {calls}",
                    ep.tool_calls
                )));
            }
            ep.tool_calls = calls;
        }
        ep.tokens_used = tokens;
        if tokens > ep.config.max_tokens {
            ep.status = EpisodeStatus::BudgetExceeded;
            ep.end_reason = Some(FinalizeReason::TokenLimit);
        }
        Ok(UsageAck {
            accepted: ep.status == EpisodeStatus::Running,
            episode_status: ep.status,
            budget: self.budget(ep),
        })
    }

    /// Closes an episode and returns its result; repeated calls return the same result.
    pub fn finalize_episode(&self, episode_id: &str, reason: FinalizeReason) -> Result<EpisodeResult> {
        let ep = self.episode(episode_id)?;
        let mut ep = ep.lock().unwrap();
        Ok(self.finalize_locked(&mut ep, reason))
    }

    fn finalize_locked(&self, ep: &mut Episode, reason: FinalizeReason) -> EpisodeResult {
        if let Some(result) = &ep.result {
            return result.clone();
        }
        // a spent clock turns the close into a timeout
        let _ = self.check_wall_clock(ep);
        let (status, reason) = match (ep.status, ep.end_reason) {
            (EpisodeStatus::Running, _) => {
                let status = match reason {
                    FinalizeReason::AgentDone | FinalizeReason::Cap => EpisodeStatus::EnvDone,
                    FinalizeReason::Timeout | FinalizeReason::TokenLimit => EpisodeStatus::BudgetExceeded,
                };
                (status, reason)
            }
            (status, Some(end)) => (status, end),
            (status, None) => (status, reason),
        };
        ep.status = status;
        ep.end_reason = Some(reason);
        let best_index = best_submission(&ep.submissions);
        let best_report = best_index.and_then(|i| ep.submissions[i].outcome.report().cloned());
        let result = EpisodeResult {
            schema_version: SCHEMA_VERSION,
            episode_id: ep.id.clone(),
            task_id: ep.bundle.task_id.clone(),
            tier: ep.bundle.tier,
            passed: best_report.as_ref().is_some_and(|r| r.passed),
            status,
            reason,
            best_index,
            best_report,
            submissions: ep.submissions.clone(),
            tokens_used: ep.tokens_used,
            tool_calls: ep.tool_calls,
            elapsed_seconds: self.elapsed(ep),
        };
        ep.result = Some(result.clone());
        result
    }

    /// Runs a one-shot episode: a single submission followed by `agent_done`.
    pub fn grade_once(&self, task_id: &str, episode_id: Option<String>, sub: Submission) -> Result<EpisodeResult> {
        let (id, _, _) = self.start_episode(task_id, episode_id)?;
        self.handle_submit(&id, sub)?;
        self.finalize_episode(&id, FinalizeReason::AgentDone)
    }

    pub fn state(&self, episode_id: &str) -> Result<EpisodeState> {
        let ep = self.episode(episode_id)?;
        let ep = ep.lock().unwrap();
        Ok(EpisodeState {
            episode_id: ep.id.clone(),
            task_id: ep.bundle.task_id.clone(),
            config: ep.config,
            tokens_used: ep.tokens_used,
            tool_calls: ep.tool_calls,
            elapsed_seconds: self.elapsed(&ep),
            submissions: ep.submissions.clone(),
            best_index: best_submission(&ep.submissions),
            status: ep.status,
        })
    }

    /// Applies one protocol message and returns the response message.
    pub fn handle_message(&self, msg: ClientMessage) -> ServerMessage {
        match msg {
            ClientMessage::Hello {
                episode_id,
                seq,
                task_id,
                ..
            } => {
                if seq != 0 {
                    return ServerMessage::error(episode_id, Some(seq), &Error::Protocol(format!(
                        "hello must carry seq 0, got {seq}"
                    )));
                }
                let task_id = match task_id {
                    Some(t) => t,
                    None if self.tasks.len() == 1 => self.tasks.keys().next().unwrap().clone(),
                    None => {
                        return ServerMessage::error(episode_id, Some(seq), &Error::Protocol(
                            "hello must name a task_id when several tasks are served".into(),
                        ))
                    }
                };
                match self.start_episode(&task_id, episode_id.clone()) {
                    Ok((id, task, budget)) => ServerMessage::Task {
                        episode_id: id,
                        seq,
                        task,
                        budget,
                    },
                    Err(e) => ServerMessage::error(episode_id, Some(seq), &e),
                }
            }
            ClientMessage::Submit {
                episode_id,
                seq,
                submission,
            } => self.sequenced(&episode_id, seq, |ep| {
                self.submit_locked(ep, submission).map(|r| ServerMessage::Report {
                    episode_id: episode_id.clone(),
                    seq,
                    index: r.index,
                    outcome: r.outcome,
                    episode_status: r.episode_status,
                    budget: r.budget,
                })
            }),
            ClientMessage::Usage {
                episode_id,
                seq,
                tokens,
                tool_calls,
            } => self.sequenced(&episode_id, seq, |ep| {
                self.usage_locked(ep, tokens, tool_calls).map(|a| ServerMessage::UsageAck {
                    episode_id: episode_id.clone(),
                    seq,
                    accepted: a.accepted,
                    episode_status: a.episode_status,
                    budget: a.budget,
                })
            }),
            ClientMessage::Finalize {
                episode_id,
                seq,
                reason,
            } => self.sequenced(&episode_id, seq, |ep| {
                Ok(ServerMessage::Result {
                    episode_id: episode_id.clone(),
                    seq,
                    result: Box::new(self.finalize_locked(ep, reason)),
                })
            }),
        }
    }

    fn sequenced(
        &self,
        episode_id: &str,
        seq: u64,
        apply: impl FnOnce(&mut Episode) -> Result<ServerMessage>,
    ) -> ServerMessage {
        let ep = match self.episode(episode_id) {
            Ok(ep) => ep,
            Err(e) => return ServerMessage::error(Some(episode_id.to_string()), Some(seq), &e),
        };
        let mut ep = ep.lock().unwrap();
        if seq != ep.next_seq {
            return ServerMessage::error(
                Some(episode_id.to_string()),
                Some(seq),
                &Error::Protocol(format!("expected seq {}, got {seq}", ep.next_seq)),
            );
        }
        ep.next_seq += 1;
        apply(&mut ep)
            .unwrap_or_else(|e| ServerMessage::error(Some(episode_id.to_string()), Some(seq), &e))
    }

    /// Parses one line, applies it and returns the serialized response.
    pub fn handle_line(&self, line: &str) -> String {
        let response = match serde_json::from_str::<ClientMessage>(line) {
            Ok(msg) => self.handle_message(msg),
            Err(e) => {
                let (episode_id, seq) = envelope_of(line);
                ServerMessage::error(episode_id, seq, &Error::Protocol(format!("malformed message: {e}")))
            }
        };
        serde_json::to_string(&response).expect("server messages serialize")
    }
}

fn envelope_of(line: &str) -> (Option<String>, Option<u64>) {
    let Ok(v) = serde_json::from_str::<serde_json::Value>(line) else {
        return (None, None);
    };
    (
        v.get("episode_id").and_then(|x| x.as_str()).map(str::to_string),
        v.get("seq").and_then(|x| x.as_u64()),
    )
}

/// Messages sent by agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        #[serde(default)]
        episode_id: Option<String>,
        seq: u64,
        #[serde(default)]
        task_id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client: Option<String>,
    },
    Submit {
        episode_id: String,
        seq: u64,
        submission: Submission,
    },
    Usage {
        episode_id: String,
        seq: u64,
        tokens: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tool_calls: Option<u64>,
    },
    Finalize {
        episode_id: String,
        seq: u64,
        reason: FinalizeReason,
    },
}

/// Messages sent by the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Task {
        episode_id: String,
        seq: u64,
        task: TaskPayload,
        budget: BudgetSummary,
    },
    Report {
        episode_id: String,
        seq: u64,
        index: usize,
        outcome: SubmissionOutcome,
        episode_status: EpisodeStatus,
        budget: BudgetSummary,
    },
    UsageAck {
        episode_id: String,
        seq: u64,
        accepted: bool,
        episode_status: EpisodeStatus,
        budget: BudgetSummary,
    },
    Result {
        episode_id: String,
        seq: u64,
        result: Box<EpisodeResult>,
    },
    Error {
        episode_id: Option<String>,
        seq: Option<u64>,
        code: String,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(episode_id: Option<String>, seq: Option<u64>, err: &Error) -> Self {
        ServerMessage::Error {
            episode_id,
            seq,
            code: err.code().to_string(),
            message: err.to_string(),
        }
    }

    pub fn error_code(&self) -> Option<&str> {
        match self {
            ServerMessage::Error { code, .. } => Some(code),
            _ => None,
        }
    }
}

/// Serves newline-delimited messages until the reader is exhausted.
pub fn serve_lines<R: BufRead, W: Write>(engine: &Engine, reader: R, mut writer: W) -> io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(writer, "{}", engine.handle_line(&line))?;
        writer.flush()?;
    }
    Ok(())
}

/// Replays a recorded client transcript and returns the response lines.
pub fn replay_transcript<'a>(engine: &Engine, lines: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    lines
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| engine.handle_line(l))
        .collect()
}
