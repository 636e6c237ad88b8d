//! Episode logs as JSONL: an `episode` header line followed by one `attempt`
//! line per attempt.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::{Ablation, AttemptRecord, EpisodeLog, PipelineConfig, PipelinePhase, TerminalStatus};
use crate::error::{Error, Result};
use crate::reasoner::{TaskKind, TaskSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub episode: usize,
    pub task: TaskSpec,
    pub scene_seed: u64,
    pub initial_count: usize,
    pub reasoner: String,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogLine {
    Episode(EpisodeHeader),
    Attempt(AttemptRecord),
}

pub fn write_logs(mut w: impl Write, logs: &[EpisodeLog]) -> Result<()> {
    for log in logs {
        serde_json::to_writer(&mut w, &LogLine::Episode(log.header.clone()))?;
        w.write_all(b"\n")?;
        for a in &log.attempts {
            serde_json::to_writer(&mut w, &LogLine::Attempt(a.clone()))?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn finish(header: EpisodeHeader, attempts: Vec<AttemptRecord>) -> EpisodeLog {
    let total_steps = attempts.iter().map(|a| a.steps as u64).sum();
    let task_completed = match header.task.kind {
        TaskKind::A => {
            attempts
                .iter()
                .filter(|a| a.terminal_status == TerminalStatus::Retrieved)
                .count()
                == header.initial_count
        }
        TaskKind::B => attempts.last().is_some_and(|a| a.target_hit),
    };
    EpisodeLog {
        header,
        attempts,
        task_completed,
        total_steps,
    }
}

/// Parses JSONL written by [`write_logs`]; totals and completion are
/// recomputed from the attempt lines.
pub fn read_logs(r: impl BufRead) -> Result<Vec<EpisodeLog>> {
    let mut logs = Vec::new();
    let mut open: Option<(EpisodeHeader, Vec<AttemptRecord>)> = None;
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogLine>(&line)? {
            LogLine::Episode(h) => {
                if let Some((h, a)) = open.take() {
                    logs.push(finish(h, a));
                }
                open = Some((h, Vec::new()));
            }
            LogLine::Attempt(a) => match open.as_mut() {
                Some((_, list)) => list.push(a),
                None => return Err(Error::Config(format!("line {}: attempt before any episode header", n + 1))),
            },
        }
    }
    if let Some((h, a)) = open {
        logs.push(finish(h, a));
    }
    Ok(logs)
}

fn check_attempt(a: &AttemptRecord, last: bool, cfg: &PipelineConfig) -> std::result::Result<(), String> {
    let p = &a.phases;
    if p.first() != Some(&PipelinePhase::Observe) {
        return Err("trace does not start with observe".into());
    }
    if let Some(w) = p.windows(2).find(|w| !w[0].can_precede(w[1])) {
        return Err(format!("illegal transition {:?} -> {:?}", w[0], w[1]));
    }
    if p.iter().filter(|x| **x == PipelinePhase::FineTune).count() > 1 {
        return Err("fine-tuning ran more than once".into());
    }
    if a.steps < 1 {
        return Err("attempt without steps".into());
    }
    if a.terminal_status == TerminalStatus::Failed {
        if !last {
            return Err("failed attempt is not the last".into());
        }
        if p.contains(&PipelinePhase::Done) || a.error.is_none() {
            return Err("failed attempt must carry an error and no done phase".into());
        }
        return Ok(());
    }
    let body_end = if last { p.len().checked_sub(2) } else { p.len().checked_sub(1) };
    let action = body_end.map(|i| p[i]).filter(|x| x.is_terminal_action());
    let Some(action) = action else {
        return Err("trace does not end in a delivery or abort".into());
    };
    if last && p.last() != Some(&PipelinePhase::Done) {
        return Err("last attempt does not end in done".into());
    }
    let coop = a.coop.ok_or("completed attempt without a cooperation decision")?;
    let want_cell = !coop.error() && coop.dual() && !cfg.ablated(Ablation::DualArm);
    if a.coop_cell.is_some() != want_cell {
        return Err("coop_cell presence disagrees with the cooperation decision".into());
    }
    let expected_action = if coop.error() {
        PipelinePhase::AbortAttempt
    } else if want_cell {
        PipelinePhase::DualGraspDeliver
    } else {
        PipelinePhase::SingleDeliver
    };
    if action != expected_action {
        return Err(format!("decision {coop:?} ended in {action:?}"));
    }
    let s = cfg.steps;
    let base = match action {
        PipelinePhase::AbortAttempt => s.abort,
        PipelinePhase::DualGraspDeliver => s.dual,
        _ => s.single,
    };
    if a.steps != base + if a.fine_tune_triggered { s.fine_tune } else { 0 } {
        return Err(format!("step count {} breaks the accounting rule", a.steps));
    }
    if a.fine_tune_triggered != p.contains(&PipelinePhase::FineTune) {
        return Err("fine_tune_triggered disagrees with the trace".into());
    }
    Ok(())
}

/// Checks every structural invariant of an episode log.
pub fn validate_log(log: &EpisodeLog) -> std::result::Result<(), String> {
    let n = log.attempts.len();
    for (i, a) in log.attempts.iter().enumerate() {
        if a.attempt != i {
            return Err(format!("attempt {i} carries index {}", a.attempt));
        }
        check_attempt(a, i + 1 == n, &log.header.config).map_err(|e| format!("attempt {i}: {e}"))?;
    }
    let total: u64 = log.attempts.iter().map(|a| a.steps as u64).sum();
    if total != log.total_steps {
        return Err(format!("total_steps {} != sum {total}", log.total_steps));
    }
    let retrieved = log
        .attempts
        .iter()
        .filter(|a| a.terminal_status == TerminalStatus::Retrieved)
        .count();
    if retrieved > log.header.initial_count {
        return Err("more garments retrieved than loaded".into());
    }
    let expected = match log.header.task.kind {
        TaskKind::A => retrieved == log.header.initial_count,
        TaskKind::B => log.attempts.last().is_some_and(|a| a.target_hit),
    };
    if expected != log.task_completed {
        return Err("task_completed disagrees with the attempts".into());
    }
    Ok(())
}
