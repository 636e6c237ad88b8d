use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{EpisodeLog, TerminalStatus};
use crate::reasoner::TaskKind;

/// Raw counts every ratio is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricCounts {
    pub episodes: usize,
    /// Task A: retrieved garments and garments loaded.
    pub retrieved: usize,
    pub loaded: usize,
    /// Task B: completed tasks, tasks, and their total motion steps.
    pub completed: usize,
    pub tasks: usize,
    pub steps: u64,
    /// All tasks: attempts that asked for a second arm, attempts without a
    /// reported lift error, and all attempts.
    pub dual_triggers: usize,
    pub eligible_attempts: usize,
    pub attempts: usize,
}

impl MetricCounts {
    pub fn from_logs(logs: &[EpisodeLog]) -> Self {
        let mut c = MetricCounts {
            episodes: logs.len(),
            ..MetricCounts::default()
        };
        for log in logs {
            match log.header.task.kind {
                TaskKind::A => {
                    c.loaded += log.header.initial_count;
                    c.retrieved += log
                        .attempts
                        .iter()
                        .filter(|a| a.terminal_status == TerminalStatus::Retrieved)
                        .count();
                }
                TaskKind::B => {
                    c.tasks += 1;
                    c.completed += log.task_completed as usize;
                    c.steps += log.total_steps;
                }
            }
            c.attempts += log.attempts.len();
            c.eligible_attempts += log.attempts.iter().filter(|a| a.coop_eligible()).count();
            c.dual_triggers += log.attempts.iter().filter(|a| a.dual_triggered()).count();
        }
        c
    }
}

fn quotient(num: f64, den: usize, what: &str) -> Result<f64> {
    if den == 0 {
        return Err(Error::domain(format!("{what} is undefined: zero denominator")));
    }
    Ok(num / den as f64)
}

/// Retrieved garments over loaded garments (Task A logs).
pub fn asr_a(logs: &[EpisodeLog]) -> Result<f64> {
    let c = MetricCounts::from_logs(logs);
    quotient(c.retrieved as f64, c.loaded, "ASR_A")
}

/// Completed tasks over tasks (Task B logs).
pub fn asr_b(logs: &[EpisodeLog]) -> Result<f64> {
    let c = MetricCounts::from_logs(logs);
    quotient(c.completed as f64, c.tasks, "ASR_B")
}

/// Motion steps per task (Task B logs).
pub fn ams(logs: &[EpisodeLog]) -> Result<f64> {
    let c = MetricCounts::from_logs(logs);
    quotient(c.steps as f64, c.tasks, "AMS")
}

/// Dual-arm triggers over attempts without a lift error.
pub fn pdr(logs: &[EpisodeLog]) -> Result<f64> {
    let c = MetricCounts::from_logs(logs);
    quotient(c.dual_triggers as f64, c.eligible_attempts, "PDR")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub counts: MetricCounts,
    pub asr_a: Option<f64>,
    pub asr_b: Option<f64>,
    pub ams: Option<f64>,
    pub pdr: Option<f64>,
}

impl MetricsReport {
    /// Ratios whose denominator is zero are left out.
    pub fn from_logs(label: &str, logs: &[EpisodeLog]) -> Self {
        let counts = MetricCounts::from_logs(logs);
        let q = |n: f64, d: usize| (d > 0).then(|| n / d as f64);
        MetricsReport {
            label: label.to_string(),
            counts,
            asr_a: q(counts.retrieved as f64, counts.loaded),
            asr_b: q(counts.completed as f64, counts.tasks),
            ams: q(counts.steps as f64, counts.tasks),
            pdr: q(counts.dual_triggers as f64, counts.eligible_attempts),
        }
    }
}

/// Three decimals, rounding half to even on the shortest decimal form of `x`.
pub fn fmt_ratio(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{}", x.abs());
    let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
    let mut digits: Vec<u8> = int.bytes().chain(frac.bytes().chain(std::iter::repeat(b'0')).take(3)).collect();
    let rest = frac.get(3..).unwrap_or("").as_bytes();
    let up = match rest.first() {
        Some(&d) if d > b'5' => true,
        Some(&b'5') => rest[1..].iter().any(|&d| d != b'0') || (digits.last().unwrap() - b'0') % 2 == 1,
        _ => false,
    };
    if up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, b'1');
                break;
            }
            i -= 1;
            if digits[i] == b'9' {
                digits[i] = b'0';
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let n = digits.len();
    let body = format!(
        "{}.{}",
        std::str::from_utf8(&digits[..n - 3]).unwrap(),
        std::str::from_utf8(&digits[n - 3..]).unwrap()
    );
    let zero = digits.iter().all(|&d| d == b'0');
    if x.is_sign_negative() && !zero {
        format!("-{body}")
    } else {
        body
    }
}

/// Aligned text table, one row per report.
pub fn report_table(reports: &[MetricsReport]) -> String {
    let header = ["method", "episodes", "ASR_A", "ASR_B", "AMS", "PDR"];
    let cell = |v: Option<f64>| v.map_or("-".to_string(), fmt_ratio);
    let rows: Vec<[String; 6]> = reports
        .iter()
        .map(|r| {
            [
                r.label.clone(),
                r.counts.episodes.to_string(),
                cell(r.asr_a),
                cell(r.asr_b),
                cell(r.ams),
                cell(r.pdr),
            ]
        })
        .collect();
    let mut width: [usize; 6] = header.map(str::len);
    for row in &rows {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = width[i]) } else { format!("{c:>w$}", w = width[i]) })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&header.map(String::from));
    for row in &rows {
        out += &line(row);
    }
    out
}
