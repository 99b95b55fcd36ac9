use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SvdnetError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Step0,
    Decorrelate,
    Restraint,
    Relaxation,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Step0 => "step0",
            Phase::Decorrelate => "decorrelate",
            Phase::Restraint => "restraint",
            Phase::Relaxation => "relaxation",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = SvdnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step0" => Ok(Phase::Step0),
            "decorrelate" => Ok(Phase::Decorrelate),
            "restraint" => Ok(Phase::Restraint),
            "relaxation" => Ok(Phase::Relaxation),
            other => Err(SvdnetError::Format(format!("unknown phase '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub rri_index: usize,
    pub phase: Phase,
    pub s_of_w: f64,
    pub train_loss: f64,
    pub rank1: f64,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RriTrace {
    pub records: Vec<TraceRecord>,
    pub converged: bool,
}

pub const TRACE_HEADER: &str = "rri_index,phase,s_of_w,train_loss,rank1,mAP";

impl RriTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn phase_records(&self, phase: Phase) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    /// Post-relaxation orthogonality scores, one per completed iteration.
    pub fn relaxation_scores(&self) -> Vec<f64> {
        self.phase_records(Phase::Relaxation).map(|r| r.s_of_w).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.rri_index, r.phase, r.s_of_w, r.train_loss, r.rank1, r.map
            )
            .unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(TRACE_HEADER) {
            return Err(SvdnetError::Format(format!("trace header must be '{TRACE_HEADER}'")));
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| SvdnetError::Format(format!("trace line {}: bad {what}", n + 2));
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 6 {
                return Err(bad("field count"));
            }
            let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
            records.push(TraceRecord {
                rri_index: f[0].parse().map_err(|_| bad("rri_index"))?,
                phase: f[1].parse()?,
                s_of_w: num(f[2], "s_of_w")?,
                train_loss: num(f[3], "train_loss")?,
                rank1: num(f[4], "rank1")?,
                map: num(f[5], "mAP")?,
            });
        }
        Ok(Self { records, converged: false })
    }
}
