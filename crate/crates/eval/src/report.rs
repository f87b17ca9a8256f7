use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::metrics::Similarity;
use crate::symbolic::{SymbolicScore, Verdict};

/// Everything measured for one task. Verdict counts are zero when no
/// symbolic score was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub chain_id: String,
    pub sym_score: Option<f64>,
    pub correct: usize,
    pub missing: usize,
    pub wrong: usize,
    pub unintended: usize,
    pub per_op_verdicts: Vec<Verdict>,
    pub failed_steps: Vec<String>,
    pub i_sim: Option<f64>,
    /// Null when either edit direction is degenerate.
    pub d_sim: Option<f64>,
    pub judge_score: Option<f64>,
    pub judge_error: Option<String>,
}

impl EvalReport {
    pub fn new(chain_id: impl Into<String>, score: SymbolicScore) -> EvalReport {
        EvalReport::unscored(chain_id).with_symbolic(score)
    }

    pub fn unscored(chain_id: impl Into<String>) -> EvalReport {
        EvalReport {
            chain_id: chain_id.into(),
            sym_score: None,
            correct: 0,
            missing: 0,
            wrong: 0,
            unintended: 0,
            per_op_verdicts: Vec::new(),
            failed_steps: Vec::new(),
            i_sim: None,
            d_sim: None,
            judge_score: None,
            judge_error: None,
        }
    }

    pub fn with_symbolic(mut self, score: SymbolicScore) -> EvalReport {
        self.sym_score = Some(score.sym_score);
        self.correct = score.correct;
        self.missing = score.missing;
        self.wrong = score.wrong;
        self.unintended = score.unintended;
        self.per_op_verdicts = score.verdicts;
        self.failed_steps = score.failed_steps;
        self
    }

    pub fn with_similarity(mut self, s: Similarity) -> EvalReport {
        self.i_sim = Some(s.i_sim);
        self.d_sim = s.d_sim;
        self
    }
}

/// One row per report: chain_id, sym_score, i_sim, d_sim, judge_score.
/// Missing values are empty cells.
pub fn write_summary_csv<W: Write>(out: W, reports: &[EvalReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["chain_id", "sym_score", "i_sim", "d_sim", "judge_score"])?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in reports {
        w.write_record([r.chain_id.clone(), cell(r.sym_score), cell(r.i_sim), cell(r.d_sim), cell(r.judge_score)])?;
    }
    w.flush()?;
    Ok(())
}
