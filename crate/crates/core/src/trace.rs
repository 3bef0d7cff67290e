//! Per-step convergence records and their CSV form.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::reference::Oracle;

/// Header written for every trace CSV.
pub const CSV_HEADER: &str = "step,updates,err_l1,cert,defect";

/// Conservation defect above which a run aborts.
pub const DEFECT_ABORT: f64 = 1e-6;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    /// Cumulative number of page updates up to and including this step.
    pub updates: u64,
    /// `‖x* - x‖₁` against the dense oracle, when one was supplied.
    pub err_l1: Option<f64>,
    /// Oracle-free error certificate.
    pub cert: Option<f64>,
    /// `‖x + (I - Q)^{-1} Q z - x*‖₁`, when an oracle was supplied.
    pub defect: Option<f64>,
    pub x: Option<Vec<f64>>,
}

impl TraceRow {
    /// Exact error when known, certificate otherwise.
    pub fn error(&self) -> Option<f64> {
        self.err_l1.or(self.cert)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let width = self.rows.iter().find_map(|r| r.x.as_ref().map(Vec::len));
        write!(w, "{CSV_HEADER}")?;
        if let Some(n) = width {
            for i in 0..n {
                write!(w, ",x{i}")?;
            }
        }
        writeln!(w)?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            write!(
                w,
                "{},{},{},{},{}",
                r.step,
                r.updates,
                opt(r.err_l1),
                opt(r.cert),
                opt(r.defect)
            )?;
            if let Some(x) = &r.x {
                for v in x {
                    write!(w, ",{}", fmt_f64(*v))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// When to stop a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_steps: usize,
    /// Target L1 error. Push engines stop once their certificate
    /// `(1 - m)/m · ‖z‖₁` reaches it; the power method compares it with the
    /// step difference.
    pub tol: Option<f64>,
}

impl StopRule {
    pub fn steps(max_steps: usize) -> Self {
        Self {
            max_steps,
            tol: None,
        }
    }

    pub fn until(max_steps: usize, tol: f64) -> Self {
        Self {
            max_steps,
            tol: Some(tol),
        }
    }
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_steps: 100_000,
            tol: None,
        }
    }
}

/// How often rows are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cadence {
    EverySteps(usize),
    /// Keep a row whenever the cumulative update count crosses a multiple.
    EveryUpdates(u64),
}

impl Cadence {
    /// Every step up to 1,000 pages, every `n` updates beyond.
    pub fn default_for(n: usize) -> Self {
        if n <= 1_000 {
            Cadence::EverySteps(1)
        } else {
            Cadence::EveryUpdates(n as u64)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions<'a> {
    pub oracle: Option<&'a Oracle>,
    pub cadence: Cadence,
    pub record_x: bool,
    /// Compute the conservation defect on every kept row (needs an oracle).
    pub defect: bool,
}

impl Default for TraceOptions<'_> {
    fn default() -> Self {
        Self {
            oracle: None,
            cadence: Cadence::EverySteps(1),
            record_x: false,
            defect: true,
        }
    }
}

impl<'a> TraceOptions<'a> {
    pub fn with_oracle(oracle: &'a Oracle) -> Self {
        Self {
            oracle: Some(oracle),
            ..Self::default()
        }
    }
}

pub(crate) struct Recorder<'a> {
    opts: TraceOptions<'a>,
    last: Option<(usize, u64)>,
    trace: Trace,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(opts: &TraceOptions<'a>) -> Self {
        Self {
            opts: *opts,
            last: None,
            trace: Trace::default(),
        }
    }

    pub(crate) fn wants(&self, step: usize, updates: u64) -> bool {
        let Some((last_step, last_updates)) = self.last else {
            return true;
        };
        if last_step == step {
            return false;
        }
        match self.opts.cadence {
            Cadence::EverySteps(j) => step.is_multiple_of(j.max(1)),
            Cadence::EveryUpdates(u) => {
                let u = u.max(1);
                updates / u > last_updates / u
            }
        }
    }

    /// Appends a row if the cadence asks for one or `force` is set.
    pub(crate) fn record(
        &mut self,
        step: usize,
        updates: u64,
        x: &[f64],
        z: Option<&[f64]>,
        cert: Option<f64>,
        force: bool,
    ) -> Result<()> {
        let forced = force && self.last.is_none_or(|(s, _)| s != step);
        if !forced && !self.wants(step, updates) {
            return Ok(());
        }
        let oracle = self.opts.oracle;
        let defect = match (oracle, z) {
            (Some(o), Some(z)) if self.opts.defect => Some(o.conservation_defect(x, z)),
            _ => None,
        };
        if let Some(d) = defect {
            if d.is_nan() || d > DEFECT_ABORT {
                return Err(Error::Numerical(format!(
                    "conservation defect {d:e} at step {step} exceeds {DEFECT_ABORT:e}"
                )));
            }
        }
        self.trace.rows.push(TraceRow {
            step,
            updates,
            err_l1: oracle.map(|o| o.l1_error(x)),
            cert,
            defect,
            x: self.opts.record_x.then(|| x.to_vec()),
        });
        self.last = Some((step, updates));
        Ok(())
    }

    pub(crate) fn finish(self) -> Trace {
        self.trace
    }
}
