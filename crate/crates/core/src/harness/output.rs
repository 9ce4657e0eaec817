//! CSV writers for experiment outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::metrics::TrialRecord;

pub const AGGREGATE_HEADER: &str = "alpha,beta,method,success_ratio";
pub const THRESHOLD_HEADER: &str = "beta,alpha";
pub const CONVERGENCE_HEADER: &str = "n,method,iter,distance";
pub const SCALING_HEADER: &str = "n,median_ns,nnz";
pub const TIMING_HEADER: &str = "method,total_wall_time_ns";

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes trial records in job order as jobs complete in any order.
///
/// Each job's rows are flushed as soon as every earlier job is on disk, so
/// with one worker every record is persisted the moment it finishes.
pub struct RecordWriter<W: Write> {
    out: W,
    next: usize,
    pending: BTreeMap<usize, Vec<TrialRecord>>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", TrialRecord::SCHEMA_COMMENT)?;
        writeln!(out, "{}", TrialRecord::CSV_HEADER)?;
        out.flush()?;
        Ok(Self { out, next: 0, pending: BTreeMap::new() })
    }

    pub fn push(&mut self, job: usize, records: Vec<TrialRecord>) -> Result<()> {
        self.pending.insert(job, records);
        while let Some(records) = self.pending.remove(&self.next) {
            for r in &records {
                writeln!(self.out, "{}", r.to_csv_row())?;
            }
            self.out.flush()?;
            self.next += 1;
        }
        Ok(())
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
