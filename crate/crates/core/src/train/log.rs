use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const LOG_HEADER: &str = "step,epoch,lr,loss,seconds";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub seconds: f64,
}

impl StepRecord {
    pub fn csv_line(&self) -> String {
        format!("{},{},{},{},{:.3}", self.step, self.epoch, self.lr, self.loss, self.seconds)
    }
}

/// Per-step CSV log. Appends when the file already has a header (resume).
pub struct TrainLog {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl TrainLog {
    pub fn open(path: impl AsRef<Path>, append: bool) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let has_header = append && std::fs::metadata(&path).is_ok_and(|m| m.len() > 0);
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut log = Self {
            out: BufWriter::new(file),
            path,
        };
        if !has_header {
            log.write_line(LOG_HEADER)?;
        }
        Ok(log)
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn record(&mut self, r: &StepRecord) -> Result<()> {
        self.write_line(&r.csv_line())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Reads back `(step, loss)` pairs.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<StepRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| -> Result<f64> {
            f.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidArgument(format!("{}: bad line {}", path.display(), n + 1)))
        };
        out.push(StepRecord {
            step: parse(0)? as u64,
            epoch: parse(1)? as usize,
            lr: parse(2)?,
            loss: parse(3)?,
            seconds: parse(4)?,
        });
    }
    Ok(out)
}
