use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "iter,rank_s,critic_gap_pre,critic_gap_post,recon,gp";

/// Monitored quantities of one outer iteration.
///
/// `critic_gap_pre` is measured after the critic updates and before the
/// encoder/generator update, `critic_gap_post` on the same batch after it.
/// In WGAN mode `recon` is zero; in WAE mode the gap columns carry the MMD
/// term and `gp` is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub rank_s: usize,
    pub critic_gap_pre: f64,
    pub critic_gap_post: f64,
    pub recon: f64,
    pub gp: f64,
}

impl IterRecord {
    /// `ℓ̂` on the iteration's batch before the encoder/generator update.
    pub fn loss(&self) -> f64 {
        self.recon + self.critic_gap_pre
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<IterRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    /// Mean of `field` over the last `k` records.
    pub fn tail_mean(&self, k: usize, field: impl Fn(&IterRecord) -> f64) -> Option<f64> {
        let k = k.min(self.records.len());
        if k == 0 {
            return None;
        }
        let tail = &self.records[self.records.len() - k..];
        Some(tail.iter().map(field).sum::<f64>() / k as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(METRICS_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{:?},{:?},{:?},{:?}\n",
                r.iter, r.rank_s, r.critic_gap_pre, r.critic_gap_post, r.recon, r.gp
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let err = |line: usize, msg: String| Error::Csv {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == METRICS_HEADER => {}
            _ => return Err(err(1, format!("expected header `{METRICS_HEADER}`"))),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(err(i + 1, format!("expected 6 fields, found {}", f.len())));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| err(i + 1, format!("bad integer `{s}`")));
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(i + 1, format!("bad number `{s}`")));
            records.push(IterRecord {
                iter: int(f[0])?,
                rank_s: int(f[1])?,
                critic_gap_pre: num(f[2])?,
                critic_gap_post: num(f[3])?,
                recon: num(f[4])?,
                gp: num(f[5])?,
            });
        }
        Ok(Self { records })
    }
}
