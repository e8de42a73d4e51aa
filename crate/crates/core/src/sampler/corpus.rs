use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::graph::NodeId;
use crate::walk_stats::CorpusStats;

use super::SamplerError;

/// Generated walks and their occurrence statistics.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub walks: Vec<Vec<NodeId>>,
    pub stats: CorpusStats,
    /// Rounds executed (one walk per source node each).
    pub rounds: usize,
    /// Relative entropy after every round (information-centric mode).
    pub divergence: Vec<f64>,
}

impl Corpus {
    pub fn from_walks(node_count: usize, walks: Vec<Vec<NodeId>>) -> Self {
        let stats = CorpusStats::from_walks(node_count, walks.iter().map(Vec::as_slice));
        Self {
            walks,
            stats,
            rounds: 0,
            divergence: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn total_steps(&self) -> u64 {
        self.walks.iter().map(|w| w.len() as u64).sum()
    }

    pub fn mean_len(&self) -> f64 {
        if self.walks.is_empty() {
            0.0
        } else {
            self.total_steps() as f64 / self.walks.len() as f64
        }
    }

    pub fn summary(&self) -> CorpusSummary {
        CorpusSummary {
            walks: self.walks.len(),
            rounds: self.rounds,
            total_steps: self.total_steps(),
            mean_len: self.mean_len(),
            max_len: self.walks.iter().map(Vec::len).max().unwrap_or(0),
            ocn_max: self.stats.ocn_max(),
            final_divergence: self.divergence.last().copied(),
        }
    }

    /// One walk per line, space-separated ids.
    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        for w in &self.walks {
            let mut first = true;
            for v in w {
                if !first {
                    out.write_all(b" ")?;
                }
                write!(out, "{v}")?;
                first = false;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        self.write(File::create(path)?)
    }

    /// Reads a corpus file; `node_count` must exceed every id in it.
    pub fn read<R: BufRead>(input: R, node_count: usize) -> Result<Self, SamplerError> {
        let mut walks = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let walk = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<NodeId>()
                        .ok()
                        .filter(|&v| (v as usize) < node_count)
                        .ok_or_else(|| SamplerError::Corpus {
                            line: i + 1,
                            msg: format!("invalid node id {t:?}"),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            walks.push(walk);
        }
        Ok(Self::from_walks(node_count, walks))
    }

    pub fn load(path: impl AsRef<Path>, node_count: usize) -> Result<Self, SamplerError> {
        Self::read(BufReader::new(File::open(path)?), node_count)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CorpusSummary {
    pub walks: usize,
    pub rounds: usize,
    pub total_steps: u64,
    pub mean_len: f64,
    pub max_len: usize,
    pub ocn_max: u64,
    pub final_divergence: Option<f64>,
}

/// Per-machine walking and messaging counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MachineComm {
    pub machine_id: u32,
    /// Nodes appended to walks on this machine.
    pub local_steps: u64,
    pub msgs_sent: u64,
    pub bytes_sent: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CommReport {
    pub machines: Vec<MachineComm>,
    pub supersteps: u64,
}

impl CommReport {
    pub fn total_messages(&self) -> u64 {
        self.machines.iter().map(|m| m.msgs_sent).sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.machines.iter().map(|m| m.bytes_sent).sum()
    }

    pub fn total_steps(&self) -> u64 {
        self.machines.iter().map(|m| m.local_steps).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "machine_id,local_steps,msgs_sent,bytes_sent")?;
        for m in &self.machines {
            writeln!(
                out,
                "{},{},{},{}",
                m.machine_id, m.local_steps, m.msgs_sent, m.bytes_sent
            )?;
        }
        out.flush()
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        self.write_csv(File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_round_trip() {
        let c = Corpus::from_walks(5, vec![vec![0, 1, 2], vec![4], vec![3, 3]]);
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0 1 2\n4\n3 3\n");
        let back = Corpus::read(buf.as_slice(), 5).unwrap();
        assert_eq!(back.walks, c.walks);
        assert_eq!(back.stats.ocn, vec![1, 1, 1, 2, 1]);
        assert_eq!(back.stats.total_ocn, 6);
        assert!(Corpus::read("0 9\n".as_bytes(), 5).is_err());
    }

    #[test]
    fn comm_csv() {
        let r = CommReport {
            machines: vec![
                MachineComm {
                    machine_id: 0,
                    local_steps: 10,
                    msgs_sent: 2,
                    bytes_sent: 160,
                },
                MachineComm {
                    machine_id: 1,
                    local_steps: 5,
                    msgs_sent: 1,
                    bytes_sent: 80,
                },
            ],
            supersteps: 3,
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "machine_id,local_steps,msgs_sent,bytes_sent\n0,10,2,160\n1,5,1,80\n"
        );
        assert_eq!(r.total_messages(), 3);
        assert_eq!(r.total_bytes(), 240);
    }
}
