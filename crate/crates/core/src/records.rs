//! CSV records for per-example predictions and flip logs.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::threshold::FlipRecord;
use crate::types::{Decisions, FlipDirection, Group, ProbEstimates};

/// Probabilities, decisions and ground truth for every example of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub probs: ProbEstimates,
    pub groups: Vec<Group>,
    pub labels: Vec<bool>,
    pub decisions: Decisions,
}

impl Predictions {
    pub fn new(probs: ProbEstimates, groups: Vec<Group>, labels: Vec<bool>, decisions: Decisions) -> Result<Self> {
        let n = probs.len();
        check_len("groups", n, groups.len())?;
        check_len("labels", n, labels.len())?;
        check_len("decisions", n, decisions.len())?;
        Ok(Self { probs, groups, labels, decisions })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct PredictionRow {
    index: usize,
    prob: f64,
    group: Group,
    label: u8,
    decision: u8,
}

fn bit(column: &'static str, v: u8, line: usize) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(Error::Unparseable { column: column.into(), value: other.to_string(), line }),
    }
}

pub fn write_predictions<W: Write>(preds: &Predictions, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for i in 0..preds.len() {
        w.serialize(PredictionRow {
            index: i,
            prob: preds.probs.as_slice()[i],
            group: preds.groups[i],
            label: preds.labels[i].into(),
            decision: preds.decisions.as_slice()[i].into(),
        })?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))?;
    Ok(())
}

pub fn read_predictions<R: Read>(reader: R) -> Result<Predictions> {
    let mut rdr = csv::Reader::from_reader(reader);
    let (mut probs, mut groups, mut labels, mut decisions) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, row) in rdr.deserialize::<PredictionRow>().enumerate() {
        let row = row?;
        let line = i + 2;
        if row.index != i {
            return Err(Error::Format(format!("line {line}: index {} out of sequence", row.index)));
        }
        probs.push(row.prob);
        groups.push(row.group);
        labels.push(bit("label", row.label, line)?);
        decisions.push(bit("decision", row.decision, line)?);
    }
    if probs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Predictions::new(ProbEstimates::new(probs)?, groups, labels, Decisions::new(decisions))
}

/// `score` is NaN for flips that were not chosen greedily.
#[derive(Serialize, Deserialize)]
struct FlipRow {
    index: usize,
    group: Group,
    direction: String,
    score: f64,
    p_gap: f64,
    cv_gap: f64,
}

pub fn write_fliplog<W: Write>(entries: &[FlipRecord], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["index", "group", "direction", "score", "p_gap", "cv_gap"])?;
    for r in entries {
        w.serialize(FlipRow {
            index: r.index,
            group: r.group,
            direction: r.direction.as_str().into(),
            score: r.score,
            p_gap: r.p_gap,
            cv_gap: r.cv_gap,
        })?;
    }
    w.flush().map_err(|e| Error::io("<fliplog>", e))?;
    Ok(())
}

pub fn read_fliplog<R: Read>(reader: R) -> Result<Vec<FlipRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<FlipRow>() {
        let row = row?;
        for v in [row.p_gap, row.cv_gap] {
            if !v.is_finite() {
                return Err(Error::Format(format!("non-finite gap in flip of example {}", row.index)));
            }
        }
        out.push(FlipRecord {
            index: row.index,
            group: row.group,
            direction: row.direction.parse::<FlipDirection>()?,
            score: row.score,
            p_gap: row.p_gap,
            cv_gap: row.cv_gap,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds() -> Predictions {
        Predictions::new(
            ProbEstimates::new(vec![0.1, 0.9, 0.5, 1.0 / 3.0]).unwrap(),
            vec![Group::A, Group::B, Group::B, Group::A],
            vec![false, true, true, false],
            Decisions::new(vec![false, true, false, true]),
        )
        .unwrap()
    }

    #[test]
    fn predictions_round_trip() {
        let p = preds();
        let mut buf = Vec::new();
        write_predictions(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,prob,group,label,decision\n0,0.1,a,0,0\n"));
        assert_eq!(read_predictions(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn predictions_reject_bad_rows() {
        for bad in [
            "index,prob,group,label,decision\n1,0.5,a,0,0\n",
            "index,prob,group,label,decision\n0,1.5,a,0,0\n",
            "index,prob,group,label,decision\n0,0.5,c,0,0\n",
            "index,prob,group,label,decision\n0,0.5,a,2,0\n",
            "index,prob,group,label,decision\n",
        ] {
            assert!(read_predictions(bad.as_bytes()).is_err(), "{bad}");
        }
    }

    #[test]
    fn fliplog_round_trip_with_free_flip() {
        let entries = vec![
            FlipRecord { index: 3, group: Group::B, direction: FlipDirection::Up, score: f64::INFINITY, p_gap: 0.25, cv_gap: 0.25 },
            FlipRecord { index: 0, group: Group::A, direction: FlipDirection::Down, score: 2.5, p_gap: -0.1, cv_gap: 0.0 },
        ];
        let mut buf = Vec::new();
        write_fliplog(&entries, &mut buf).unwrap();
        assert_eq!(read_fliplog(buf.as_slice()).unwrap(), entries);
        let mut empty = Vec::new();
        write_fliplog(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "index,group,direction,score,p_gap,cv_gap\n");
        assert!(read_fliplog("index,group,direction,score,p_gap,cv_gap\n1,a,sideways,1,0,0\n".as_bytes()).is_err());
    }
}
