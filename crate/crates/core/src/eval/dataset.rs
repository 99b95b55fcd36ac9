use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result, SvdnetError};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Query,
    Gallery,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Query => "query",
            Split::Gallery => "gallery",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = SvdnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "query" => Ok(Split::Query),
            "gallery" => Ok(Split::Gallery),
            other => Err(SvdnetError::Format(format!("unknown split '{other}'"))),
        }
    }
}

/// Identity and camera label per row of a feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Labels {
    pub ids: Vec<u32>,
    pub cameras: Vec<u32>,
}

impl Labels {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Labeled rows split into train / query / gallery.
///
/// Every query identity has at least one gallery row from a different
/// camera; this is checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalDataset {
    pub features: Matrix,
    pub ids: Vec<u32>,
    pub cameras: Vec<u32>,
    pub splits: Vec<Split>,
}

impl RetrievalDataset {
    pub fn new(features: Matrix, ids: Vec<u32>, cameras: Vec<u32>, splits: Vec<Split>) -> Result<Self> {
        let ds = Self { features, ids, cameras, splits };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.rows();
        if self.ids.len() != n || self.cameras.len() != n || self.splits.len() != n {
            return Err(validation("label columns do not match feature rows"));
        }
        for split in [Split::Train, Split::Query, Split::Gallery] {
            if !self.splits.contains(&split) {
                return Err(validation(format!("dataset has no {split} rows")));
            }
        }
        for q in self.indices(Split::Query) {
            let ok = self.indices(Split::Gallery).into_iter().any(|g| {
                self.ids[g] == self.ids[q] && self.cameras[g] != self.cameras[q]
            });
            if !ok {
                return Err(validation(format!(
                    "query row {q} (id {}, camera {}) has no gallery match from another camera",
                    self.ids[q], self.cameras[q]
                )));
            }
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.splits.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn split_features(&self, split: Split) -> Matrix {
        self.features
            .select_rows(&self.indices(split))
            .expect("split indices are in range")
    }

    pub fn split_labels(&self, split: Split) -> Labels {
        let idx = self.indices(split);
        Labels {
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
            cameras: idx.iter().map(|&i| self.cameras[i]).collect(),
        }
    }

    /// Training rows with identities mapped to dense class indices
    /// `0..classes` in ascending id order.
    pub fn train_set(&self) -> (Matrix, Vec<usize>, usize) {
        let idx = self.indices(Split::Train);
        let mut distinct: Vec<u32> = idx.iter().map(|&i| self.ids[i]).collect();
        distinct.sort_unstable();
        distinct.dedup();
        let labels = idx
            .iter()
            .map(|&i| distinct.binary_search(&self.ids[i]).expect("id present"))
            .collect();
        (self.split_features(Split::Train), labels, distinct.len())
    }

    /// CSV with header `id,camera,split,f0,..,f{d-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        let d = self.feature_dim();
        let header: Vec<String> = ["id", "camera", "split"]
            .iter()
            .map(|s| s.to_string())
            .chain((0..d).map(|j| format!("f{j}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.features.rows() {
            write!(out, "{},{},{}", self.ids[i], self.cameras[i], self.splits[i])?;
            for v in self.features.row(i) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| SvdnetError::Format("empty dataset file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 4 || cols[..3] != ["id", "camera", "split"] {
            return Err(SvdnetError::Format("header must start with id,camera,split".into()));
        }
        let d = cols.len() - 3;
        for (j, name) in cols[3..].iter().enumerate() {
            if *name != format!("f{j}") {
                return Err(SvdnetError::Format(format!("expected column f{j}, found '{name}'")));
            }
        }

        let (mut ids, mut cameras, mut splits, mut data) = (vec![], vec![], vec![], vec![]);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let at = |msg: String| SvdnetError::Format(format!("line {}: {msg}", lineno + 2));
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != d + 3 {
                return Err(at(format!("expected {} fields, found {}", d + 3, fields.len())));
            }
            ids.push(fields[0].parse().map_err(|e| at(format!("bad id: {e}")))?);
            cameras.push(fields[1].parse().map_err(|e| at(format!("bad camera: {e}")))?);
            splits.push(fields[2].parse().map_err(|e: SvdnetError| at(e.to_string()))?);
            for f in &fields[3..] {
                data.push(f.parse::<f64>().map_err(|e| at(format!("bad feature '{f}': {e}")))?);
            }
        }
        let rows = ids.len();
        let features = Matrix::new(rows, d, data)?;
        Self::new(features, ids, cameras, splits)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RetrievalDataset {
        let features = Matrix::from_rows(&[
            vec![0.0, 1.0],
            vec![1.5, -2.25],
            vec![0.1, 0.2],
            vec![3.0, 1e-17],
            vec![0.3, 0.4],
        ])
        .unwrap();
        RetrievalDataset::new(
            features,
            vec![1, 2, 10, 10, 10],
            vec![0, 1, 0, 1, 0],
            vec![Split::Train, Split::Train, Split::Query, Split::Gallery, Split::Gallery],
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = small();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,camera,split,f0,f1\n"));
        assert_eq!(RetrievalDataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn query_without_cross_camera_match_rejected() {
        let mut ds = small();
        ds.cameras[3] = 0;
        assert!(ds.validate().is_err());
    }

    #[test]
    fn malformed_csv_rejected() {
        assert!(RetrievalDataset::read_csv("".as_bytes()).is_err());
        assert!(RetrievalDataset::read_csv("a,b,c,f0\n".as_bytes()).is_err());
        let bad_split = "id,camera,split,f0\n1,0,test,0.5\n";
        assert!(RetrievalDataset::read_csv(bad_split.as_bytes()).is_err());
        let short = "id,camera,split,f0,f1\n1,0,train,0.5\n";
        assert!(RetrievalDataset::read_csv(short.as_bytes()).is_err());
    }

    #[test]
    fn train_labels_are_dense() {
        let (x, y, c) = small().train_set();
        assert_eq!(x.rows(), 2);
        assert_eq!(y, vec![0, 1]);
        assert_eq!(c, 2);
    }
}
