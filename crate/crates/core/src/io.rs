//! File formats: JSON for models, joints and trees; headerless CSV or the
//! `CLS1` binary layout for samples.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::SampleSet;
use crate::model::{Alphabet, DenseJoint, TreeModel, UndirectedTree};

const MAGIC: &[u8; 4] = b"CLS1";

#[derive(Debug, Serialize, Deserialize)]
struct TreeModelDoc {
    n: usize,
    k: usize,
    root: usize,
    parents: Vec<Option<usize>>,
    root_marginal: Vec<f64>,
    cpt: BTreeMap<usize, Vec<Vec<f64>>>,
}

pub fn tree_model_to_json(m: &TreeModel<f64>) -> Result<String> {
    let k = m.k();
    let cpt = (0..m.n())
        .filter(|&v| m.tree().parent(v).is_some())
        .map(|v| (v, m.cpt(v).chunks(k).map(<[f64]>::to_vec).collect()))
        .collect();
    let doc = TreeModelDoc {
        n: m.n(),
        k,
        root: m.root(),
        parents: m.tree().parents().to_vec(),
        root_marginal: m.root_marginal().to_vec(),
        cpt,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn tree_model_from_json(s: &str) -> Result<TreeModel<f64>> {
    let doc: TreeModelDoc = serde_json::from_str(s)?;
    if doc.parents.len() != doc.n {
        return Err(Error::ShapeMismatch(format!(
            "{} parent entries for {} nodes",
            doc.parents.len(),
            doc.n
        )));
    }
    let mut cpt = vec![Vec::new(); doc.n];
    for (v, rows) in doc.cpt {
        if v >= doc.n {
            return Err(Error::InvalidNode { node: v, n: doc.n });
        }
        cpt[v] = rows.concat();
    }
    TreeModel::from_parents(doc.root, doc.parents, Alphabet::new(doc.k)?, doc.root_marginal, cpt)
}

#[derive(Debug, Serialize, Deserialize)]
struct DenseDoc {
    n: usize,
    k: usize,
    probs: Vec<f64>,
}

pub fn dense_to_json(p: &DenseJoint<f64>) -> Result<String> {
    Ok(serde_json::to_string(&DenseDoc {
        n: p.n(),
        k: p.k(),
        probs: p.probs().to_vec(),
    })?)
}

pub fn dense_from_json(s: &str) -> Result<DenseJoint<f64>> {
    let doc: DenseDoc = serde_json::from_str(s)?;
    DenseJoint::new(doc.n, Alphabet::new(doc.k)?, doc.probs)
}

pub fn tree_to_json(t: &UndirectedTree) -> Result<String> {
    Ok(serde_json::to_string(t)?)
}

pub fn tree_from_json(s: &str) -> Result<UndirectedTree> {
    Ok(serde_json::from_str(s)?)
}

pub fn write_samples_csv<W: Write>(s: &SampleSet, w: W) -> Result<()> {
    let mut out = BufWriter::new(w);
    let mut line = String::new();
    for row in s.rows() {
        line.clear();
        for (i, &x) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&x.to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads headerless CSV samples. The alphabet is `k` when given, otherwise
/// one more than the largest symbol seen (at least 2).
pub fn read_samples_csv<R: Read>(r: R, k: Option<usize>) -> Result<SampleSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let limit = k.unwrap_or(Alphabet::MAX);
    let mut n = None;
    let mut flat = Vec::new();
    let mut max_symbol = 0usize;
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 1;
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line()),
            message: e.to_string(),
        })?;
        match n {
            None => n = Some(rec.len()),
            Some(width) if width != rec.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("{} fields, expected {width}", rec.len()),
                })
            }
            _ => {}
        }
        for (col, field) in rec.iter().enumerate() {
            let sym: usize = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {}: {field:?} is not a nonnegative integer", col + 1),
            })?;
            if sym >= limit {
                return Err(Error::Parse {
                    line,
                    message: format!("column {}: symbol {sym} outside alphabet of size {limit}", col + 1),
                });
            }
            max_symbol = max_symbol.max(sym);
            flat.push(sym as u8);
        }
    }
    let n = n.ok_or_else(|| Error::Parse {
        line: 0,
        message: "no rows; the column count cannot be inferred".into(),
    })?;
    let alphabet = Alphabet::new(k.unwrap_or((max_symbol + 1).max(2)))?;
    SampleSet::from_flat(n, alphabet, flat)
}

pub fn write_samples_binary<W: Write>(s: &SampleSet, w: W) -> Result<()> {
    let mut out = BufWriter::new(w);
    out.write_all(MAGIC)?;
    out.write_all(&(s.n() as u32).to_le_bytes())?;
    out.write_all(&(s.k() as u32).to_le_bytes())?;
    out.write_all(&(s.len() as u64).to_le_bytes())?;
    out.write_all(s.rows_flat())?;
    out.flush()?;
    Ok(())
}

pub fn read_samples_binary<R: Read>(mut r: R) -> Result<SampleSet> {
    let mut header = [0u8; 20];
    r.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(Error::Parse {
            line: 0,
            message: "missing CLS1 magic".into(),
        });
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let k = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
    let mut rows = Vec::new();
    r.read_to_end(&mut rows)?;
    if rows.len() != n * count {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {} symbol bytes, found {}", n * count, rows.len()),
        });
    }
    SampleSet::from_flat(n, Alphabet::new(k)?, rows)
}

/// Reads a sample file, detecting the binary layout by its magic bytes.
pub fn read_samples(path: &Path, k: Option<usize>) -> Result<SampleSet> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        let s = read_samples_binary(bytes.as_slice())?;
        if let Some(k) = k {
            if s.k() != k {
                return Err(Error::Config(format!("file alphabet {} differs from requested {k}", s.k())));
            }
        }
        Ok(s)
    } else {
        read_samples_csv(bytes.as_slice(), k)
    }
}

pub fn write_samples(path: &Path, s: &SampleSet, binary: bool) -> Result<()> {
    let f = File::create(path)?;
    if binary {
        write_samples_binary(s, f)
    } else {
        write_samples_csv(s, f)
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut s)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn tree_model_json_round_trip() {
        let mut rng = seed::rng(8);
        let m = TreeModel::<f64>::random(6, Alphabet::new(3).unwrap(), 0.01, &mut rng).unwrap();
        let json = tree_model_to_json(&m).unwrap();
        assert_eq!(tree_model_from_json(&json).unwrap(), m);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["parents"][0], serde_json::Value::Null);
        assert!(v["cpt"].get("0").is_none());
    }

    #[test]
    fn tree_model_json_rejects_bad_rows() {
        let json = r#"{"n":2,"k":2,"root":0,"parents":[null,0],"root_marginal":[0.5,0.5],"cpt":{"1":[[0.6,0.5],[0.5,0.5]]}}"#;
        let err = tree_model_from_json(json).unwrap_err();
        assert!(err.to_string().contains("row sum ≠ 1"));
    }

    #[test]
    fn dense_json_round_trip() {
        let p = DenseJoint::from_fn(2, Alphabet::binary(), |x| [0.1, 0.2, 0.3, 0.4][x[0] * 2 + x[1]]).unwrap();
        assert_eq!(dense_from_json(&dense_to_json(&p).unwrap()).unwrap(), p);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let s = SampleSet::new(3, Alphabet::new(3).unwrap(), &[vec![0, 2, 1], vec![1, 1, 0]]).unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0,2,1\n1,1,0\n");
        assert_eq!(read_samples_csv(buf.as_slice(), None).unwrap(), s);

        let err = read_samples_csv("0,1\n1,x\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read_samples_csv("0,1\n1\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read_samples_csv("0,1\n0,2\n".as_bytes(), Some(2)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let binary = read_samples_csv("0,1\n".as_bytes(), None).unwrap();
        assert_eq!(binary.k(), 2);
    }

    #[test]
    fn binary_round_trip() {
        let s = SampleSet::new(2, Alphabet::binary(), &[vec![0, 1], vec![1, 1], vec![0, 0]]).unwrap();
        let mut buf = Vec::new();
        write_samples_binary(&s, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"CLS1");
        assert_eq!(buf.len(), 20 + 6);
        assert_eq!(read_samples_binary(buf.as_slice()).unwrap(), s);
        buf.pop();
        assert!(read_samples_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn format_detection() {
        let dir = tempfile::tempdir().unwrap();
        let s = SampleSet::new(2, Alphabet::new(4).unwrap(), &[vec![3, 1]]).unwrap();
        for binary in [false, true] {
            let path = dir.path().join(format!("s{binary}"));
            write_samples(&path, &s, binary).unwrap();
            assert_eq!(read_samples(&path, Some(4)).unwrap(), s);
        }
    }
}
