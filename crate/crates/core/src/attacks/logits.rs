use std::io::{Read, Write};
use std::path::Path;

use crate::data::{LabeledDataset, SplitDataset};
use crate::matrix::Matrix;
use crate::nn::ClassifierModel;
use crate::{Error, Result};

/// Per-sample logits with true labels. Attacks consume these so that
/// externally produced dumps can be audited as well as in-process models.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitTable {
    pub sample_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub logits: Matrix,
}

impl LogitTable {
    pub fn new(sample_ids: Vec<String>, labels: Vec<usize>, logits: Matrix) -> Result<Self> {
        if sample_ids.len() != labels.len() || labels.len() != logits.rows() {
            return Err(Error::Shape {
                expected: labels.len(),
                actual: logits.rows(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= logits.cols()) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {} logits",
                logits.cols()
            )));
        }
        if !logits.is_finite() {
            return Err(Error::InvalidInput("non-finite logit".into()));
        }
        Ok(LogitTable {
            sample_ids,
            labels,
            logits,
        })
    }

    /// Logits of `model` on every row of `data`; ids are `prefix` plus the row index.
    pub fn from_model(model: &ClassifierModel, data: &LabeledDataset, prefix: &str) -> Result<Self> {
        if data.dim() != model.input_dim() {
            return Err(Error::Shape {
                expected: model.input_dim(),
                actual: data.dim(),
            });
        }
        let k = model.num_classes();
        let mut logits = Matrix::zeros(data.len(), k);
        for (i, x) in data.features.iter_rows().enumerate() {
            logits.row_mut(i).copy_from_slice(&model.forward(x)?);
        }
        let ids = (0..data.len()).map(|i| format!("{prefix}{i}")).collect();
        LogitTable::new(ids, data.labels.clone(), logits)
    }

    /// Logits on the whole test split, classes in ascending order.
    pub fn from_split_test(model: &ClassifierModel, split: &SplitDataset) -> Result<Self> {
        let mut tables = Vec::new();
        for (c, d) in &split.test_by_class {
            tables.push(LogitTable::from_model(model, d, &format!("test-{c}-"))?);
        }
        LogitTable::concat(&tables)
    }

    pub fn concat(parts: &[LogitTable]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::usage("no logit tables to concatenate"))?;
        let mut out = first.clone();
        for t in &parts[1..] {
            out.logits = out.logits.vstack(&t.logits)?;
            out.labels.extend_from_slice(&t.labels);
            out.sample_ids.extend(t.sample_ids.iter().cloned());
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.logits.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.logits.row(i)
    }

    /// Row indices whose true label satisfies `keep`.
    pub fn rows_where(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| keep(self.labels[i])).collect()
    }

    /// Writes `sampleId,trueLabel,logit_0..` with shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["sampleId".to_string(), "trueLabel".to_string()];
        header.extend((0..self.num_classes()).map(|j| format!("logit_{j}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.sample_ids[i].clone(), self.labels[i].to_string()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let k = header.len().saturating_sub(2);
        let ok = header.len() > 2
            && &header[0] == "sampleId"
            && &header[1] == "trueLabel"
            && (0..k).all(|j| header[j + 2] == format!("logit_{j}"));
        if !ok {
            return Err(Error::InvalidInput(
                "logit CSV header must be sampleId,trueLabel,logit_0,...".into(),
            ));
        }
        let (mut ids, mut labels, mut data) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::InvalidInput(format!("logit CSV row {}: bad {what}", line + 1));
            ids.push(rec[0].to_string());
            labels.push(rec[1].parse::<usize>().map_err(|_| bad("trueLabel"))?);
            for j in 0..k {
                data.push(rec[j + 2].parse::<f64>().map_err(|_| bad("logit"))?);
            }
        }
        let rows = labels.len();
        LogitTable::new(ids, labels, Matrix::from_vec(rows, k, data)?)
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        crate::io::write_atomic(path, &buf)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        LogitTable::read_csv(std::fs::File::open(path)?)
    }
}
