//! Persisted artefacts of a fit: `model.json`, `loss.csv` and
//! `embeddings.csv`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{IntervalPartition, SplitSpec, TimeRange};
use crate::inference::{FittedModel, Hyperparams, VariationalState};

const FORMAT: &str = "clpm-model";
const VERSION: u32 = 1;

/// On-disk layout. Arrays are flat and row-major: `mu` is node -> cut point
/// -> dimension and `log_sigma` is node -> cut point.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    hyper: Hyperparams,
    num_nodes: usize,
    dim: usize,
    cut_points: Vec<f64>,
    beta: f64,
    mu: Vec<f64>,
    log_sigma: Vec<f64>,
    nodes: Vec<String>,
    time_range: TimeRange,
    directed: bool,
    split: Option<SplitSpec>,
    loss_trace: Vec<f64>,
}

pub fn model_to_json(fm: &FittedModel) -> Result<String> {
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        hyper: fm.hyper.clone(),
        num_nodes: fm.state.num_nodes(),
        dim: fm.state.dim(),
        cut_points: fm.partition.cut_points().to_vec(),
        beta: fm.state.beta,
        mu: fm.state.mu().to_vec(),
        log_sigma: fm.state.log_sigma().to_vec(),
        nodes: fm.labels.clone(),
        time_range: fm.time_range,
        directed: fm.directed,
        split: fm.split,
        loss_trace: fm.loss_trace.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn model_from_json(text: &str) -> Result<FittedModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(Error::Model(format!(
            "unsupported format {:?} version {}",
            file.format, file.version
        )));
    }
    let partition = IntervalPartition::from_cut_points(file.cut_points)
        .map_err(|e| Error::Model(e.to_string()))?;
    if partition.num_intervals() != file.hyper.num_intervals || file.hyper.dim != file.dim {
        return Err(Error::Model(
            "hyperparameters disagree with the stored arrays".into(),
        ));
    }
    file.hyper
        .validate()
        .map_err(|e| Error::Model(e.to_string()))?;
    if file.nodes.len() != file.num_nodes {
        return Err(Error::Model(format!(
            "{} node labels for {} nodes",
            file.nodes.len(),
            file.num_nodes
        )));
    }
    let state = VariationalState::from_parts(
        file.num_nodes,
        partition.cut_points().len(),
        file.dim,
        file.mu,
        file.log_sigma,
        file.beta,
    )
    .map_err(|e| Error::Model(e.to_string()))?;
    if !state.is_finite() {
        return Err(Error::Model("non-finite parameter".into()));
    }
    Ok(FittedModel {
        state,
        hyper: file.hyper,
        partition,
        loss_trace: file.loss_trace,
        labels: file.nodes,
        time_range: file.time_range,
        directed: file.directed,
        split: file.split,
    })
}

pub fn write_model<W: Write>(fm: &FittedModel, mut out: W) -> Result<()> {
    out.write_all(model_to_json(fm)?.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_model<R: Read>(mut source: R) -> Result<FittedModel> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    model_from_json(&text)
}

/// `epoch,loss` rows.
pub fn write_loss_csv<W: Write>(trace: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "loss"])?;
    for (epoch, loss) in trace.iter().enumerate() {
        w.serialize((epoch, loss))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_loss_csv<R: Read>(source: R) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let (epoch, loss): (usize, f64) = row?;
        if epoch != out.len() {
            return Err(Error::InvalidArgument(format!(
                "loss rows out of order at epoch {epoch}"
            )));
        }
        out.push(loss);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub node: usize,
    pub k: usize,
    pub eta: f64,
    pub mu: Vec<f64>,
    pub sigma: f64,
}

/// `node,k,eta,mu_0..mu_{d-1},sigma` rows, one per node and cut point.
pub fn write_embeddings_csv<W: Write>(fm: &FittedModel, out: W) -> Result<()> {
    let d = fm.state.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["node".to_string(), "k".into(), "eta".into()];
    header.extend((0..d).map(|c| format!("mu_{c}")));
    header.push("sigma".into());
    w.write_record(&header)?;
    for i in 0..fm.state.num_nodes() {
        for (k, eta) in fm.partition.cut_points().iter().enumerate() {
            let mut rec = vec![i.to_string(), k.to_string(), eta.to_string()];
            rec.extend(fm.state.mean(i, k).iter().map(|v| v.to_string()));
            rec.push(fm.state.sigma(i, k).to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_embeddings_csv<R: Read>(source: R) -> Result<Vec<EmbeddingRow>> {
    let mut rdr = csv::Reader::from_reader(source);
    let width = rdr.headers()?.len();
    if width < 5 {
        return Err(Error::InvalidArgument(
            "embeddings need node, k, eta, at least one mean column and sigma".into(),
        ));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |idx: usize| -> Result<f64> {
            rec[idx].trim().parse().map_err(|_| Error::Parse {
                line: line as u64 + 2,
                message: format!("not a number: {:?}", &rec[idx]),
            })
        };
        let int = |idx: usize| -> Result<usize> {
            rec[idx].trim().parse().map_err(|_| Error::Parse {
                line: line as u64 + 2,
                message: format!("not an index: {:?}", &rec[idx]),
            })
        };
        out.push(EmbeddingRow {
            node: int(0)?,
            k: int(1)?,
            eta: num(2)?,
            mu: (3..width - 1).map(num).collect::<Result<_>>()?,
            sigma: num(width - 1)?,
        });
    }
    Ok(out)
}
