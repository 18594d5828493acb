//! Photodiode voltage records and the files that carry them.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Snapshot;
use crate::error::{Error, Result};
use crate::matcore::{ComplexMatrix, UnitaryMatrix};
use crate::mesh::SubspaceEmbedding;

/// Number of voltage columns in the CSV format.
pub const VOLTAGE_CHANNELS: usize = 8;

/// One row of photodiode voltages for a programmed unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct VoltageRecord {
    pub run_id: u64,
    pub unitary_id: usize,
    pub voltages: Vec<f64>,
}

impl VoltageRecord {
    pub fn new(run_id: u64, unitary_id: usize, voltages: Vec<f64>) -> Result<Self> {
        if let Some(v) = voltages.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "run {run_id} unitary {unitary_id}: voltage {v} is not a finite nonnegative value"
            )));
        }
        Ok(Self {
            run_id,
            unitary_id,
            voltages,
        })
    }
}

/// `V_i / Σ V_j` over all channels, or over the embedded window only.
pub fn normalize_voltages(rec: &VoltageRecord, emb: Option<&SubspaceEmbedding>) -> Result<Vec<f64>> {
    let window = match emb {
        Some(e) => {
            if e.full_dim != rec.voltages.len() {
                return Err(Error::DimensionMismatch {
                    expected: e.full_dim,
                    found: rec.voltages.len(),
                });
            }
            &rec.voltages[e.channels()]
        }
        None => &rec.voltages[..],
    };
    let total: f64 = window.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidState(format!(
            "run {} unitary {}: no light in the normalization window",
            rec.run_id, rec.unitary_id
        )));
    }
    Ok(window.iter().map(|v| v / total).collect())
}

#[derive(Deserialize)]
struct VoltageRow {
    run_id: u64,
    unitary_id: usize,
    v0: f64,
    v1: f64,
    v2: f64,
    v3: f64,
    v4: f64,
    v5: f64,
    v6: f64,
    v7: f64,
}

/// Parses `run_id,unitary_id,v0,...,v7`.
pub fn read_voltage_csv<R: Read>(r: R) -> Result<Vec<VoltageRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let expected: Vec<String> = ["run_id".to_owned(), "unitary_id".to_owned()]
        .into_iter()
        .chain((0..VOLTAGE_CHANNELS).map(|i| format!("v{i}")))
        .collect();
    if header != expected {
        return Err(Error::Format(format!(
            "voltage CSV header must be {}, found {}",
            expected.join(","),
            header.join(",")
        )));
    }
    rdr.deserialize::<VoltageRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| Error::Format(format!("voltage CSV row {}: {e}", i + 1)))?;
            let v = vec![row.v0, row.v1, row.v2, row.v3, row.v4, row.v5, row.v6, row.v7];
            VoltageRecord::new(row.run_id, row.unitary_id, v)
                .map_err(|e| Error::Format(format!("voltage CSV row {}: {e}", i + 1)))
        })
        .collect()
}

/// JSON array of matrix objects; position `k` is `unitary_id = k`.
pub fn read_unitary_list<R: Read>(r: R) -> Result<Vec<UnitaryMatrix>> {
    Ok(serde_json::from_reader(r)?)
}

/// Pairs each record with its reported unitary and normalizes its voltages.
///
/// With an embedding, a full-size reported unitary is cut down to its block
/// on the embedded channels.
pub fn snapshots_from_voltages(
    records: &[VoltageRecord],
    unitaries: &[UnitaryMatrix],
    emb: Option<&SubspaceEmbedding>,
) -> Result<Vec<Snapshot>> {
    let d = emb.map_or(VOLTAGE_CHANNELS, |e| e.sub_dim);
    let mut reported: HashMap<usize, UnitaryMatrix> = HashMap::new();
    records
        .iter()
        .map(|rec| {
            let u = match reported.get(&rec.unitary_id) {
                Some(u) => u.clone(),
                None => {
                    let raw = unitaries.get(rec.unitary_id).ok_or_else(|| {
                        Error::Format(format!(
                            "run {}: no unitary with id {} ({} unitaries loaded)",
                            rec.run_id,
                            rec.unitary_id,
                            unitaries.len()
                        ))
                    })?;
                    let u = restrict(raw, d, emb)
                        .map_err(|e| Error::Format(format!("unitary {}: {e}", rec.unitary_id)))?;
                    reported.insert(rec.unitary_id, u.clone());
                    u
                }
            };
            Snapshot::new(rec.unitary_id, u, normalize_voltages(rec, emb)?)
        })
        .collect()
}

fn restrict(u: &UnitaryMatrix, d: usize, emb: Option<&SubspaceEmbedding>) -> Result<UnitaryMatrix> {
    match emb {
        _ if u.dim() == d => Ok(u.clone()),
        Some(e) if u.dim() == e.full_dim => {
            let block = ComplexMatrix::from_fn(d, |i, j| u[(i + e.offset, j + e.offset)]);
            UnitaryMatrix::new(block)
        }
        _ => Err(Error::DimensionMismatch {
            expected: d,
            found: u.dim(),
        }),
    }
}

/// Snapshots ready for reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotFile {
    pub d: usize,
    pub snapshots: Vec<Snapshot>,
}

pub fn write_snapshot_file<W: Write>(w: W, file: &SnapshotFile) -> Result<()> {
    serde_json::to_writer_pretty(w, file)?;
    Ok(())
}

pub fn read_snapshot_file<R: Read>(r: R) -> Result<SnapshotFile> {
    let file: SnapshotFile = serde_json::from_reader(r)?;
    for (i, s) in file.snapshots.iter().enumerate() {
        // Re-run the invariants serde bypassed.
        Snapshot::new(s.unitary_id, s.reported_unitary.clone(), s.probabilities.clone())
            .map_err(|e| Error::Format(format!("snapshot {i}: {e}")))?;
        if s.dim() != file.d {
            return Err(Error::Format(format!("snapshot {i} has d = {}, file says {}", s.dim(), file.d)));
        }
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{sample_haar, RngSeed};
    use crate::mesh::embed_unitary;

    fn rec(v: Vec<f64>) -> VoltageRecord {
        VoltageRecord::new(1, 0, v).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let p = normalize_voltages(&rec(vec![2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), None).unwrap();
        assert_eq!(p, vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let emb = SubspaceEmbedding::new(4, 8, 0).unwrap();
        let p = normalize_voltages(&rec(vec![1.0, 1.0, 1.0, 1.0, 9.0, 9.0, 9.0, 9.0]), Some(&emb)).unwrap();
        assert_eq!(p, vec![0.25; 4]);

        let p = normalize_voltages(&rec(vec![3.0, 1.0, 0.0, 0.0]), None).unwrap();
        assert_eq!(p, vec![0.75, 0.25, 0.0, 0.0]);

        let dark = rec(vec![0.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0]);
        assert!(normalize_voltages(&dark, Some(&emb)).is_err());
        assert!(VoltageRecord::new(0, 0, vec![-1.0, 2.0]).is_err());
    }

    #[test]
    fn csv_parsing() {
        let text = "run_id,unitary_id,v0,v1,v2,v3,v4,v5,v6,v7\n0,1,1,0,0,0,0,0,0,3\n";
        let recs = read_voltage_csv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].unitary_id, 1);
        assert_eq!(recs[0].voltages[7], 3.0);

        let bad_header = "run,unitary_id,v0,v1,v2,v3,v4,v5,v6,v7\n";
        assert!(read_voltage_csv(bad_header.as_bytes()).is_err());
        let bad_row = "run_id,unitary_id,v0,v1,v2,v3,v4,v5,v6,v7\n0,1,1,0,0\n";
        let err = read_voltage_csv(bad_row.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
    }

    #[test]
    fn missing_unitary_is_named() {
        let recs = vec![VoltageRecord::new(3, 7, vec![1.0; 8]).unwrap()];
        let err = snapshots_from_voltages(&recs, &[UnitaryMatrix::identity(8)], None)
            .unwrap_err()
            .to_string();
        assert!(err.contains("id 7"), "{err}");
    }

    #[test]
    fn subspace_ingest_accepts_embedded_unitaries() {
        let emb = SubspaceEmbedding::new(4, 8, 0).unwrap();
        let u4 = sample_haar(4, RngSeed::new(2, 0)).unwrap();
        let u8 = embed_unitary(&u4, &emb).unwrap();
        let recs = vec![VoltageRecord::new(0, 0, vec![1.0, 2.0, 3.0, 4.0, 100.0, 0.0, 0.0, 0.0]).unwrap()];
        let a = snapshots_from_voltages(&recs, &[u8], Some(&emb)).unwrap();
        let b = snapshots_from_voltages(&recs, &[u4.clone()], Some(&emb)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].probabilities, vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn snapshot_file_round_trip() {
        let u = sample_haar(2, RngSeed::new(4, 0)).unwrap();
        let file = SnapshotFile {
            d: 2,
            snapshots: vec![Snapshot::new(0, u, vec![0.3, 0.7]).unwrap()],
        };
        let mut buf = Vec::new();
        write_snapshot_file(&mut buf, &file).unwrap();
        assert_eq!(read_snapshot_file(&buf[..]).unwrap(), file);
    }
}
