//! Bit-exact on-disk dataset container.
//!
//! A dataset is a directory with three parts:
//!
//! - `manifest.json` — version tag, block size L, embedding dim d and
//!   per-class counts.
//! - `samples.jsonl` — one metadata record per sample, in write order:
//!   `{"id":..,"label":"vuln"|"clean","n":..,"token_ids":[..],
//!   "flaw_spans":[[start,end],..],"provenance":{..},"offset":..}`.
//! - `embeddings.bin` — concatenated little-endian f32 matrices, row-major,
//!   L*d values per sample, at the byte offsets declared in the records.
//!
//! Offsets grow by exactly `L*d*4` per sample, so any sample is a single
//! seek away. Floats round-trip as raw bytes; nothing in the format depends
//! on wall-clock time, which keeps rewrites byte-identical.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{validate_spans, Embedding, EmbeddingSample, FlawSpan, Label, Provenance};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "samples.jsonl";
pub const TENSORS_FILE: &str = "embeddings.bin";

pub const FORMAT_VERSION: u32 = 1;

/// Dataset-level header, recomputable from the records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub block_size: usize,
    pub dim: usize,
    pub num_samples: u64,
    pub num_vulnerable: u64,
    pub num_clean: u64,
    pub num_with_flaw_spans: u64,
}

impl Manifest {
    /// Bytes per stored embedding matrix.
    pub fn stride(&self) -> u64 {
        (self.block_size * self.dim * 4) as u64
    }
}

/// Per-sample metadata record as stored in `samples.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: u64,
    pub label: Label,
    pub n: usize,
    pub token_ids: Vec<u32>,
    pub flaw_spans: Vec<FlawSpan>,
    pub provenance: Provenance,
    pub offset: u64,
}

/// Streaming single-writer for a new container directory.
pub struct ContainerWriter {
    dir: PathBuf,
    manifest: Manifest,
    records: BufWriter<File>,
    tensors: BufWriter<File>,
    seen: std::collections::HashSet<u64>,
    next_offset: u64,
}

impl ContainerWriter {
    /// Creates the directory (if needed) and truncates any previous content.
    pub fn create<P: AsRef<Path>>(dir: P, block_size: usize, dim: usize) -> Result<Self> {
        if block_size == 0 || dim == 0 {
            return Err(Error::Config(format!(
                "block size and dim must be positive, got {block_size}x{dim}"
            )));
        }
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let records = BufWriter::new(
            OpenOptions::new()
                .create(true)
                .write(true)
                .truncate(true)
                .open(dir.join(RECORDS_FILE))?,
        );
        let tensors = BufWriter::new(
            OpenOptions::new()
                .create(true)
                .write(true)
                .truncate(true)
                .open(dir.join(TENSORS_FILE))?,
        );
        Ok(ContainerWriter {
            dir,
            manifest: Manifest {
                version: FORMAT_VERSION,
                block_size,
                dim,
                num_samples: 0,
                num_vulnerable: 0,
                num_clean: 0,
                num_with_flaw_spans: 0,
            },
            records,
            tensors,
            seen: std::collections::HashSet::new(),
            next_offset: 0,
        })
    }

    pub fn block_size(&self) -> usize {
        self.manifest.block_size
    }

    pub fn dim(&self) -> usize {
        self.manifest.dim
    }

    /// Appends one sample; write order is preserved on disk.
    pub fn append(&mut self, sample: &EmbeddingSample) -> Result<()> {
        if sample.embedding.rows() != self.manifest.block_size
            || sample.embedding.cols() != self.manifest.dim
        {
            return Err(Error::Input(format!(
                "sample {}: embedding is {}x{}, container is {}x{}",
                sample.id,
                sample.embedding.rows(),
                sample.embedding.cols(),
                self.manifest.block_size,
                self.manifest.dim
            )));
        }
        if !self.seen.insert(sample.id) {
            return Err(Error::DuplicateId(sample.id));
        }
        let record = SampleRecord {
            id: sample.id,
            label: sample.label,
            n: sample.n(),
            token_ids: sample.token_ids.clone(),
            flaw_spans: sample.flaw_spans.clone(),
            provenance: sample.provenance.clone(),
            offset: self.next_offset,
        };
        let line = serde_json::to_string(&record)?;
        self.records.write_all(line.as_bytes())?;
        self.records.write_all(b"\n")?;
        self.tensors.write_all(&sample.embedding.to_le_bytes())?;

        self.next_offset += self.manifest.stride();
        self.manifest.num_samples += 1;
        match sample.label {
            Label::Vulnerable => {
                self.manifest.num_vulnerable += 1;
                if !sample.flaw_spans.is_empty() {
                    self.manifest.num_with_flaw_spans += 1;
                }
            }
            Label::Clean => self.manifest.num_clean += 1,
        }
        Ok(())
    }

    /// Flushes both streams and writes the manifest.
    pub fn finish(mut self) -> Result<Manifest> {
        self.records.flush()?;
        self.tensors.flush()?;
        let mut mf = File::create(self.dir.join(MANIFEST_FILE))?;
        mf.write_all(serde_json::to_string_pretty(&self.manifest)?.as_bytes())?;
        mf.write_all(b"\n")?;
        Ok(self.manifest)
    }
}

/// Rewrites `manifest.json` and `samples.jsonl` in place, leaving the
/// tensor store untouched. Record order and offsets must be preserved by
/// the caller.
pub(crate) fn rewrite_metadata(dir: &Path, manifest: &Manifest, records: &[SampleRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(dir.join(RECORDS_FILE))?);
    for record in records {
        out.write_all(serde_json::to_string(record)?.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let mut mf = File::create(dir.join(MANIFEST_FILE))?;
    mf.write_all(serde_json::to_string_pretty(manifest)?.as_bytes())?;
    mf.write_all(b"\n")?;
    Ok(())
}

/// Writes a stream of samples into a new container at `dir`.
///
/// All samples must share the dimensions of the first one.
pub fn write_dataset<P, I>(samples: I, dir: P, block_size: usize, dim: usize) -> Result<Manifest>
where
    P: AsRef<Path>,
    I: IntoIterator<Item = EmbeddingSample>,
{
    let mut writer = ContainerWriter::create(dir, block_size, dim)?;
    for sample in samples {
        writer.append(&sample)?;
    }
    writer.finish()
}

/// Read-only view of a container. Records are held in memory; embeddings
/// are fetched by offset on demand. Safe to share across threads.
pub struct Container {
    dir: PathBuf,
    manifest: Manifest,
    records: Vec<SampleRecord>,
    index: HashMap<u64, usize>,
    tensors: File,
    tensor_len: u64,
}

impl Container {
    pub fn open<P: AsRef<Path>>(dir: P) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let manifest: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        if manifest.version != FORMAT_VERSION {
            return Err(Error::Dataset(format!(
                "unsupported container version {}",
                manifest.version
            )));
        }
        let stride = manifest.stride();

        let mut records = Vec::new();
        let mut index = HashMap::new();
        let reader = BufReader::new(File::open(dir.join(RECORDS_FILE))?);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SampleRecord = serde_json::from_str(&line).map_err(|e| {
                Error::Dataset(format!("{RECORDS_FILE} line {}: {e}", lineno + 1))
            })?;
            if record.n != record.token_ids.len() {
                return Err(Error::Dataset(format!(
                    "sample {}: n={} but {} token ids",
                    record.id,
                    record.n,
                    record.token_ids.len()
                )));
            }
            if record.n > manifest.block_size {
                return Err(Error::Dataset(format!(
                    "sample {}: {} tokens exceed block size {}",
                    record.id, record.n, manifest.block_size
                )));
            }
            validate_spans(&record.flaw_spans, record.n)
                .map_err(|e| Error::Dataset(format!("sample {}: {e}", record.id)))?;
            if index.insert(record.id, records.len()).is_some() {
                return Err(Error::DuplicateId(record.id));
            }
            records.push(record);
        }

        let tensors = File::open(dir.join(TENSORS_FILE))?;
        let tensor_len = tensors.metadata()?.len();
        for record in &records {
            if record.offset + stride > tensor_len {
                return Err(Error::Dataset(format!(
                    "sample {}: offset {} + {} exceeds tensor store size {}",
                    record.id, record.offset, stride, tensor_len
                )));
            }
        }

        Ok(Container {
            dir,
            manifest,
            records,
            index,
            tensors,
            tensor_len,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn record(&self, id: u64) -> Result<&SampleRecord> {
        self.index
            .get(&id)
            .map(|&i| &self.records[i])
            .ok_or(Error::UnknownId(id))
    }

    pub fn contains(&self, id: u64) -> bool {
        self.index.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Loads the embedding matrix for one record with a single positioned read.
    pub fn read_embedding(&self, record: &SampleRecord) -> Result<Embedding> {
        let stride = self.manifest.stride();
        if record.offset + stride > self.tensor_len {
            return Err(Error::Dataset(format!(
                "sample {}: tensor store truncated",
                record.id
            )));
        }
        let mut buf = vec![0u8; stride as usize];
        self.tensors.read_exact_at(&mut buf, record.offset)?;
        Embedding::from_le_bytes(self.manifest.block_size, self.manifest.dim, &buf)
    }

    /// Random access by sample id; constant-time offset seek.
    pub fn read_sample(&self, id: u64) -> Result<EmbeddingSample> {
        let record = self.record(id)?;
        let embedding = self.read_embedding(record)?;
        EmbeddingSample::new(
            record.id,
            record.token_ids.clone(),
            embedding,
            record.label,
            record.flaw_spans.clone(),
            record.provenance.clone(),
        )
    }

    /// Recomputes manifest counts from the records and compares.
    pub fn verify_manifest(&self) -> Result<()> {
        let mut recomputed = Manifest {
            num_samples: 0,
            num_vulnerable: 0,
            num_clean: 0,
            num_with_flaw_spans: 0,
            ..self.manifest.clone()
        };
        for r in &self.records {
            recomputed.num_samples += 1;
            match r.label {
                Label::Vulnerable => {
                    recomputed.num_vulnerable += 1;
                    if !r.flaw_spans.is_empty() {
                        recomputed.num_with_flaw_spans += 1;
                    }
                }
                Label::Clean => recomputed.num_clean += 1,
            }
        }
        if recomputed != self.manifest {
            return Err(Error::Dataset(format!(
                "manifest counts {:?} do not match records {:?}",
                self.manifest, recomputed
            )));
        }
        Ok(())
    }
}

/// Table-style dataset statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub total: u64,
    pub vulnerable: u64,
    pub with_flaw_spans: u64,
    pub without_flaw_spans: u64,
    pub clean: u64,
    /// `"1:<clean/vulnerable>"` with one decimal, or `"n/a"` when there are
    /// no vulnerable samples.
    pub ratio: String,
}

/// Formats the vulnerable:clean ratio to one decimal.
pub fn format_ratio(vulnerable: u64, clean: u64) -> String {
    if vulnerable == 0 {
        "n/a".to_string()
    } else {
        format!("1:{:.1}", clean as f64 / vulnerable as f64)
    }
}

pub fn dataset_stats(container: &Container) -> DatasetStats {
    let m = container.manifest();
    DatasetStats {
        total: m.num_samples,
        vulnerable: m.num_vulnerable,
        with_flaw_spans: m.num_with_flaw_spans,
        without_flaw_spans: m.num_vulnerable - m.num_with_flaw_spans,
        clean: m.num_clean,
        ratio: format_ratio(m.num_vulnerable, m.num_clean),
    }
}

impl DatasetStats {
    /// Aligned text rendering, one row per statistic.
    pub fn to_table(&self) -> String {
        let rows = [
            ("Vulnerable items", self.vulnerable.to_string()),
            ("  w/ flaw lines specified", self.with_flaw_spans.to_string()),
            ("  w/o flaw lines specified", self.without_flaw_spans.to_string()),
            ("Clean items", self.clean.to_string()),
            ("All items", self.total.to_string()),
            ("Ratio", self.ratio.clone()),
        ];
        let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap();
        let value_w = rows.iter().map(|(_, v)| v.len()).max().unwrap();
        let mut out = String::new();
        for (label, value) in rows {
            out.push_str(&format!("{label:<label_w$}  {value:>value_w$}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, CounterRng};
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn sample(id: u64, label: Label, l: usize, d: usize, fill: f32) -> EmbeddingSample {
        let data = vec![fill; l * d];
        EmbeddingSample::new(
            id,
            vec![1; l],
            Embedding::from_vec(l, d, data).unwrap(),
            label,
            vec![],
            Provenance::Original,
        )
        .unwrap()
    }

    fn random_sample(id: u64, l: usize, d: usize, seed: u64) -> EmbeddingSample {
        let rng = CounterRng::new(seed, domain::SYNTH_EMB, id);
        let n = 1 + (rng.u64_at(u64::MAX) % l as u64) as usize;
        let mut emb = Embedding::zeros(l, d);
        for r in 0..n {
            for c in 0..d {
                emb.set(r, c, rng.normal_at((r * d + c) as u64, 0.0, 1.0) as f32);
            }
        }
        let tok_rng = CounterRng::new(seed, domain::SYNTH_TOK, id);
        let token_ids = (0..n).map(|i| tok_rng.u64_at(i as u64) as u32 % 50_000).collect();
        let label = if id % 3 == 0 { Label::Vulnerable } else { Label::Clean };
        let spans = if label == Label::Vulnerable && n >= 2 {
            vec![FlawSpan::new(0, n / 2 + 1)]
        } else {
            vec![]
        };
        EmbeddingSample::new(id, token_ids, emb, label, spans, Provenance::Original).unwrap()
    }

    #[test]
    fn manifest_counts_and_ratio() {
        let dir = tempdir().unwrap();
        let samples = vec![
            sample(0, Label::Clean, 4, 2, 0.5),
            sample(1, Label::Clean, 4, 2, 1.5),
            sample(2, Label::Vulnerable, 4, 2, 2.5),
        ];
        let manifest = write_dataset(samples, dir.path(), 4, 2).unwrap();
        assert_eq!(manifest.num_clean, 2);
        assert_eq!(manifest.num_vulnerable, 1);
        let c = Container::open(dir.path()).unwrap();
        let stats = dataset_stats(&c);
        assert_eq!(stats.ratio, "1:2.0");
        c.verify_manifest().unwrap();
    }

    #[test]
    fn empty_stream_yields_valid_empty_container() {
        let dir = tempdir().unwrap();
        let manifest = write_dataset(std::iter::empty(), dir.path(), 4, 2).unwrap();
        assert_eq!(manifest.num_samples, 0);
        let c = Container::open(dir.path()).unwrap();
        assert!(c.is_empty());
        assert_eq!(dataset_stats(&c).ratio, "n/a");
    }

    #[test]
    fn table_one_ratio() {
        assert_eq!(format_ratio(8_783, 142_125), "1:16.2");
        assert_eq!(format_ratio(10, 10), "1:1.0");
        assert_eq!(format_ratio(0, 5), "n/a");
    }

    #[test]
    fn roundtrip_100_random_samples_bit_exact() {
        let dir = tempdir().unwrap();
        let samples: Vec<_> = (0..100).map(|id| random_sample(id, 8, 4, 99)).collect();
        write_dataset(samples.clone(), dir.path(), 8, 4).unwrap();
        let c = Container::open(dir.path()).unwrap();
        for s in &samples {
            let back = c.read_sample(s.id).unwrap();
            assert!(back.embedding.bytes_eq(&s.embedding), "sample {}", s.id);
            assert_eq!(back.token_ids, s.token_ids);
            assert_eq!(back.label, s.label);
            assert_eq!(back.flaw_spans, s.flaw_spans);
            assert_eq!(back.provenance, s.provenance);
        }
    }

    #[test]
    fn unknown_id_is_an_error() {
        let dir = tempdir().unwrap();
        let samples: Vec<_> = (0..3).map(|id| sample(id, Label::Clean, 2, 2, 1.0)).collect();
        write_dataset(samples, dir.path(), 2, 2).unwrap();
        let c = Container::open(dir.path()).unwrap();
        match c.read_sample(999) {
            Err(Error::UnknownId(999)) => {}
            other => panic!("expected unknown id error, got {other:?}"),
        }
    }

    #[test]
    fn padding_rows_read_back_as_zeros() {
        let dir = tempdir().unwrap();
        let mut emb = Embedding::zeros(4, 2);
        emb.set(0, 0, 1.0);
        emb.set(1, 1, 2.0);
        let s = EmbeddingSample::new(7, vec![5, 6], emb, Label::Clean, vec![], Provenance::Original)
            .unwrap();
        write_dataset(vec![s], dir.path(), 4, 2).unwrap();
        let c = Container::open(dir.path()).unwrap();
        let back = c.read_sample(7).unwrap();
        for r in 2..4 {
            assert_eq!(back.embedding.row(r), &[0.0, 0.0]);
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let dir = tempdir().unwrap();
        let mut w = ContainerWriter::create(dir.path(), 2, 2).unwrap();
        w.append(&sample(1, Label::Clean, 2, 2, 0.0)).unwrap();
        match w.append(&sample(1, Label::Clean, 2, 2, 0.0)) {
            Err(Error::DuplicateId(1)) => {}
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let dir = tempdir().unwrap();
        let mut w = ContainerWriter::create(dir.path(), 2, 2).unwrap();
        assert!(w.append(&sample(0, Label::Clean, 4, 2, 0.0)).is_err());
    }

    #[test]
    fn offsets_increase_by_exact_stride() {
        let dir = tempdir().unwrap();
        let samples: Vec<_> = (0..10).map(|id| sample(id, Label::Clean, 3, 2, 0.0)).collect();
        write_dataset(samples, dir.path(), 3, 2).unwrap();
        let c = Container::open(dir.path()).unwrap();
        let stride = c.manifest().stride();
        for (k, r) in c.records().iter().enumerate() {
            assert_eq!(r.offset, k as u64 * stride);
        }
    }

    #[test]
    fn truncated_tensor_store_detected() {
        let dir = tempdir().unwrap();
        let samples: Vec<_> = (0..3).map(|id| sample(id, Label::Clean, 2, 2, 1.0)).collect();
        write_dataset(samples, dir.path(), 2, 2).unwrap();
        let bin = dir.path().join(TENSORS_FILE);
        let bytes = std::fs::read(&bin).unwrap();
        std::fs::write(&bin, &bytes[..bytes.len() - 4]).unwrap();
        assert!(Container::open(dir.path()).is_err());
    }

    proptest! {
        #[test]
        fn prop_roundtrip_preserves_bytes(ids in proptest::collection::vec(0u64..1000, 1..20), seed in 0u64..1000) {
            let mut unique = ids.clone();
            unique.sort_unstable();
            unique.dedup();
            let dir = tempdir().unwrap();
            let samples: Vec<_> = unique.iter().map(|&id| random_sample(id, 6, 3, seed)).collect();
            write_dataset(samples.clone(), dir.path(), 6, 3).unwrap();
            let c = Container::open(dir.path()).unwrap();
            c.verify_manifest().unwrap();
            for s in &samples {
                let back = c.read_sample(s.id).unwrap();
                prop_assert!(back.embedding.bytes_eq(&s.embedding));
                prop_assert_eq!(&back.token_ids, &s.token_ids);
            }
        }
    }
}
