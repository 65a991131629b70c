//! Core data model: samples, labels, flaw spans, embedding matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "vuln")]
    Vulnerable,
    #[serde(rename = "clean")]
    Clean,
}

/// Augmentation method identifiers, shared by configs, provenance and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AugmentMethod {
    #[serde(rename = "li")]
    LinearInterpolation,
    #[serde(rename = "le")]
    LinearExtrapolation,
    #[serde(rename = "sp")]
    StochasticPerturbation,
    #[serde(rename = "bi")]
    BinaryInterpolation,
    #[serde(rename = "gs")]
    GaussianScaling,
    #[serde(rename = "ros")]
    RandomOversampling,
}

impl AugmentMethod {
    /// Short wire/CLI name.
    pub fn code(&self) -> &'static str {
        match self {
            AugmentMethod::LinearInterpolation => "li",
            AugmentMethod::LinearExtrapolation => "le",
            AugmentMethod::StochasticPerturbation => "sp",
            AugmentMethod::BinaryInterpolation => "bi",
            AugmentMethod::GaussianScaling => "gs",
            AugmentMethod::RandomOversampling => "ros",
        }
    }

    pub fn from_code(code: &str) -> Result<Self> {
        match code {
            "li" => Ok(AugmentMethod::LinearInterpolation),
            "le" => Ok(AugmentMethod::LinearExtrapolation),
            "sp" => Ok(AugmentMethod::StochasticPerturbation),
            "bi" => Ok(AugmentMethod::BinaryInterpolation),
            "gs" => Ok(AugmentMethod::GaussianScaling),
            "ros" => Ok(AugmentMethod::RandomOversampling),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }

    /// Whether the operator mixes in a second sample.
    pub fn needs_partner(&self) -> bool {
        matches!(
            self,
            AugmentMethod::LinearInterpolation
                | AugmentMethod::LinearExtrapolation
                | AugmentMethod::BinaryInterpolation
        )
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Augmented {
        method: AugmentMethod,
        parents: Vec<u64>,
    },
}

/// Half-open token-index interval `[start, end)` marking a vulnerable line.
///
/// The trim counts record how many tokens the locator dropped from the
/// query before the match succeeded. They are in-memory metadata only; the
/// on-disk record stores the bare `[start, end]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "(usize, usize)", from = "(usize, usize)")]
pub struct FlawSpan {
    pub start: usize,
    pub end: usize,
    pub trimmed_front: usize,
    pub trimmed_back: usize,
}

impl FlawSpan {
    pub fn new(start: usize, end: usize) -> Self {
        FlawSpan {
            start,
            end,
            trimmed_front: 0,
            trimmed_back: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

impl From<FlawSpan> for (usize, usize) {
    fn from(s: FlawSpan) -> Self {
        (s.start, s.end)
    }
}

impl From<(usize, usize)> for FlawSpan {
    fn from((start, end): (usize, usize)) -> Self {
        FlawSpan::new(start, end)
    }
}

/// Validates that spans are non-empty, sorted by start, pairwise disjoint
/// and contained in `[0, n)`.
pub fn validate_spans(spans: &[FlawSpan], n: usize) -> Result<()> {
    let mut prev_end = 0usize;
    for (i, s) in spans.iter().enumerate() {
        if s.start >= s.end {
            return Err(Error::Input(format!(
                "flaw span [{}, {}) is empty or inverted",
                s.start, s.end
            )));
        }
        if s.end > n {
            return Err(Error::Input(format!(
                "flaw span [{}, {}) exceeds token count {}",
                s.start, s.end, n
            )));
        }
        if i > 0 && s.start < prev_end {
            return Err(Error::Input(format!(
                "flaw spans overlap or are unsorted at [{}, {})",
                s.start, s.end
            )));
        }
        prev_end = s.end;
    }
    Ok(())
}

/// Dense row-major `rows x cols` matrix of f32 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Embedding {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Embedding {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Input(format!(
                "embedding data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Embedding { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn same_shape(&self, other: &Embedding) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Little-endian f32 serialization, row-major.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(rows: usize, cols: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != rows * cols * 4 {
            return Err(Error::Dataset(format!(
                "expected {} tensor bytes, found {}",
                rows * cols * 4,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Embedding { rows, cols, data })
    }

    /// Byte-level equality (distinguishes NaN payloads and signed zeros).
    pub fn bytes_eq(&self, other: &Embedding) -> bool {
        self.same_shape(other)
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// One function: token ids, an L x d embedding block, a label and any
/// located flaw spans.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSample {
    pub id: u64,
    pub token_ids: Vec<u32>,
    pub embedding: Embedding,
    pub label: Label,
    pub flaw_spans: Vec<FlawSpan>,
    pub provenance: Provenance,
}

impl EmbeddingSample {
    pub fn new(
        id: u64,
        token_ids: Vec<u32>,
        embedding: Embedding,
        label: Label,
        flaw_spans: Vec<FlawSpan>,
        provenance: Provenance,
    ) -> Result<Self> {
        if token_ids.len() > embedding.rows() {
            return Err(Error::Input(format!(
                "sample {id}: {} tokens exceed block size {}",
                token_ids.len(),
                embedding.rows()
            )));
        }
        validate_spans(&flaw_spans, token_ids.len())?;
        Ok(EmbeddingSample {
            id,
            token_ids,
            embedding,
            label,
            flaw_spans,
            provenance,
        })
    }

    /// Number of real (non-padding) token rows.
    pub fn n(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_vulnerable(&self) -> bool {
        self.label == Label::Vulnerable
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_validation_rejects_out_of_bounds() {
        let spans = vec![FlawSpan::new(1, 5)];
        assert!(validate_spans(&spans, 4).is_err());
        assert!(validate_spans(&spans, 5).is_ok());
    }

    #[test]
    fn span_validation_rejects_overlap_and_disorder() {
        let overlapping = vec![FlawSpan::new(0, 3), FlawSpan::new(2, 4)];
        assert!(validate_spans(&overlapping, 8).is_err());
        let unsorted = vec![FlawSpan::new(4, 6), FlawSpan::new(0, 2)];
        assert!(validate_spans(&unsorted, 8).is_err());
        let touching = vec![FlawSpan::new(0, 2), FlawSpan::new(2, 4)];
        assert!(validate_spans(&touching, 8).is_ok());
    }

    #[test]
    fn sample_rejects_tokens_beyond_block() {
        let e = Embedding::zeros(2, 3);
        let err = EmbeddingSample::new(0, vec![1, 2, 3], e, Label::Clean, vec![], Provenance::Original);
        assert!(err.is_err());
    }

    #[test]
    fn provenance_wire_shape() {
        let p = Provenance::Augmented {
            method: AugmentMethod::StochasticPerturbation,
            parents: vec![7],
        };
        let j = serde_json::to_string(&p).unwrap();
        assert_eq!(j, r#"{"kind":"augmented","method":"sp","parents":[7]}"#);
        let o = serde_json::to_string(&Provenance::Original).unwrap();
        assert_eq!(o, r#"{"kind":"original"}"#);
    }

    #[test]
    fn flaw_span_wire_shape_is_a_pair() {
        let s = FlawSpan {
            start: 2,
            end: 5,
            trimmed_front: 1,
            trimmed_back: 1,
        };
        assert_eq!(serde_json::to_string(&s).unwrap(), "[2,5]");
        let back: FlawSpan = serde_json::from_str("[2,5]").unwrap();
        assert_eq!(back, FlawSpan::new(2, 5));
    }

    #[test]
    fn embedding_bytes_roundtrip() {
        let e = Embedding::from_vec(2, 2, vec![1.0, -0.0, f32::NAN, 3.5]).unwrap();
        let b = e.to_le_bytes();
        let back = Embedding::from_le_bytes(2, 2, &b).unwrap();
        assert!(e.bytes_eq(&back));
    }

    #[test]
    fn method_codes_roundtrip() {
        for m in [
            AugmentMethod::LinearInterpolation,
            AugmentMethod::LinearExtrapolation,
            AugmentMethod::StochasticPerturbation,
            AugmentMethod::BinaryInterpolation,
            AugmentMethod::GaussianScaling,
            AugmentMethod::RandomOversampling,
        ] {
            assert_eq!(AugmentMethod::from_code(m.code()).unwrap(), m);
        }
        assert!(AugmentMethod::from_code("nope").is_err());
    }
}
