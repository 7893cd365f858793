//! Instance files and structured instance generators.
//!
//! An instance is a matrix tuple serialized as JSON with every complex
//! entry written as an `[re, im]` pair of doubles, so files are lossless
//! and trivially parseable from any language. Generators produce the
//! structured families used throughout the test suites and record a
//! certified noncommutative rank in the metadata when certification
//! succeeds at generation time.

use crate::cp::{CpError, MatrixTuple};
use crate::engine::FlowConfig;
use crate::linalg::{CMat, Cpx};
use crate::ncrank::ncrank;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("instance declares {declared} matrices but contains {found}")]
    MatrixCount { declared: usize, found: usize },
    #[error("matrix {index} is not {n}x{n}: row {row} has {cols} entries ({rows} rows total)")]
    MatrixShape { index: usize, n: usize, row: usize, rows: usize, cols: usize },
    #[error("matrix {index} entry ({row}, {col}) is not finite")]
    NonFiniteEntry { index: usize, row: usize, col: usize },
    #[error("known_ncrank {value} exceeds the dimension {n}")]
    BadKnownRank { value: usize, n: usize },
    #[error("invalid generator parameters: {reason}")]
    BadParams { reason: String },
    #[error("json error at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Cp(#[from] CpError),
}

impl From<serde_json::Error> for InstanceError {
    fn from(e: serde_json::Error) -> Self {
        InstanceError::Json { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

/// Optional provenance carried alongside the matrices.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct InstanceMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Certified noncommutative rank, present when generation certified it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_ncrank: Option<usize>,
    /// Human-readable generator call that produced the instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<String>,
}

/// On-disk instance: dimensions, matrices as nested `[re, im]` arrays, and
/// optional metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub m: usize,
    /// `matrices[k][i][j] = [re, im]` of entry (i, j) of the k-th matrix.
    pub matrices: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<InstanceMetadata>,
}

impl InstanceFile {
    /// Serialize a tuple. Instances written this way round-trip bit-exactly:
    /// JSON doubles are emitted with shortest-round-trip formatting.
    pub fn from_tuple(tuple: &MatrixTuple, metadata: Option<InstanceMetadata>) -> Self {
        let n = tuple.dim();
        let matrices = tuple
            .matrices()
            .iter()
            .map(|a| {
                (0..n)
                    .map(|i| (0..n).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
                    .collect()
            })
            .collect();
        InstanceFile { n, m: tuple.len(), matrices, metadata }
    }

    /// Validate shapes and entries and build the tuple.
    pub fn to_tuple(&self) -> Result<MatrixTuple, InstanceError> {
        if self.matrices.len() != self.m {
            return Err(InstanceError::MatrixCount {
                declared: self.m,
                found: self.matrices.len(),
            });
        }
        if let Some(meta) = &self.metadata {
            if let Some(k) = meta.known_ncrank {
                if k > self.n {
                    return Err(InstanceError::BadKnownRank { value: k, n: self.n });
                }
            }
        }
        let n = self.n;
        let mut out = Vec::with_capacity(self.m);
        for (index, rows) in self.matrices.iter().enumerate() {
            if rows.len() != n {
                return Err(InstanceError::MatrixShape {
                    index,
                    n,
                    row: 0,
                    rows: rows.len(),
                    cols: rows.first().map_or(0, Vec::len),
                });
            }
            let mut a = CMat::zeros(n, n);
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(InstanceError::MatrixShape {
                        index,
                        n,
                        row: i,
                        rows: rows.len(),
                        cols: row.len(),
                    });
                }
                for (j, &[re, im]) in row.iter().enumerate() {
                    if !(re.is_finite() && im.is_finite()) {
                        return Err(InstanceError::NonFiniteEntry { index, row: i, col: j });
                    }
                    a[(i, j)] = Cpx::new(re, im);
                }
            }
            out.push(a);
        }
        MatrixTuple::new(out).map_err(InstanceError::Cp)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), InstanceError> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, InstanceError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn name(&self) -> &str {
        self.metadata
            .as_ref()
            .and_then(|m| m.name.as_deref())
            .unwrap_or("unnamed")
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> Cpx {
    Cpx::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Certify the rank with the given seed; `Some` only when certified.
fn certified_rank(tuple: &MatrixTuple, seed: u64) -> Option<usize> {
    let cfg = FlowConfig { seed, ..FlowConfig::default() };
    match ncrank(tuple, &cfg) {
        Ok(cert) if cert.certified => Some(cert.ncrank),
        _ => None,
    }
}

fn build(
    tuple: MatrixTuple,
    name: String,
    construction: String,
    known_ncrank: Option<usize>,
) -> InstanceFile {
    InstanceFile::from_tuple(
        &tuple,
        Some(InstanceMetadata { name: Some(name), known_ncrank, construction: Some(construction) }),
    )
}

/// The single-matrix identity tuple; rank n by inspection.
pub fn identity_instance(n: usize) -> Result<InstanceFile, InstanceError> {
    if n < 1 {
        return Err(InstanceError::BadParams { reason: "identity needs n >= 1".into() });
    }
    Ok(build(
        MatrixTuple::identity(n),
        format!("identity-{n}"),
        format!("identity(n={n})"),
        Some(n),
    ))
}

/// The pair (diag(1,0), diag(0,1)): already doubly stochastic, rank 2.
pub fn diagonal_pair_instance() -> InstanceFile {
    let mut a1 = CMat::zeros(2, 2);
    a1[(0, 0)] = Cpx::new(1.0, 0.0);
    let mut a2 = CMat::zeros(2, 2);
    a2[(1, 1)] = Cpx::new(1.0, 0.0);
    build(
        MatrixTuple::new(vec![a1, a2]).expect("fixed 2x2 pair"),
        "diagonal-pair".into(),
        "diagonal-pair()".into(),
        Some(2),
    )
}

/// Tuples vanishing on the upper-left (n−l)×k block with generic Gaussian
/// entries elsewhere: the first k coordinates map into an l-dimensional
/// space, so the corank is at least k − l, with equality generically. The
/// metadata records the rank certified at generation time.
pub fn zero_block_instance(
    n: usize,
    k: usize,
    l: usize,
    m: usize,
    seed: u64,
) -> Result<InstanceFile, InstanceError> {
    if n < 1 || m < 1 {
        return Err(InstanceError::BadParams { reason: "need n >= 1 and m >= 1".into() });
    }
    if k < 1 || k > n || l > n {
        return Err(InstanceError::BadParams {
            reason: format!("need 1 <= k <= n and l <= n, got n={n}, k={k}, l={l}"),
        });
    }
    if l >= k {
        return Err(InstanceError::BadParams {
            reason: format!("need l < k for a rank defect, got k={k}, l={l}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mats: Vec<CMat> = (0..m)
        .map(|_| {
            CMat::from_fn(n, n, |i, j| {
                if i < n - l && j < k {
                    Cpx::new(0.0, 0.0)
                } else {
                    gaussian(&mut rng)
                }
            })
        })
        .collect();
    let tuple = MatrixTuple::new(mats)?;
    let known = certified_rank(&tuple, seed);
    Ok(build(
        tuple,
        format!("zero-block-{n}-{k}-{l}"),
        format!("zero-block(n={n}, k={k}, l={l}, m={m}, seed={seed})"),
        known,
    ))
}

/// The three 3×3 skew matrices spanning the antisymmetric matrices: every
/// matrix in the span is singular (odd-dimensional skew), yet the
/// noncommutative rank is 3.
pub fn skew3_instance() -> InstanceFile {
    let entry = |pairs: &[(usize, usize, f64)]| {
        let mut a = CMat::zeros(3, 3);
        for &(i, j, v) in pairs {
            a[(i, j)] = Cpx::new(v, 0.0);
        }
        a
    };
    let a1 = entry(&[(0, 1, 1.0), (1, 0, -1.0)]);
    let a2 = entry(&[(0, 2, 1.0), (2, 0, -1.0)]);
    let a3 = entry(&[(1, 2, 1.0), (2, 1, -1.0)]);
    let tuple = MatrixTuple::new(vec![a1, a2, a3]).expect("fixed 3x3 tuple");
    let known = certified_rank(&tuple, 0);
    build(tuple, "skew3".into(), "skew3()".into(), known)
}

/// Dense Gaussian tuples; full rank n generically, certified at
/// generation.
pub fn random_full_instance(n: usize, m: usize, seed: u64) -> Result<InstanceFile, InstanceError> {
    if n < 1 || m < 1 {
        return Err(InstanceError::BadParams { reason: "need n >= 1 and m >= 1".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mats: Vec<CMat> = (0..m).map(|_| CMat::from_fn(n, n, |_, _| gaussian(&mut rng))).collect();
    let tuple = MatrixTuple::new(mats)?;
    let known = certified_rank(&tuple, seed);
    Ok(build(
        tuple,
        format!("random-full-{n}-{m}"),
        format!("random-full(n={n}, m={m}, seed={seed})"),
        known,
    ))
}
