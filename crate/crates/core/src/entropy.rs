//! Shannon entropy of measurement distributions and entropy-gap alignment of
//! source sentences with candidate translations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{bind, swap_angles, CircuitError, ParamCircuit, ParamRegistry};
use crate::sim::{exact_distribution, sample, OutcomeDistribution, Shots, SimError};

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// `−Σ p log2 p` with `0·log 0 = 0`.
pub fn shannon_entropy(d: &OutcomeDistribution) -> f64 {
    -d.mass
        .values()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

pub fn entropy_diff(h_src: f64, h_tgt: f64) -> f64 {
    (h_src - h_tgt).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub id: String,
    pub language: String,
    pub entropy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntropyTable {
    pub rows: Vec<EntropyRow>,
}

impl EntropyTable {
    pub fn from_values(language: &str, values: &[f64]) -> Self {
        Self {
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &entropy)| EntropyRow {
                    id: i.to_string(),
                    language: language.to_string(),
                    entropy,
                })
                .collect(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.entropy).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,language,entropy\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.16e}", r.id, r.language, r.entropy);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OffsetMode {
    Fixed(f64),
    /// Median diagonal gap `|H_s(i) − H_t(i)|` over the paired rows.
    Calibrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchMatrix {
    pub src_ids: Vec<String>,
    pub tgt_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub offset: f64,
    /// Column of each row's minimum, lowest index on ties.
    pub best: Vec<usize>,
}

impl MatchMatrix {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Mean of the diagonal scores over paired rows.
    pub fn mean_diagonal(&self) -> f64 {
        let n = self.rows().min(self.cols());
        (0..n).map(|i| self.values[i][i]).sum::<f64>() / n as f64
    }

    /// Fraction of paired rows whose best match is their own translation.
    pub fn diagonal_accuracy(&self) -> f64 {
        let n = self.rows().min(self.cols());
        (0..n).filter(|&i| self.best[i] == i).count() as f64 / n as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in &self.values {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Binary 8-bit graymap: 255 for a zero score, 0 for the largest.
    pub fn to_pgm(&self) -> Vec<u8> {
        let max = self.max_value();
        let mut out = format!("P5\n{} {}\n255\n", self.cols(), self.rows()).into_bytes();
        for v in self.values.iter().flatten() {
            let shade = if max > 0.0 { 255.0 * (1.0 - v / max) } else { 255.0 };
            out.push(shade.round().clamp(0.0, 255.0) as u8);
        }
        out
    }

    pub fn best_matches_csv(&self) -> String {
        let mut s = String::from("src_id,tgt_id,score\n");
        for (i, &j) in self.best.iter().enumerate() {
            let _ = writeln!(s, "{},{},{:.16e}", self.src_ids[i], self.tgt_ids[j], self.values[i][j]);
        }
        s
    }
}

pub fn calibrate_offset(src: &EntropyTable, tgt: &EntropyTable) -> f64 {
    let mut gaps: Vec<f64> = src
        .rows
        .iter()
        .zip(&tgt.rows)
        .map(|(a, b)| entropy_diff(a.entropy, b.entropy))
        .collect();
    if gaps.is_empty() {
        return 0.0;
    }
    gaps.sort_by(f64::total_cmp);
    let m = gaps.len() / 2;
    if gaps.len() % 2 == 1 {
        gaps[m]
    } else {
        (gaps[m - 1] + gaps[m]) / 2.0
    }
}

pub fn match_matrix(src: &EntropyTable, tgt: &EntropyTable, offset: OffsetMode) -> Result<MatchMatrix, EntropyError> {
    if src.rows.is_empty() {
        return Err(EntropyError::Empty("source table"));
    }
    if tgt.rows.is_empty() {
        return Err(EntropyError::Empty("target table"));
    }
    let offset = match offset {
        OffsetMode::Fixed(o) => o,
        OffsetMode::Calibrated => calibrate_offset(src, tgt),
    };
    let values: Vec<Vec<f64>> = src
        .rows
        .iter()
        .map(|a| {
            tgt.rows
                .iter()
                .map(|b| (entropy_diff(a.entropy, b.entropy) - offset).abs())
                .collect()
        })
        .collect();
    let best = values
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::INFINITY), |(bj, bv), (j, &v)| if v < bv { (j, v) } else { (bj, bv) })
                .0
        })
        .collect();
    Ok(MatchMatrix {
        src_ids: src.rows.iter().map(|r| r.id.clone()).collect(),
        tgt_ids: tgt.rows.iter().map(|r| r.id.clone()).collect(),
        values,
        offset,
        best,
    })
}

/// One aligned pair of compiled circuits.
#[derive(Debug, Clone)]
pub struct CircuitPair {
    pub id: String,
    pub src: ParamCircuit,
    pub tgt: ParamCircuit,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub shots: Shots,
    /// Sampling seed; circuit `i` uses `seed + 2i` (source) and `seed + 2i + 1` (target).
    pub seed: u64,
    /// When set, each source circuit's angles are permuted with `swap_seed + i`.
    pub swap_seed: Option<u64>,
    pub offset: OffsetMode,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub src: EntropyTable,
    pub tgt: EntropyTable,
    pub matrix: MatchMatrix,
}

fn circuit_entropy(c: &ParamCircuit, reg: &ParamRegistry, shots: Shots, seed: u64) -> Result<f64, EntropyError> {
    let bound = bind(c, reg)?;
    let d = match shots {
        Shots::Exact => exact_distribution(&bound)?,
        Shots::Count(n) => sample(&bound, n, seed)?,
    };
    Ok(shannon_entropy(&d))
}

/// Entropy of the full (not post-selected) measurement distribution of every
/// circuit, then the match matrix between the two languages.
pub fn run_matching_experiment(
    pairs: &[CircuitPair],
    reg: &ParamRegistry,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, EntropyError> {
    if pairs.is_empty() {
        return Err(EntropyError::Empty("corpus"));
    }
    let mut src = EntropyTable::default();
    let mut tgt = EntropyTable::default();
    for (i, p) in pairs.iter().enumerate() {
        let i64 = i as u64;
        let src_reg = match cfg.swap_seed {
            Some(s) => reg.overlay(&swap_angles(&p.src, reg, s.wrapping_add(i64))?),
            None => reg.clone(),
        };
        src.rows.push(EntropyRow {
            id: p.id.clone(),
            language: p.src.language.clone(),
            entropy: circuit_entropy(&p.src, &src_reg, cfg.shots, cfg.seed.wrapping_add(2 * i64))?,
        });
        tgt.rows.push(EntropyRow {
            id: p.id.clone(),
            language: p.tgt.language.clone(),
            entropy: circuit_entropy(&p.tgt, reg, cfg.shots, cfg.seed.wrapping_add(2 * i64 + 1))?,
        });
    }
    let matrix = match_matrix(&src, &tgt, cfg.offset)?;
    Ok(ExperimentResult { src, tgt, matrix })
}

/// Writes `matrix.csv`, `heatmap.pgm` and `best_matches.csv` into `dir`.
pub fn heatmap_export(m: &MatchMatrix, dir: &Path) -> Result<(), EntropyError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(EntropyError::Empty("matrix"));
    }
    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|source| EntropyError::Io { path, source })
    };
    fs::create_dir_all(dir).map_err(|source| EntropyError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write("matrix.csv", m.to_csv().as_bytes())?;
    write("heatmap.pgm", &m.to_pgm())?;
    write("best_matches.csv", m.best_matches_csv().as_bytes())
}
