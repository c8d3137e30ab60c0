//! Block-spin probability kernels `T(sigma_block, sigma')` and the axiom gate.
//!
//! A block configuration is encoded in `s` bits, bit `i` referring to the
//! `i`-th site of the block in lexicographic order; a set bit is spin -1.
//! Sums over spins are normalized (averages), so a valid kernel satisfies
//! `(T(c,+1) + T(c,-1)) / 2 = 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Tolerance for the floating-point axiom checks.
pub const AXIOM_TOLERANCE: f64 = 1e-12;

/// Largest block cardinality a kernel table may have.
pub const MAX_BLOCK_SIZE: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelKind {
    Decimation { offset: usize },
    Majority,
    Constant,
    Custom,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Decimation { offset } => write!(f, "decimation@{offset}"),
            KernelKind::Majority => write!(f, "majority"),
            KernelKind::Constant => write!(f, "constant"),
            KernelKind::Custom => write!(f, "custom"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    block_size: usize,
    /// `table[c] = [T(c, +1), T(c, -1)]`.
    table: Vec<[f64; 2]>,
    kind: KernelKind,
}

impl Kernel {
    /// Copies the spin at in-block position `offset` (coordinates within the
    /// block) into the block spin: `T = 1 + sigma' sigma_offset`.
    pub fn decimation(block_extents: &[usize], offset: &[usize]) -> Result<Self> {
        if offset.len() != block_extents.len()
            || offset.iter().zip(block_extents).any(|(o, b)| o >= b)
        {
            return config(format!(
                "decimation offset {offset:?} outside block {block_extents:?}"
            ));
        }
        let pos = offset
            .iter()
            .zip(block_extents)
            .fold(0, |acc, (&o, &b)| acc * b + o);
        let s: usize = block_extents.iter().product();
        Self::check_size(s)?;
        let table = (0..1usize << s)
            .map(|c| {
                if c >> pos & 1 == 0 {
                    [2.0, 0.0]
                } else {
                    [0.0, 2.0]
                }
            })
            .collect();
        Ok(Self {
            block_size: s,
            table,
            kind: KernelKind::Decimation { offset: pos },
        })
    }

    /// Majority rule on a block of odd cardinality `s`.
    pub fn majority(s: usize) -> Result<Self> {
        if s.is_multiple_of(2) {
            return config(format!(
                "majority rule needs an odd block cardinality, got {s}"
            ));
        }
        Self::check_size(s)?;
        let table = (0..1usize << s)
            .map(|c| {
                let down = c.count_ones() as usize;
                if 2 * down < s {
                    [2.0, 0.0]
                } else {
                    [0.0, 2.0]
                }
            })
            .collect();
        Ok(Self {
            block_size: s,
            table,
            kind: KernelKind::Majority,
        })
    }

    /// The trivial kernel `T = 1`.
    pub fn constant(s: usize) -> Result<Self> {
        Self::check_size(s)?;
        Ok(Self {
            block_size: s,
            table: vec![[1.0, 1.0]; 1 << s],
            kind: KernelKind::Constant,
        })
    }

    /// A user-supplied table; accepted only when every axiom holds.
    pub fn custom(s: usize, table: Vec<[f64; 2]>) -> Result<Self> {
        Self::check_size(s)?;
        let report = validate_table(s, &table, KernelKind::Custom);
        if !report.passed {
            return Err(Error::KernelRejected(Box::new(report)));
        }
        Ok(Self {
            block_size: s,
            table,
            kind: KernelKind::Custom,
        })
    }

    fn check_size(s: usize) -> Result<()> {
        if s == 0 || s > MAX_BLOCK_SIZE {
            return config(format!(
                "block cardinality {s} outside 1..={MAX_BLOCK_SIZE}"
            ));
        }
        Ok(())
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    /// `T(c, sigma')` with `block_spin_down` selecting `sigma' = -1`.
    #[inline]
    pub fn value(&self, config: usize, block_spin_down: bool) -> f64 {
        self.table[config][block_spin_down as usize]
    }

    #[inline]
    pub fn row(&self, config: usize) -> [f64; 2] {
        self.table[config]
    }

    pub fn table(&self) -> &[[f64; 2]] {
        &self.table
    }

    pub fn validate(&self) -> ValidationReport {
        validate_table(self.block_size, &self.table, self.kind.clone())
    }

    /// Parses a delimiter-separated table: one row per block configuration
    /// `bits, T(+1), T(-1)`. `bits` lists the in-block spins in order, using
    /// `0`/`+` for spin +1 and `1`/`-` for spin -1. Lines starting with `#`
    /// are ignored.
    pub fn parse_table(text: &str) -> Result<(usize, Vec<[f64; 2]>)> {
        let mut rows: Vec<(usize, usize, [f64; 2])> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c == '\t' || c == ';' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            let err = |msg: String| Error::Parse {
                line: lineno + 1,
                msg,
            };
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let mut c = 0usize;
            for (i, ch) in fields[0].chars().enumerate() {
                match ch {
                    '0' | '+' => {}
                    '1' | '-' => c |= 1 << i,
                    other => return Err(err(format!("bad spin character {other:?}"))),
                }
            }
            let parse = |f: &str| f.parse::<f64>().map_err(|e| err(format!("{f}: {e}")));
            rows.push((
                fields[0].chars().count(),
                c,
                [parse(fields[1])?, parse(fields[2])?],
            ));
        }
        let Some(&(s, _, _)) = rows.first() else {
            return Err(Error::Parse {
                line: 0,
                msg: "empty kernel table".into(),
            });
        };
        Self::check_size(s)?;
        if rows.iter().any(|r| r.0 != s) {
            return Err(Error::Parse {
                line: 0,
                msg: "rows disagree on block cardinality".into(),
            });
        }
        let mut table = vec![None; 1 << s];
        for (_, c, v) in rows {
            if table[c].replace(v).is_some() {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("configuration {c:#b} listed twice"),
                });
            }
        }
        let table: Option<Vec<[f64; 2]>> = table.into_iter().collect();
        table.map(|t| (s, t)).ok_or_else(|| Error::Parse {
            line: 0,
            msg: "kernel table is incomplete".into(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub axiom: String,
    pub passed: bool,
    pub worst_violation: f64,
    /// Block configuration (bit encoding) where the worst violation occurs.
    pub failing_config: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kind: KernelKind,
    pub block_size: usize,
    /// All table entries are integers, so the checks ran in exact arithmetic.
    pub exact_arithmetic: bool,
    pub checks: Vec<AxiomCheck>,
    pub passed: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} kernel (s = {})", self.kind, self.block_size)?;
        for c in &self.checks {
            write!(
                f,
                "; {}: {} (worst {:e})",
                c.axiom,
                if c.passed { "pass" } else { "FAIL" },
                c.worst_violation
            )?;
        }
        Ok(())
    }
}

struct Worst {
    value: f64,
    config: Option<usize>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            config: None,
        }
    }

    fn record(&mut self, violation: f64, c: usize) {
        if violation > self.value || (violation.is_nan() && !self.value.is_nan()) {
            self.value = violation;
            self.config = Some(c);
        }
    }

    fn into_check(self, axiom: &str, tol: f64) -> AxiomCheck {
        AxiomCheck {
            axiom: axiom.to_string(),
            passed: self.value <= tol,
            worst_violation: self.value,
            failing_config: if self.value > tol || self.value.is_nan() {
                self.config
            } else {
                None
            },
        }
    }
}

/// Checks nonnegativity, spin-flip symmetry, normalization over the block
/// spin, and the averaged identity `avg_c T(c, +-1) = 1`.
pub fn validate_table(s: usize, table: &[[f64; 2]], kind: KernelKind) -> ValidationReport {
    let n = 1usize << s;
    if table.len() != n {
        return ValidationReport {
            kind,
            block_size: s,
            exact_arithmetic: false,
            checks: vec![AxiomCheck {
                axiom: "complete table".into(),
                passed: false,
                worst_violation: f64::INFINITY,
                failing_config: None,
            }],
            passed: false,
        };
    }
    let flip = n - 1;
    let exact = table
        .iter()
        .flatten()
        .all(|v| v.is_finite() && v.fract() == 0.0 && v.abs() < 2f64.powi(40));
    // with integer entries, every quantity below is an exact integer in f64;
    // normalization is checked as T(+) + T(-) = 2 and the average as sum = 2^s
    let tol = if exact { 0.0 } else { AXIOM_TOLERANCE };

    let mut nonneg = Worst::new();
    let mut symmetry = Worst::new();
    let mut normalization = Worst::new();
    for (c, row) in table.iter().enumerate() {
        nonneg.record((-row[0]).max(-row[1]).max(0.0), c);
        let mirror = table[c ^ flip];
        symmetry.record(
            (row[0] - mirror[1]).abs().max((row[1] - mirror[0]).abs()),
            c,
        );
        normalization.record(((row[0] + row[1]) / 2.0 - 1.0).abs(), c);
    }
    let mut average = Worst::new();
    for spin in 0..2 {
        let total: f64 = table.iter().map(|r| r[spin]).sum();
        let dev = if exact {
            (total - n as f64).abs()
        } else {
            (total / n as f64 - 1.0).abs()
        };
        average.record(dev, spin);
    }
    let checks = vec![
        nonneg.into_check("nonnegativity", 0.0),
        symmetry.into_check("spin-flip symmetry", tol),
        normalization.into_check("block-spin normalization", tol),
        average.into_check("block-configuration average", tol),
    ];
    let passed = checks.iter().all(|c| c.passed);
    ValidationReport {
        kind,
        block_size: s,
        exact_arithmetic: exact,
        checks,
        passed,
    }
}
