//! JSON file formats for families over the punctured line and for
//! single formal connections.

use crate::{parse, CliError, Result};
use epsdr_core::connect::Connection;
use epsdr_core::globalcurve::{GlobalFamily, RatT};
use epsdr_core::laurent::Laurent;
use epsdr_core::scalars::{Ring, Scalar};
use serde::Deserialize;

/// On-disk description of a family on `ℙ¹ ∖ (D ∪ {∞})`: matrix entries
/// are rational expressions in `t` and `x`.
#[derive(Deserialize, Debug, Clone)]
pub struct FamilyFile {
    /// Optional display name echoed into reports.
    #[serde(default)]
    pub name: Option<String>,
    /// Finite punctures, as rational constants.
    pub punctures: Vec<String>,
    /// Rank of the bundle.
    pub rank: usize,
    /// `A_t` matrix entries, row major.
    pub a_t: Vec<Vec<String>>,
    /// Optional `A_x` matrix entries.
    #[serde(default)]
    pub a_x: Option<Vec<Vec<String>>>,
}

fn parse_matrix(entries: &[Vec<String>], rank: usize, what: &str) -> Result<Vec<Vec<RatT>>> {
    if entries.len() != rank || entries.iter().any(|row| row.len() != rank) {
        return Err(CliError::Input(format!(
            "{what} must be a {rank}×{rank} matrix of expressions"
        )));
    }
    entries
        .iter()
        .map(|row| row.iter().map(|src| parse::parse_ratt(src)).collect())
        .collect()
}

impl FamilyFile {
    /// Validates and converts the file into a family.
    pub fn build(&self) -> Result<GlobalFamily> {
        let punctures = self
            .punctures
            .iter()
            .map(|src| Ok(Scalar::from_rat(Ring::Q, parse::parse_qconst(src)?)))
            .collect::<Result<Vec<_>>>()?;
        let a_t = parse_matrix(&self.a_t, self.rank, "a_t")?;
        let a_x = match &self.a_x {
            Some(entries) => Some(parse_matrix(entries, self.rank, "a_x")?),
            None => None,
        };
        GlobalFamily::new(punctures, a_t, a_x).map_err(CliError::Core)
    }
}

/// Parses a family from JSON text.
pub fn family_from_str(json: &str) -> Result<(GlobalFamily, FamilyFile)> {
    let file: FamilyFile =
        serde_json::from_str(json).map_err(|e| CliError::Input(format!("bad family JSON: {e}")))?;
    let fam = file.build()?;
    Ok((fam, file))
}

/// Loads a family from a JSON file on disk.
pub fn family_from_path(path: &std::path::Path) -> Result<(GlobalFamily, FamilyFile)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    family_from_str(&text)
}

/// On-disk description of a single formal connection: matrix entries
/// are series expressions in `t` (and `x`, `eps`).
#[derive(Deserialize, Debug, Clone)]
pub struct ConnectionFile {
    /// Rank of the module.
    pub rank: usize,
    /// Coefficient ring name (`q`, `qx`, `qnil2`, …); inferred from the
    /// entries when absent.
    #[serde(default)]
    pub ring: Option<String>,
    /// Vertical matrix `A_t`, row major.
    pub a_t: Vec<Vec<String>>,
    /// Optional horizontal matrix `A_x`.
    #[serde(default)]
    pub a_x: Option<Vec<Vec<String>>>,
}

impl ConnectionFile {
    fn ring_for(&self, entries: &[&Vec<Vec<String>>]) -> Result<Ring> {
        if let Some(name) = &self.ring {
            return parse::ring_by_name(name);
        }
        let mut ring = Ring::Q;
        for block in entries {
            for row in block.iter() {
                for src in row {
                    let (expr, _) = parse::parse_expression(src)?;
                    ring = ring
                        .join(parse::infer_ring(&expr, Ring::Q))
                        .map_err(CliError::Core)?;
                }
            }
        }
        Ok(ring)
    }

    /// Validates and converts the file into a connection at `prec`.
    pub fn build(&self, prec: i64) -> Result<Connection> {
        let mut blocks: Vec<&Vec<Vec<String>>> = vec![&self.a_t];
        if let Some(ax) = &self.a_x {
            blocks.push(ax);
        }
        let ring = self.ring_for(&blocks)?;
        let shape_ok = |m: &Vec<Vec<String>>| {
            m.len() == self.rank && m.iter().all(|row| row.len() == self.rank)
        };
        if !shape_ok(&self.a_t) || self.a_x.as_ref().is_some_and(|m| !shape_ok(m)) {
            return Err(CliError::Input(format!(
                "matrix entries must form {0}×{0} blocks",
                self.rank
            )));
        }
        let eval = |m: &Vec<Vec<String>>| -> Result<Vec<Vec<Laurent>>> {
            m.iter()
                .map(|row| {
                    row.iter()
                        .map(|src| parse::parse_series(src, Some(ring), prec))
                        .collect()
                })
                .collect()
        };
        let a_t = eval(&self.a_t)?;
        let a_x = match &self.a_x {
            Some(m) => Some(eval(m)?),
            None => None,
        };
        Connection::new(a_t, a_x).map_err(CliError::Core)
    }
}

/// Parses a connection from JSON text at the given precision.
pub fn connection_from_str(json: &str, prec: i64) -> Result<Connection> {
    let file: ConnectionFile = serde_json::from_str(json)
        .map_err(|e| CliError::Input(format!("bad connection JSON: {e}")))?;
    file.build(prec)
}

/// Loads a connection from a JSON file on disk.
pub fn connection_from_path(path: &std::path::Path, prec: i64) -> Result<Connection> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    connection_from_str(&text, prec)
}

/// Builds a rank-1 connection from inline `--at` / `--ax` literals.
pub fn connection_from_inline(
    at: &str,
    ax: Option<&str>,
    ring: Option<Ring>,
    prec: i64,
) -> Result<Connection> {
    let ring = match ring {
        Some(r) => r,
        None => {
            let (e1, _) = parse::parse_expression(at)?;
            let mut r = parse::infer_ring(&e1, Ring::Q);
            if let Some(src) = ax {
                let (e2, _) = parse::parse_expression(src)?;
                r = r
                    .join(parse::infer_ring(&e2, Ring::Q))
                    .map_err(CliError::Core)?;
            }
            r
        }
    };
    let a_t = parse::parse_series(at, Some(ring), prec)?;
    let a_x = match ax {
        Some(src) => Some(vec![vec![parse::parse_series(src, Some(ring), prec)?]]),
        None => None,
    };
    Connection::new(vec![vec![a_t]], a_x).map_err(CliError::Core)
}
