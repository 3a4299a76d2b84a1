//! Set definition files (TOML).
//!
//! ```toml
//! name = "parabola"
//! ambient_dim = 2
//! kind = "chart"            # chart | implicit | union | finite
//!
//! [[charts]]
//! params = ["t"]
//! lo = [-1.0]
//! hi = [1.0]
//! map = ["t", "t^2"]
//! graph_coords = [0]        # optional: parameter i equals coordinate graph_coords[i]
//!
//! [[special_points]]
//! label = "vertex"
//! point = [0.0, 0.0]
//! ```
//!
//! Implicit sets use `[implicit]` with `vars` and `expr`; finite sets use
//! `points` and/or `[[sequences]]` (`index`, `from`, `to`, `coords`); unions
//! list `[[parts]]`, each with its own `kind` and payload.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::chart::{Chart, ParamBox, Preimage};
use super::expr::Expr;
use super::finite::FinitePoints;
use super::implicit::ImplicitSet;
use super::{Assumptions, Piece, SetOracle, SpecialPoint};
use crate::error::{Error, Result};
use crate::rng::Kronecker;

/// Longest sequence a definition may expand.
pub const MAX_SEQUENCE_TERMS: i64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Chart,
    Implicit,
    Union,
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDef {
    pub params: Vec<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub map: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub periodic: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_coords: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse_lipschitz: Option<f64>,
    /// Row `i` holds the partial derivatives of coordinate `i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicitDef {
    pub vars: Vec<String>,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDef {
    pub index: String,
    pub from: i64,
    pub to: i64,
    pub coords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartDef {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub charts: Vec<ChartDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implicit: Option<ImplicitDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequences: Vec<SequenceDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetDefinition {
    pub name: String,
    pub ambient_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsic_dim: Option<usize>,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<Assumptions>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub charts: Vec<ChartDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implicit: Option<ImplicitDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequences: Vec<SequenceDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<PartDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub special_points: Vec<SpecialPoint>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

impl SetDefinition {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| bad(format!("set definition: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| bad(format!("set definition: {e}")))
    }

    /// Stable digest of the canonical TOML form, for report headers.
    pub fn digest(&self) -> String {
        let mut h = DefaultHasher::new();
        self.to_toml().unwrap_or_default().hash(&mut h);
        format!("{:016x}", h.finish())
    }

    fn own_part(&self) -> PartDef {
        PartDef {
            kind: self.kind,
            charts: self.charts.clone(),
            implicit: self.implicit.clone(),
            points: self.points.clone(),
            sequences: self.sequences.clone(),
        }
    }

    pub fn build(&self) -> Result<SetOracle> {
        let n = self.ambient_dim;
        if n == 0 {
            return Err(bad("ambient_dim must be positive"));
        }
        let parts = match self.kind {
            Kind::Union => {
                if self.parts.is_empty() {
                    return Err(bad("union without parts"));
                }
                if self.parts.iter().any(|p| p.kind == Kind::Union) {
                    return Err(bad("nested unions are not supported"));
                }
                self.parts.clone()
            }
            _ => vec![self.own_part()],
        };
        let declared = self.intrinsic_dim;
        let mut pieces = Vec::new();
        for part in &parts {
            pieces.extend(build_part(n, part, declared)?);
        }
        let dim = declared.unwrap_or_else(|| pieces.iter().map(Piece::dim).max().unwrap_or(0));
        let mut oracle = SetOracle::new(&self.name, n, dim)
            .with_scale(self.scale.unwrap_or(1.0))
            .with_assumptions(self.assumptions.unwrap_or_default());
        if let Some(note) = &self.note {
            oracle = oracle.with_note(note);
        }
        for p in pieces {
            oracle = oracle.with_piece(p);
        }
        for sp in &self.special_points {
            if sp.point.len() != n {
                return Err(bad(format!("special point {:?} has wrong dimension", sp.label)));
            }
            oracle = oracle.with_special(&sp.label, sp.point.clone());
        }
        Ok(oracle)
    }
}

fn build_part(n: usize, part: &PartDef, declared: Option<usize>) -> Result<Vec<Piece>> {
    match part.kind {
        Kind::Chart => {
            if part.charts.is_empty() {
                return Err(bad("chart set without charts"));
            }
            part.charts.iter().map(|c| build_chart(n, c).map(Piece::Chart)).collect()
        }
        Kind::Implicit => {
            let def = part.implicit.as_ref().ok_or_else(|| bad("implicit set without [implicit]"))?;
            if def.vars.len() != n {
                return Err(bad("implicit vars must match ambient_dim"));
            }
            let vars: Vec<&str> = def.vars.iter().map(String::as_str).collect();
            let e = Expr::parse(&def.expr, &vars)?;
            let dim = declared.unwrap_or(n.saturating_sub(1));
            Ok(vec![Piece::Implicit(ImplicitSet::new(n, dim, Arc::new(move |x| e.eval(x))))])
        }
        Kind::Finite => {
            let mut pts = part.points.clone();
            for s in &part.sequences {
                pts.extend(expand_sequence(n, s)?);
            }
            if pts.is_empty() {
                return Err(bad("finite set without points"));
            }
            if pts.iter().any(|p| p.len() != n || p.iter().any(|v| !v.is_finite())) {
                return Err(bad("finite set point with wrong dimension or non-finite value"));
            }
            Ok(vec![Piece::Finite(FinitePoints::new(n, pts))])
        }
        Kind::Union => Err(bad("nested unions are not supported")),
    }
}

fn expand_sequence(n: usize, s: &SequenceDef) -> Result<Vec<Vec<f64>>> {
    if s.coords.len() != n {
        return Err(bad("sequence coords must match ambient_dim"));
    }
    if s.to < s.from || s.to - s.from >= MAX_SEQUENCE_TERMS {
        return Err(bad(format!("sequence range {}..={} is empty or too long", s.from, s.to)));
    }
    let exprs: Vec<Expr> = s.coords.iter().map(|c| Expr::parse(c, &[s.index.as_str()])).collect::<Result<_>>()?;
    Ok((s.from..=s.to).map(|i| exprs.iter().map(|e| e.eval(&[i as f64])).collect()).collect())
}

fn build_chart(n: usize, def: &ChartDef) -> Result<Chart> {
    let k = def.params.len();
    if k == 0 || def.lo.len() != k || def.hi.len() != k {
        return Err(bad("chart params, lo and hi must have equal nonzero length"));
    }
    if def.lo.iter().zip(&def.hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
        return Err(bad("chart box needs finite lo <= hi"));
    }
    if def.map.len() != n {
        return Err(bad(format!("chart map has {} coordinates, expected {n}", def.map.len())));
    }
    let vars: Vec<&str> = def.params.iter().map(String::as_str).collect();
    let map: Vec<Expr> = def.map.iter().map(|m| Expr::parse(m, &vars)).collect::<Result<_>>()?;
    let domain = ParamBox::new(def.lo.clone(), def.hi.clone());
    let mut chart = Chart::new(
        n,
        domain.clone(),
        Arc::new(move |t, x| {
            for (xi, e) in x.iter_mut().zip(&map) {
                *xi = e.eval(t);
            }
        }),
    );
    if !def.periodic.is_empty() {
        if def.periodic.len() != k {
            return Err(bad("periodic flags must match params"));
        }
        chart = chart.with_periodic(def.periodic.clone());
    }
    if let Some(rows) = &def.jacobian {
        if rows.len() != n || rows.iter().any(|r| r.len() != k) {
            return Err(bad("jacobian must have one row per coordinate and one entry per parameter"));
        }
        let jac: Vec<Vec<Expr>> = rows
            .iter()
            .map(|r| r.iter().map(|e| Expr::parse(e, &vars)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        chart = chart.with_jacobian(Arc::new(move |t, out| {
            for (i, row) in jac.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    out[j * n + i] = e.eval(t);
                }
            }
        }));
    }
    if let Some(g) = &def.graph_coords {
        if g.len() != k || g.iter().any(|&c| c >= n) {
            return Err(bad("graph_coords must name one coordinate per parameter"));
        }
        let matrix: Vec<Vec<f64>> = g.iter().map(|&c| (0..n).map(|j| if j == c { 1.0 } else { 0.0 }).collect()).collect();
        chart = chart.with_preimage(Preimage::LeftInverse { matrix, offset: vec![0.0; n], gain: 1.0 });
        let mut seq = Kronecker::new(k, 0);
        let mut u = vec![0.0; k];
        let mut x = vec![0.0; n];
        for _ in 0..100 {
            seq.next_into(&mut u);
            let t: Vec<f64> = (0..k).map(|i| domain.lo[i] + u[i] * (domain.hi[i] - domain.lo[i])).collect();
            chart.eval(&t, &mut x);
            if g.iter().zip(&t).any(|(&c, ti)| (x[c] - ti).abs() > 1e-9 * ti.abs().max(1.0)) {
                return Err(bad("graph_coords do not reproduce the parameters"));
            }
        }
    } else if let Some(l) = def.inverse_lipschitz {
        if !(l > 0.0) {
            return Err(bad("inverse_lipschitz must be positive"));
        }
        chart = chart.with_preimage(Preimage::Search { inverse_lipschitz: l });
    }
    Ok(chart)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARABOLA: &str = r#"
name = "parabola"
ambient_dim = 2
kind = "chart"

[[charts]]
params = ["t"]
lo = [-1.0]
hi = [1.0]
map = ["t", "t^2"]
graph_coords = [0]
jacobian = [["1"], ["2*t"]]

[[special_points]]
label = "vertex"
point = [0.0, 0.0]
"#;

    #[test]
    fn loads_chart_file() {
        let d = SetDefinition::from_toml(PARABOLA).unwrap();
        let o = d.build().unwrap();
        assert_eq!(o.intrinsic_dim(), 1);
        assert!(o.membership(&[0.5, 0.25], 1e-9));
        assert!(!o.membership(&[0.5, 0.3], 1e-3));
        let pts = o.sample_in_ball(&[0.0, 0.0], 0.1, 20, 1).unwrap();
        assert_eq!(pts.len(), 20);
        let back = SetDefinition::from_toml(&d.to_toml().unwrap()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.digest(), d.digest());
    }

    #[test]
    fn loads_union_with_sequence() {
        let text = r#"
name = "y"
ambient_dim = 1
kind = "union"

[[parts]]
kind = "finite"
[[parts.sequences]]
index = "n"
from = 1
to = 100
coords = ["1 + 1/n"]

[[parts]]
kind = "chart"
[[parts.charts]]
params = ["t"]
lo = [-1.0]
hi = [1.0]
map = ["t"]
graph_coords = [0]
"#;
        let o = SetDefinition::from_toml(text).unwrap().build().unwrap();
        assert_eq!(o.pieces().len(), 2);
        assert_eq!(o.intrinsic_dim(), 1);
        assert!(o.membership(&[1.5], 1e-12));
        assert!(!o.membership(&[1.4], 1e-3));
    }

    #[test]
    fn implicit_and_errors() {
        let text = "name='c'\nambient_dim=2\nkind='implicit'\n[implicit]\nvars=['x','y']\nexpr='x*y'\n";
        let o = SetDefinition::from_toml(text).unwrap().build().unwrap();
        assert_eq!(o.intrinsic_dim(), 1);
        assert!(o.membership(&[0.0, 0.3], 1e-9));
        let broken = PARABOLA.replace("\"t^2\"", "\"t^\"");
        assert!(SetDefinition::from_toml(&broken).unwrap().build().is_err());
        let wrong_graph = PARABOLA.replace("graph_coords = [0]", "graph_coords = [1]");
        assert!(SetDefinition::from_toml(&wrong_graph).unwrap().build().is_err());
        assert!(SetDefinition::from_toml("name = 1").is_err());
    }
}
