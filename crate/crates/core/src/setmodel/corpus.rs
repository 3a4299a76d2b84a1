//! Built-in example sets with the facts known about them.
//!
//! Each annotation records where the expected value comes from: a value
//! printed in the literature, one that is exact by construction, or one
//! computed by an independent check (closed form or brute force).

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::chart::{angular_window, intersect_arcs, Chart, ParamBox, Preimage};
use super::definition::{ChartDef, ImplicitDef, Kind, PartDef, SequenceDef, SetDefinition};
use super::finite::FinitePoints;
use super::implicit::ImplicitSet;
use super::{Assumptions, Piece, SetOracle};
use crate::classifier::{Mode, WitnessKind};
use crate::vecmath::norm;

/// Left end of the oscillating branches of the `sin(1/x)` set.
pub const SIN_CUTOFF: f64 = 1.0 / (50.0 * PI);
/// Number of sequence terms kept on each side of the set `Y`.
pub const Y_TERMS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Stated in the literature the example comes from.
    Published,
    /// Forced by the construction.
    Exact,
    /// Obtained by an independent closed form or brute-force computation.
    Computed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ExpectedOutcome {
    C1Manifold { k: usize },
    NotC1 { witness: WitnessKind },
    Inconclusive,
    /// The criterion reports a manifold although the set is not one; the
    /// set violates a hypothesis of the criterion (definability).
    CriterionPassesNotC1 { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "claim", rename_all = "snake_case")]
pub enum Claim {
    /// Tangent cone at the point is the span of `basis`.
    TangentSubspace { basis: Vec<Vec<f64>>, tol: f64 },
    /// Density with `k` the declared dimension.
    Density { value: f64, tol: f64 },
    /// Density with `k` the declared dimension tends to 0; the estimate is
    /// at most `max` and the tail ratios decrease.
    DensityVanishes { max: f64 },
    /// Lower density with `k = dim tg_x X` is infinite.
    LowerDensityInfinite,
    /// A paratangent direction lying off the tangent cone.
    ParatangentExcess { direction: Vec<f64>, tol: f64 },
    Verdict { mode: Mode, expected: ExpectedOutcome },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    /// Label of the special point the claim is about; `None` for set-wide claims.
    pub at: Option<String>,
    #[serde(flatten)]
    pub claim: Claim,
    pub source: Source,
}

impl Annotation {
    fn at(label: &str, claim: Claim, source: Source) -> Self {
        Self { at: Some(label.to_string()), claim, source }
    }

    fn global(claim: Claim, source: Source) -> Self {
        Self { at: None, claim, source }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub description: String,
    pub oracle: SetOracle,
    pub ground_truth: Vec<Annotation>,
    /// The same set in definition-file form (without the custom preimage
    /// bounds, which have no file representation).
    pub definition: SetDefinition,
}

pub const NAMES: [&str; 12] = [
    "hairy_graph",
    "sin_inv_x",
    "set_y",
    "parabola_line",
    "cusp",
    "plane",
    "circle",
    "sphere",
    "cross",
    "half_line",
    "line",
    "point",
];

pub fn corpus() -> Vec<CorpusEntry> {
    NAMES.iter().map(|n| corpus_entry(n).expect("corpus name")).collect()
}

pub fn corpus_entry(name: &str) -> Option<CorpusEntry> {
    Some(match name {
        "hairy_graph" => hairy_graph(),
        "sin_inv_x" => sin_inv_x(),
        "set_y" => set_y(),
        "parabola_line" => parabola_line(),
        "cusp" => cusp(),
        "plane" => plane(),
        "circle" => circle(),
        "sphere" => sphere(),
        "cross" => cross(),
        "half_line" => half_line(),
        "line" => line(),
        "point" => point(),
        _ => return None,
    })
}

fn verdict(mode: Mode, expected: ExpectedOutcome, source: Source) -> Annotation {
    Annotation::global(Claim::Verdict { mode, expected }, source)
}

fn all_modes_c1(k: usize) -> Vec<Annotation> {
    [Mode::TwoCones, Mode::Density, Mode::Gluck]
        .into_iter()
        .map(|m| verdict(m, ExpectedOutcome::C1Manifold { k }, Source::Exact))
        .collect()
}

fn unit(i: usize, n: usize) -> Vec<f64> {
    (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
}

fn coord_graph(n: usize, coords: &[usize]) -> Preimage {
    Preimage::LeftInverse {
        matrix: coords.iter().map(|&c| unit(c, n)).collect(),
        offset: vec![0.0; n],
        gain: 1.0,
    }
}

fn chart_def(params: &[&str], lo: &[f64], hi: &[f64], map: &[&str]) -> ChartDef {
    ChartDef {
        params: params.iter().map(|s| s.to_string()).collect(),
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        map: map.iter().map(|s| s.to_string()).collect(),
        periodic: Vec::new(),
        graph_coords: None,
        inverse_lipschitz: None,
        jacobian: None,
    }
}

fn strings(v: &[&[&str]]) -> Vec<Vec<String>> {
    v.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
}

fn base_def(name: &str, n: usize, k: usize, kind: Kind) -> SetDefinition {
    SetDefinition {
        name: name.to_string(),
        ambient_dim: n,
        intrinsic_dim: Some(k),
        kind,
        scale: None,
        note: None,
        assumptions: None,
        charts: Vec::new(),
        implicit: None,
        points: Vec::new(),
        sequences: Vec::new(),
        parts: Vec::new(),
        special_points: Vec::new(),
    }
}

fn finish(mut def: SetDefinition, oracle: &SetOracle) -> SetDefinition {
    def.scale = Some(oracle.scale());
    def.assumptions = Some(oracle.assumptions());
    if !oracle.note().is_empty() {
        def.note = Some(oracle.note().to_string());
    }
    def.special_points = oracle.special_points().to_vec();
    def
}

/// `x -> (x, 0)` over `[lo, hi]` in R^2.
fn x_axis_chart(lo: f64, hi: f64) -> Chart {
    Chart::new(2, ParamBox::new(vec![lo], vec![hi]), Arc::new(|t, x| {
        x[0] = t[0];
        x[1] = 0.0;
    }))
    .with_jacobian(Arc::new(|_, j| {
        j[0] = 1.0;
        j[1] = 0.0;
    }))
    .with_preimage(coord_graph(2, &[0]))
}

fn hairy_preimage(c: &[f64], r: f64) -> Vec<ParamBox> {
    let zc = c[0].hypot(c[1]);
    let hc = c[2].hypot(c[3]);
    // |h| = s and |z| = s^2 on the graph.
    let s_lo = (hc - r).max(0.0).max((zc - r).max(0.0).sqrt());
    let s_hi = (hc + r).min((zc + r).sqrt()).min(1.0);
    if s_lo > s_hi {
        return Vec::new();
    }
    let zwin = angular_window(zc, c[1].atan2(c[0]), s_lo * s_lo, r);
    let hwin = angular_window(hc, c[3].atan2(c[2]), s_lo, r);
    let arcs = match hwin {
        None => intersect_arcs(zwin, None),
        Some((a, w)) => [0.0, PI]
            .iter()
            .flat_map(|shift| intersect_arcs(zwin, Some((a / 2.0 + shift, w / 2.0))))
            .collect(),
    };
    arcs.into_iter().map(|(a, b)| ParamBox::new(vec![s_lo, a], vec![s_hi, b])).collect()
}

/// The graph of `h(z) = z^2 / |z|^{3/2}` over the unit disk of C, in R^4.
///
/// Parametrized by `z = s^2 e^{i phi}`, so that `h = s e^{2 i phi}`; the map
/// is smooth in `(s, phi)` and the point `s = 0` is the origin.
fn hairy_graph() -> CorpusEntry {
    let chart = Chart::new(4, ParamBox::new(vec![0.0, 0.0], vec![1.0, TAU]), Arc::new(|t, x| {
        let (s, (sp, cp)) = (t[0], t[1].sin_cos());
        let (s2p, c2p) = (2.0 * t[1]).sin_cos();
        x[0] = s * s * cp;
        x[1] = s * s * sp;
        x[2] = s * c2p;
        x[3] = s * s2p;
    }))
    .with_periodic(vec![false, true])
    .with_jacobian(Arc::new(|t, j| {
        let (s, (sp, cp)) = (t[0], t[1].sin_cos());
        let (s2p, c2p) = (2.0 * t[1]).sin_cos();
        j[..4].copy_from_slice(&[2.0 * s * cp, 2.0 * s * sp, c2p, s2p]);
        j[4..].copy_from_slice(&[-s * s * sp, s * s * cp, -2.0 * s * s2p, 2.0 * s * c2p]);
    }))
    .with_preimage(Preimage::Custom(Arc::new(hairy_preimage)));
    let oracle = SetOracle::new("hairy_graph", 4, 2)
        .with_chart(chart)
        .with_special("origin", vec![0.0; 4])
        .with_note("graph over the closed unit disk |z| <= 1; h(0) = 0");
    let mut def = base_def("hairy_graph", 4, 2, Kind::Chart);
    let mut c = chart_def(
        &["s", "phi"],
        &[0.0, 0.0],
        &[1.0, TAU],
        &["s^2*cos(phi)", "s^2*sin(phi)", "s*cos(2*phi)", "s*sin(2*phi)"],
    );
    c.periodic = vec![false, true];
    c.jacobian = Some(strings(&[
        &["2*s*cos(phi)", "-s^2*sin(phi)"],
        &["2*s*sin(phi)", "s^2*cos(phi)"],
        &["cos(2*phi)", "-2*s*sin(2*phi)"],
        &["sin(2*phi)", "2*s*cos(2*phi)"],
    ]));
    def.charts.push(c);
    let e3 = unit(2, 4);
    let e4 = unit(3, 4);
    CorpusEntry {
        name: "hairy_graph".into(),
        description: "graph of h(z) = z^2/|z|^(3/2): tangent cone a continuous trivial bundle, yet not C1 at 0".into(),
        definition: finish(def, &oracle),
        ground_truth: vec![
            Annotation::at("origin", Claim::TangentSubspace { basis: vec![e3, e4], tol: 0.05 }, Source::Published),
            // Area of the graph over |z|^2 + |h|^2 <= r^2 is 2 pi r^2 (1 + O(r^2)).
            Annotation::at("origin", Claim::Density { value: 2.0, tol: 0.1 }, Source::Computed),
            // Secants from (z, h(z)) to (-z, h(-z)) = (-z, h(z)) are horizontal in z.
            verdict(
                Mode::TwoCones,
                ExpectedOutcome::NotC1 { witness: WitnessKind::ParatangentExcess },
                Source::Computed,
            ),
            verdict(
                Mode::Gluck,
                ExpectedOutcome::NotC1 { witness: WitnessKind::ProjectionCollision },
                Source::Published,
            ),
            verdict(
                Mode::Density,
                ExpectedOutcome::NotC1 { witness: WitnessKind::DensityAtLeast },
                Source::Computed,
            ),
        ],
        oracle,
    }
}

/// Closure of the graph of `sin(1/x)`, `|x| <= 1`, minus `(0, +-1)`.
fn sin_inv_x() -> CorpusEntry {
    let branch = |lo: f64, hi: f64| {
        Chart::new(2, ParamBox::new(vec![lo], vec![hi]), Arc::new(|t, x| {
            x[0] = t[0];
            x[1] = (1.0 / t[0]).sin();
        }))
        .with_jacobian(Arc::new(|t, j| {
            j[0] = 1.0;
            j[1] = -(1.0 / t[0]).cos() / (t[0] * t[0]);
        }))
        .with_preimage(coord_graph(2, &[0]))
    };
    let segment = Chart::new(2, ParamBox::new(vec![-1.0], vec![1.0]), Arc::new(|t, x| {
        x[0] = 0.0;
        x[1] = t[0];
    }))
    .with_jacobian(Arc::new(|_, j| {
        j[0] = 0.0;
        j[1] = 1.0;
    }))
    .with_preimage(coord_graph(2, &[1]));
    let oracle = SetOracle::new("sin_inv_x", 2, 1)
        .with_chart(branch(SIN_CUTOFF, 1.0))
        .with_chart(branch(-1.0, -SIN_CUTOFF))
        .with_chart(segment)
        .with_scale(1e-3)
        .with_special("origin", vec![0.0, 0.0])
        .with_special("crest", vec![2.0 / (5.0 * PI), 1.0])
        .with_assumptions(Assumptions { connected: true, locally_closed: true, definable: false })
        .with_note(format!(
            "oscillating branches kept for |x| >= 1/(50 pi) ~ {SIN_CUTOFF:.4e}; the limit segment {{0}} x [-1,1] \
             is included with its endpoints (a null set); ground truth trusted for radii <= 1e-4"
        ));
    let mut def = base_def("sin_inv_x", 2, 1, Kind::Chart);
    for (lo, hi) in [(SIN_CUTOFF, 1.0), (-1.0, -SIN_CUTOFF)] {
        let mut c = chart_def(&["x"], &[lo], &[hi], &["x", "sin(1/x)"]);
        c.graph_coords = Some(vec![0]);
        c.jacobian = Some(strings(&[&["1"], &["-cos(1/x)/x^2"]]));
        def.charts.push(c);
    }
    let mut seg = chart_def(&["t"], &[-1.0], &[1.0], &["0", "t"]);
    seg.graph_coords = Some(vec![1]);
    def.charts.push(seg);
    CorpusEntry {
        name: "sin_inv_x".into(),
        description: "closure of the sin(1/x) graph: tg = ptg everywhere but not a C1 manifold (not definable)".into(),
        definition: finish(def, &oracle),
        ground_truth: vec![verdict(
            Mode::TwoCones,
            ExpectedOutcome::CriterionPassesNotC1 { k: 1 },
            Source::Published,
        )],
        oracle,
    }
}

/// `{-1 - 1/n} u [-1, 1] u {1 + 1/n}` in R, truncated at `n = 10^6`.
fn set_y() -> CorpusEntry {
    let mut flat = Vec::with_capacity(2 * Y_TERMS);
    for n in 1..=Y_TERMS {
        let v = 1.0 + 1.0 / n as f64;
        flat.push(v);
        flat.push(-v);
    }
    let segment = Chart::new(1, ParamBox::new(vec![-1.0], vec![1.0]), Arc::new(|t, x| x[0] = t[0]))
        .with_jacobian(Arc::new(|_, j| j[0] = 1.0))
        .with_preimage(coord_graph(1, &[0]));
    let oracle = SetOracle::new("set_y", 1, 1)
        .with_piece(Piece::Finite(FinitePoints::from_flat(1, flat)))
        .with_chart(segment)
        .with_special("inside", vec![0.0])
        .with_special("plus_one", vec![1.0])
        .with_special("minus_one", vec![-1.0])
        .with_special("isolated", vec![1.5])
        .with_assumptions(Assumptions { connected: false, locally_closed: true, definable: false })
        .with_note("sequences +-(1 + 1/n) truncated at n = 10^6; points within 1e-6 of +-1 are missing");
    let mut def = base_def("set_y", 1, 1, Kind::Union);
    def.parts.push(PartDef {
        kind: Kind::Finite,
        charts: Vec::new(),
        implicit: None,
        points: Vec::new(),
        sequences: ["1 + 1/n", "-1 - 1/n"]
            .iter()
            .map(|c| SequenceDef { index: "n".into(), from: 1, to: Y_TERMS as i64, coords: vec![c.to_string()] })
            .collect(),
    });
    let mut seg = chart_def(&["t"], &[-1.0], &[1.0], &["t"]);
    seg.graph_coords = Some(vec![0]);
    def.parts.push(PartDef { kind: Kind::Chart, charts: vec![seg], implicit: None, points: Vec::new(), sequences: Vec::new() });
    CorpusEntry {
        name: "set_y".into(),
        description: "segment with two accumulating sequences: tg = ptg but [-1,1] is not a C1 manifold (not definable)".into(),
        definition: finish(def, &oracle),
        ground_truth: vec![verdict(
            Mode::TwoCones,
            ExpectedOutcome::CriterionPassesNotC1 { k: 1 },
            Source::Published,
        )],
        oracle,
    }
}

/// `{y = 0} u {x > 0, y = x^2}`.
fn parabola_line() -> CorpusEntry {
    let parabola = Chart::new(2, ParamBox::new(vec![0.0], vec![1.0]), Arc::new(|t, x| {
        x[0] = t[0];
        x[1] = t[0] * t[0];
    }))
    .with_jacobian(Arc::new(|t, j| {
        j[0] = 1.0;
        j[1] = 2.0 * t[0];
    }))
    .with_preimage(coord_graph(2, &[0]));
    let oracle = SetOracle::new("parabola_line", 2, 1)
        .with_chart(x_axis_chart(-1.0, 1.0))
        .with_chart(parabola)
        .with_special("origin", vec![0.0, 0.0])
        .with_note("line and parabola restricted to |x| <= 1");
    let mut def = base_def("parabola_line", 2, 1, Kind::Union);
    let mut l = chart_def(&["t"], &[-1.0], &[1.0], &["t", "0"]);
    l.graph_coords = Some(vec![0]);
    let mut p = chart_def(&["t"], &[0.0], &[1.0], &["t", "t^2"]);
    p.graph_coords = Some(vec![0]);
    for c in [l, p] {
        def.parts.push(PartDef { kind: Kind::Chart, charts: vec![c], implicit: None, points: Vec::new(), sequences: Vec::new() });
    }
    CorpusEntry {
        name: "parabola_line".into(),
        description: "line plus half parabola: continuous trivial tangent bundle, density 3/2 at 0, not C1".into(),
        definition: finish(def, &oracle),
        ground_truth: vec![
            Annotation::at("origin", Claim::TangentSubspace { basis: vec![unit(0, 2)], tol: 0.05 }, Source::Computed),
            Annotation::at("origin", Claim::Density { value: 1.5, tol: 0.1 }, Source::Published),
            Annotation::at(
                "origin",
                Claim::ParatangentExcess { direction: vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2], tol: 0.1 },
                Source::Computed,
            ),
            verdict(
                Mode::TwoCones,
                ExpectedOutcome::NotC1 { witness: WitnessKind::ParatangentExcess },
                Source::Computed,
            ),
            verdict(
                Mode::Density,
                ExpectedOutcome::NotC1 { witness: WitnessKind::DensityAtLeast },
                Source::Published,
            ),
        ],
        oracle,
    }
}

fn cusp_preimage(c: &[f64], r: f64) -> Vec<ParamBox> {
    let rho_c = c[0].hypot(c[1]);
    let rho_lo = (rho_c - r).max(0.0);
    let (a_lo, a_hi) = (rho_lo.sqrt(), (rho_c + r).sqrt());
    let arcs = intersect_arcs(angular_window(rho_c, c[1].atan2(c[0]), rho_lo, r), None);
    let mut out = Vec::new();
    for (zl, zh) in [(a_lo, a_hi), (-a_hi, -a_lo)] {
        let (zl, zh) = (zl.max(c[2] - r), zh.min(c[2] + r));
        if zl <= zh {
            out.extend(arcs.iter().map(|&(p, q)| ParamBox::new(vec![zl, p], vec![zh, q])));
        }
    }
    out
}

/// `{z^4 = x^2 + y^2}` in R^3, parametrized as a surface of revolution.
fn cusp() -> CorpusEntry {
    let chart = Chart::new(3, ParamBox::new(vec![-1.0, 0.0], vec![1.0, TAU]), Arc::new(|t, x| {
        let (z, (sp, cp)) = (t[0], t[1].sin_cos());
        x[0] = z * z * cp;
        x[1] = z * z * sp;
        x[2] = z;
    }))
    .with_periodic(vec![false, true])
    .with_jacobian(Arc::new(|t, j| {
        let (z, (sp, cp)) = (t[0], t[1].sin_cos());
        j[..3].copy_from_slice(&[2.0 * z * cp, 2.0 * z * sp, 1.0]);
        j[3..].copy_from_slice(&[-z * z * sp, z * z * cp, 0.0]);
    }))
    .with_preimage(Preimage::Custom(Arc::new(cusp_preimage)));
    let oracle = SetOracle::new("cusp", 3, 2)
        .with_chart(chart)
        .with_special("origin", vec![0.0; 3])
        .with_note("restricted to |z| <= 1");
    let mut def = base_def("cusp", 3, 2, Kind::Chart);
    let mut c = chart_def(&["z", "phi"], &[-1.0, 0.0], &[1.0, TAU], &["z^2*cos(phi)", "z^2*sin(phi)", "z"]);
    c.periodic = vec![false, true];
    c.jacobian = Some(strings(&[
        &["2*z*cos(phi)", "-z^2*sin(phi)"],
        &["2*z*sin(phi)", "z^2*cos(phi)"],
        &["1", "0"],
    ]));
    def.charts.push(c);
    CorpusEntry {
        name: "cusp".into(),
        description: "cusp z^4 = x^2 + y^2: density 0 at 0 while the lower density is infinite".into(),
        definition: finish(def, &oracle),
        ground_truth: vec![
            Annotation::at("origin", Claim::TangentSubspace { basis: vec![unit(2, 3)], tol: 0.05 }, Source::Computed),
            Annotation::at("origin", Claim::DensityVanishes { max: 0.2 }, Source::Published),
            Annotation::at("origin", Claim::LowerDensityInfinite, Source::Published),
        ],
        oracle,
    }
}

/// A tilted 2-plane in R^4 spanned by `(1,0,1,0)/sqrt2` and `(0,1,0,-1)/sqrt2`.
fn plane() -> CorpusEntry {
    let s = FRAC_1_SQRT_2;
    let a = vec![s, 0.0, s, 0.0];
    let b = vec![0.0, s, 0.0, -s];
    let chart = Chart::new(4, ParamBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]), Arc::new(move |t, x| {
        x[0] = s * t[0];
        x[1] = s * t[1];
        x[2] = s * t[0];
        x[3] = -s * t[1];
    }))
    .with_jacobian(Arc::new(move |_, j| j.copy_from_slice(&[s, 0.0, s, 0.0, 0.0, s, 0.0, -s])))
    .with_preimage(Preimage::LeftInverse { matrix: vec![a.clone(), b.clone()], offset: vec![0.0; 4], gain: 1.0 });
    let oracle = SetOracle::new("plane", 4, 2)
        .with_chart(chart)
        .with_special("origin", vec![0.0; 4])
        .with_note("square |u|, |v| <= 2 of the plane");
    let mut def = base_def("plane", 4, 2, Kind::Chart);
    let mut c = chart_def(&["u", "v"], &[-2.0, -2.0], &[2.0, 2.0], &["u/sqrt(2)", "v/sqrt(2)", "u/sqrt(2)", "-v/sqrt(2)"]);
    c.inverse_lipschitz = Some(1.0);
    def.charts.push(c);
    let mut truth = vec![
        Annotation::at("origin", Claim::TangentSubspace { basis: vec![a, b], tol: 0.05 }, Source::Exact),
        Annotation::at("origin", Claim::Density { value: 1.0, tol: 0.05 }, Source::Exact),
    ];
    truth.extend(all_modes_c1(2));
    CorpusEntry {
        name: "plane".into(),
        description: "2-plane in R^4 (smooth control)".into(),
        definition: finish(def, &oracle),
        ground_truth: truth,
        oracle,
    }
}

fn circle_preimage(c: &[f64], r: f64) -> Vec<ParamBox> {
    let rc = c[0].hypot(c[1]);
    if (rc - 1.0).abs() > r {
        return Vec::new();
    }
    intersect_arcs(angular_window(rc, c[1].atan2(c[0]), 1.0, r), None)
        .into_iter()
        .map(|(a, b)| ParamBox::new(vec![a], vec![b]))
        .collect()
}

fn circle() -> CorpusEntry {
    let chart = Chart::new(2, ParamBox::new(vec![0.0], vec![TAU]), Arc::new(|t, x| {
        x[0] = t[0].cos();
        x[1] = t[0].sin();
    }))
    .with_periodic(vec![true])
    .with_jacobian(Arc::new(|t, j| {
        j[0] = -t[0].sin();
        j[1] = t[0].cos();
    }))
    .with_preimage(Preimage::Custom(Arc::new(circle_preimage)));
    let oracle = SetOracle::new("circle", 2, 1).with_chart(chart).with_special("east", vec![1.0, 0.0]);
    let mut def = base_def("circle", 2, 1, Kind::Chart);
    let mut c = chart_def(&["t"], &[0.0], &[TAU], &["cos(t)", "sin(t)"]);
    c.periodic = vec![true];
    c.inverse_lipschitz = Some(FRAC_PI_2);
    c.jacobian = Some(strings(&[&["-sin(t)"], &["cos(t)"]]));
    def.charts.push(c);
    let mut truth = vec![
        Annotation::at("east", Claim::TangentSubspace { basis: vec![unit(1, 2)], tol: 0.05 }, Source::Exact),
        Annotation::at("east", Claim::Density { value: 1.0, tol: 0.05 }, Source::Exact),
    ];
    truth.extend(all_modes_c1(1));
    CorpusEntry {
        name: "circle".into(),
        description: "unit circle (smooth control)".into(),
        definition: finish(def, &oracle),
        ground_truth: truth,
        oracle,
    }
}

const FACES: [(usize, f64); 6] = [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)];

fn other_axes(a: usize) -> (usize, usize) {
    match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Parameter box of face `(a, sign)` covering the part of the unit sphere
/// within `r` of `c`, via the radial projection of `c`.
fn sphere_face_preimage(a: usize, sign: f64, c: &[f64], r: f64) -> Vec<ParamBox> {
    let full = vec![ParamBox::new(vec![-1.0, -1.0], vec![1.0, 1.0])];
    let nc = norm(c);
    if nc == 0.0 {
        return full;
    }
    let rr = r + (nc - 1.0).abs();
    if rr >= 2.0 {
        return full;
    }
    let ch: Vec<f64> = c.iter().map(|v| v / nc).collect();
    let zlo = (sign * ch[a] - rr).max(1.0 / 3f64.sqrt());
    let zhi = (sign * ch[a] + rr).min(1.0);
    if zlo > zhi {
        return Vec::new();
    }
    let (b, d) = other_axes(a);
    let range = |p: f64| {
        let (pl, ph) = (p - rr, p + rr);
        let cands = [pl / zlo, pl / zhi, ph / zlo, ph / zhi];
        let lo = cands.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (ul, uh) = range(ch[b]);
    let (vl, vh) = range(ch[d]);
    vec![ParamBox::new(vec![ul, vl], vec![uh, vh])]
}

fn sphere() -> CorpusEntry {
    let mut oracle = SetOracle::new("sphere", 3, 2);
    let mut def = base_def("sphere", 3, 2, Kind::Chart);
    for (a, sign) in FACES {
        let (b, d) = other_axes(a);
        let chart = Chart::new(3, ParamBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]), Arc::new(move |t, x| {
            let inv = 1.0 / (1.0 + t[0] * t[0] + t[1] * t[1]).sqrt();
            x[a] = sign * inv;
            x[b] = t[0] * inv;
            x[d] = t[1] * inv;
        }))
        .with_preimage(Preimage::Custom(Arc::new(move |c, r| sphere_face_preimage(a, sign, c, r))));
        oracle = oracle.with_chart(chart);
        let mut map = ["", "", ""].map(String::from);
        map[a] = format!("{sign}/sqrt(1+u^2+v^2)");
        map[b] = "u/sqrt(1+u^2+v^2)".into();
        map[d] = "v/sqrt(1+u^2+v^2)".into();
        let refs: Vec<&str> = map.iter().map(String::as_str).collect();
        let mut c = chart_def(&["u", "v"], &[-1.0, -1.0], &[1.0, 1.0], &refs);
        c.inverse_lipschitz = Some(6.0);
        def.charts.push(c);
    }
    let oracle = oracle
        .with_special("north", vec![0.0, 0.0, 1.0])
        .with_probes_per_chart(16)
        .with_note("six gnomonic cube-face charts; faces meet along null sets");
    let mut truth = vec![
        Annotation::at("north", Claim::TangentSubspace { basis: vec![unit(0, 3), unit(1, 3)], tol: 0.05 }, Source::Exact),
        Annotation::at("north", Claim::Density { value: 1.0, tol: 0.05 }, Source::Exact),
    ];
    truth.extend(all_modes_c1(2));
    CorpusEntry {
        name: "sphere".into(),
        description: "unit sphere in R^3 (smooth control)".into(),
        definition: finish(def, &oracle),
        ground_truth: truth,
        oracle,
    }
}

fn cross() -> CorpusEntry {
    let set = ImplicitSet::new(2, 1, Arc::new(|x| x[0] * x[1])).with_gradient(Arc::new(|x, g| {
        g[0] = x[1];
        g[1] = x[0];
    }));
    let oracle = SetOracle::new("cross", 2, 1)
        .with_piece(Piece::Implicit(set))
        .with_special("origin", vec![0.0, 0.0])
        .with_note("measure by box counting (cell side r/64), a biased estimator");
    let mut def = base_def("cross", 2, 1, Kind::Implicit);
    def.implicit = Some(ImplicitDef { vars: vec!["x".into(), "y".into()], expr: "x*y".into() });
    CorpusEntry {
        name: "cross".into(),
        description: "coordinate cross {xy = 0}: tangent cone at 0 is not a subspace".into(),
        definition: finish(def, &oracle),
        ground_truth: vec![
            Annotation::at("origin", Claim::Density { value: 2.0, tol: 0.1 }, Source::Exact),
            // Secants from (t, 0) to (0, t) point along (1, -1).
            Annotation::at(
                "origin",
                Claim::ParatangentExcess { direction: vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2], tol: 0.1 },
                Source::Exact,
            ),
            verdict(Mode::TwoCones, ExpectedOutcome::NotC1 { witness: WitnessKind::ParatangentExcess }, Source::Exact),
            verdict(Mode::Gluck, ExpectedOutcome::Inconclusive, Source::Exact),
            verdict(Mode::Density, ExpectedOutcome::Inconclusive, Source::Exact),
        ],
        oracle,
    }
}

fn half_line() -> CorpusEntry {
    let chart = Chart::new(1, ParamBox::new(vec![0.0], vec![2.0]), Arc::new(|t, x| x[0] = t[0]))
        .with_jacobian(Arc::new(|_, j| j[0] = 1.0))
        .with_preimage(coord_graph(1, &[0]));
    let oracle = SetOracle::new("half_line", 1, 1)
        .with_chart(chart)
        .with_special("endpoint", vec![0.0])
        .with_note("[0, 2] standing in for [0, inf)");
    let mut def = base_def("half_line", 1, 1, Kind::Chart);
    let mut c = chart_def(&["t"], &[0.0], &[2.0], &["t"]);
    c.graph_coords = Some(vec![0]);
    def.charts.push(c);
    CorpusEntry {
        name: "half_line".into(),
        description: "closed half-line: tangent cone at the endpoint is a ray".into(),
        definition: finish(def, &oracle),
        ground_truth: vec![
            Annotation::at("endpoint", Claim::Density { value: 0.5, tol: 0.05 }, Source::Exact),
            // Secants between points of (0, r) give -1, which the ray tg = [0, inf) lacks.
            Annotation::at("endpoint", Claim::ParatangentExcess { direction: vec![-1.0], tol: 0.1 }, Source::Exact),
            verdict(Mode::TwoCones, ExpectedOutcome::NotC1 { witness: WitnessKind::ParatangentExcess }, Source::Exact),
            verdict(Mode::Density, ExpectedOutcome::Inconclusive, Source::Exact),
        ],
        oracle,
    }
}

fn line() -> CorpusEntry {
    let oracle = SetOracle::new("line", 2, 1)
        .with_chart(x_axis_chart(-2.0, 2.0))
        .with_special("origin", vec![0.0, 0.0])
        .with_note("x-axis restricted to |x| <= 2");
    let mut def = base_def("line", 2, 1, Kind::Chart);
    let mut c = chart_def(&["t"], &[-2.0], &[2.0], &["t", "0"]);
    c.graph_coords = Some(vec![0]);
    def.charts.push(c);
    let mut truth = vec![
        Annotation::at("origin", Claim::TangentSubspace { basis: vec![unit(0, 2)], tol: 0.05 }, Source::Exact),
        Annotation::at("origin", Claim::Density { value: 1.0, tol: 0.05 }, Source::Exact),
    ];
    truth.extend(all_modes_c1(1));
    CorpusEntry {
        name: "line".into(),
        description: "x-axis in R^2 (smooth control)".into(),
        definition: finish(def, &oracle),
        ground_truth: truth,
        oracle,
    }
}

fn point() -> CorpusEntry {
    let oracle = SetOracle::new("point", 2, 0)
        .with_piece(Piece::Finite(FinitePoints::new(2, vec![vec![0.0, 0.0]])))
        .with_special("origin", vec![0.0, 0.0]);
    let mut def = base_def("point", 2, 0, Kind::Finite);
    def.points = vec![vec![0.0, 0.0]];
    CorpusEntry {
        name: "point".into(),
        description: "a single point: empty cones".into(),
        definition: finish(def, &oracle),
        ground_truth: vec![Annotation::at("origin", Claim::TangentSubspace { basis: vec![], tol: 0.0 }, Source::Exact)],
        oracle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecmath::dist;

    #[test]
    fn every_name_resolves() {
        for n in NAMES {
            let e = corpus_entry(n).unwrap();
            assert_eq!(e.name, n);
            assert_eq!(e.oracle.name(), n);
            assert!(!e.ground_truth.is_empty());
        }
        assert!(corpus_entry("nope").is_none());
    }

    #[test]
    fn hairy_samples_match_h() {
        let e = hairy_graph();
        let pts = e.oracle.sample_in_ball(&[0.0; 4], 1e-2, 200, 3).unwrap();
        assert_eq!(pts.len(), 200);
        for p in &pts {
            let az = p[0].hypot(p[1]);
            assert!(az <= 1e-2 + 1e-15);
            // h(z) = z^2 / |z|^{3/2}, evaluated directly in complex form.
            let (re, im) = (p[0] * p[0] - p[1] * p[1], 2.0 * p[0] * p[1]);
            let k = az.powf(-1.5);
            assert!((re * k - p[2]).abs() < 1e-9 && (im * k - p[3]).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn hairy_preimage_is_conservative() {
        let e = hairy_graph();
        let chart = e.oracle.charts().next().unwrap();
        let c = [0.02, -0.01, 0.1, 0.12];
        let r = 0.03;
        let boxes = chart.preimage_boxes(&c, r);
        let inside = |t: &[f64]| {
            boxes.iter().any(|b| {
                (0..2).all(|i| {
                    if i == 1 {
                        let w = b.hi[1] - b.lo[1];
                        let mut d = t[1] - b.lo[1];
                        d -= TAU * (d / TAU).floor();
                        d <= w + 1e-12
                    } else {
                        t[i] >= b.lo[i] - 1e-12 && t[i] <= b.hi[i] + 1e-12
                    }
                })
            })
        };
        for i in 0..400 {
            for j in 0..400 {
                let t = [i as f64 / 399.0, j as f64 * TAU / 400.0];
                if dist(&chart.point(&t), &c) <= r {
                    assert!(inside(&t), "{t:?} missed");
                }
            }
        }
    }

    #[test]
    fn sphere_and_cusp_samples_on_set() {
        let s = sphere();
        for p in s.oracle.sample_in_ball(&[0.6, 0.0, 0.8], 0.3, 100, 1).unwrap() {
            assert!((norm(&p) - 1.0).abs() < 1e-12);
        }
        let c = cusp();
        let pts = c.oracle.sample_in_ball(&[0.0, 0.0, 0.0], 0.05, 100, 1).unwrap();
        assert_eq!(pts.len(), 100);
        for p in pts {
            assert!((p[2].powi(4) - p[0] * p[0] - p[1] * p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn definitions_load_back() {
        for n in ["parabola_line", "cross", "point", "circle", "plane", "line", "half_line"] {
            let e = corpus_entry(n).unwrap();
            let text = e.definition.to_toml().unwrap();
            let loaded = SetDefinition::from_toml(&text).unwrap().build().unwrap();
            assert_eq!(loaded.ambient_dim(), e.oracle.ambient_dim());
            let c = e.oracle.special_points()[0].point.clone();
            for p in loaded.sample_in_ball(&c, 0.2, 30, 1).unwrap() {
                assert!(e.oracle.membership(&p, 1e-9), "{n}: {p:?}");
            }
        }
    }
}
