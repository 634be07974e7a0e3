//! Tabular parameter sweeps and the figure presets built from them.
//!
//! A sweep varies one or two parameters on a linear grid, evaluates one
//! [`Quantity`] at every point in parallel, and returns the rows in grid
//! order. Figure presets combine several sweeps on a shared axis.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{counting_fi_matrix_with, F21Series};
use crate::demux::{hg_sensitivity_with, BetaExponent, ModeCutoff};
use crate::equal_temp::qfi_equal;
use crate::error::{Error, Result};
use crate::estimation::{individual_bound, prior_gain, ratio_mu, simultaneous_bound, MuConvention};
use crate::gaussian_fisher::{qfi_matrix, FisherMatrix, Param};
use crate::model::{DiffractionGeometry, GammaConvention, SourcePair};

/// Tail mass tolerated when truncating photon-count sums.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    QfiEqual,
    QfiMatrix,
    Mu,
    PriorGain,
    HgSensitivity,
    CountingFi,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::QfiEqual,
        Quantity::QfiMatrix,
        Quantity::Mu,
        Quantity::PriorGain,
        Quantity::HgSensitivity,
        Quantity::CountingFi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::QfiEqual => "qfi-equal",
            Quantity::QfiMatrix => "qfi-matrix",
            Quantity::Mu => "mu",
            Quantity::PriorGain => "prior-gain",
            Quantity::HgSensitivity => "hg-sensitivity",
            Quantity::CountingFi => "counting-fi",
        }
    }

    /// Output columns, excluding the swept parameters.
    pub fn columns(self) -> Vec<Column> {
        let c = Column::new;
        match self {
            Quantity::QfiEqual => vec![
                c("qfi", FISHER),
                c("qfi_low_t", FISHER),
                c("qfi_high_t", FISHER),
            ],
            Quantity::QfiMatrix => vec![c("h11", FISHER), c("h22", FISHER), c("h12", FISHER)],
            Quantity::Mu => vec![
                c("mu", RATIO),
                c("inv_mu", RATIO),
                c("sim_bound", VARIANCE),
                c("ind_bound", VARIANCE),
            ],
            Quantity::PriorGain => vec![c("f_prior", FISHER), c("two_h11", FISHER), c("gain", RATIO)],
            Quantity::HgSensitivity => vec![
                c("m_t1", FISHER),
                c("m_t2", FISHER),
                c("m_over_h11", RATIO),
                c("m_over_h22", RATIO),
            ],
            Quantity::CountingFi => vec![
                c("fc11", FISHER),
                c("fc22", FISHER),
                c("fc12", FISHER),
                c("inv_sim_bound", FISHER),
            ],
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown quantity {s:?}")))
    }
}

const FISHER: &str = "1/T^2";
const VARIANCE: &str = "T^2";
const RATIO: &str = "1";

/// A swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    S,
    /// Both temperatures together.
    T,
    T1,
    T2,
    Omega,
    Eta,
    /// Source separation, with the PSF width taken from the fixed parameters.
    D,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::S => "s",
            SweepParam::T => "t",
            SweepParam::T1 => "t1",
            SweepParam::T2 => "t2",
            SweepParam::Omega => "omega",
            SweepParam::Eta => "eta",
            SweepParam::D => "d",
        }
    }

    fn unit(self) -> &'static str {
        match self {
            SweepParam::S | SweepParam::Eta => RATIO,
            SweepParam::T | SweepParam::T1 | SweepParam::T2 | SweepParam::Omega => "T",
            SweepParam::D => "varpi",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepParam::S,
            SweepParam::T,
            SweepParam::T1,
            SweepParam::T2,
            SweepParam::Omega,
            SweepParam::Eta,
            SweepParam::D,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::Usage(format!("unknown sweep parameter {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: SweepParam,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(param: SweepParam, start: f64, stop: f64, steps: usize) -> Self {
        Self {
            param,
            start,
            stop,
            steps,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / last
                }
            })
            .collect()
    }
}

/// Parameters held constant during a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fixed {
    pub t1: f64,
    pub t2: f64,
    pub omega: f64,
    pub eta: f64,
    /// Overlap; mutually exclusive with `d`.
    pub s: Option<f64>,
    /// Separation; mutually exclusive with `s`.
    pub d: Option<f64>,
    pub varpi: f64,
}

/// `s` and `d` agreeing to this absolute tolerance are accepted together.
pub const GEOMETRY_CONSISTENCY_TOL: f64 = 1e-9;

impl Fixed {
    /// The fixed geometry, if any. Giving both `s` and `d` is allowed only
    /// when `s = exp(-d²/2ϖ²)` holds.
    pub fn geometry(&self) -> Result<Option<DiffractionGeometry>> {
        match (self.s, self.d) {
            (None, None) => Ok(None),
            (Some(s), None) => DiffractionGeometry::overlap(s).map(Some),
            (None, Some(d)) => DiffractionGeometry::gaussian_psf(d, self.varpi).map(Some),
            (Some(s), Some(d)) => {
                let implied = crate::model::gaussian_overlap(d, self.varpi)?;
                if (implied - s).abs() > GEOMETRY_CONSISTENCY_TOL {
                    return Err(Error::Usage(format!(
                        "s = {s} is inconsistent with d = {d}, varpi = {} (which give s = {implied})",
                        self.varpi
                    )));
                }
                DiffractionGeometry::gaussian_psf(d, self.varpi).map(Some)
            }
        }
    }
}

impl Default for Fixed {
    fn default() -> Self {
        Self {
            t1: 1.0,
            t2: 1.0,
            omega: 1.0,
            eta: 0.5,
            s: None,
            d: None,
            varpi: 1.0,
        }
    }
}

/// Convention switches; defaults are the physically consistent choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Conventions {
    pub mu: MuConvention,
    pub beta_exponent: BetaExponent,
    pub f21_series: F21Series,
    pub gamma: GammaConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Output {
    pub path: String,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
}

fn default_format() -> OutputFormat {
    OutputFormat::Csv
}

fn default_tail_tol() -> f64 {
    DEFAULT_TAIL_TOL
}

fn default_nu() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub quantity: Quantity,
    pub axis: Axis,
    /// Optional second axis; rows run over the Cartesian product, `axis` outermost.
    #[serde(default)]
    pub axis2: Option<Axis>,
    #[serde(default)]
    pub fixed: Fixed,
    #[serde(default)]
    pub conventions: Conventions,
    /// Highest HG mode index counted; absent means the full basis.
    #[serde(default)]
    pub hg_modes: Option<usize>,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default)]
    pub output: Option<Output>,
}

impl SweepSpec {
    pub fn new(quantity: Quantity, axis: Axis, fixed: Fixed) -> Self {
        Self {
            quantity,
            axis,
            axis2: None,
            fixed,
            conventions: Conventions::default(),
            hg_modes: None,
            tail_tol: DEFAULT_TAIL_TOL,
            nu: 1.0,
            output: None,
        }
    }

    fn axes(&self) -> Vec<Axis> {
        std::iter::once(self.axis).chain(self.axis2).collect()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        let first = self.axis.values();
        match self.axis2 {
            None => first.into_iter().map(|x| vec![x]).collect(),
            Some(a2) => {
                let second = a2.values();
                first
                    .iter()
                    .flat_map(|&x| second.iter().map(move |&y| vec![x, y]))
                    .collect()
            }
        }
    }

    /// Rejects malformed specs before any evaluation.
    pub fn validate(&self) -> Result<()> {
        let usage = |msg: String| Err(Error::Usage(msg));
        for a in self.axes() {
            if a.steps < 2 {
                return usage(format!("axis {} needs at least 2 steps, got {}", a.param.name(), a.steps));
            }
            if !(a.start.is_finite() && a.stop.is_finite()) {
                return usage(format!("axis {} has a non-finite endpoint", a.param.name()));
            }
        }
        if let Some(a2) = self.axis2 {
            if a2.param == self.axis.param {
                return usage(format!("both axes sweep {}", a2.param.name()));
            }
        }
        let swept: Vec<SweepParam> = self.axes().iter().map(|a| a.param).collect();
        let sweeps_geometry = swept.iter().any(|p| matches!(p, SweepParam::S | SweepParam::D));
        if swept.contains(&SweepParam::S) && swept.contains(&SweepParam::D) {
            return usage("cannot sweep both s and d".into());
        }
        self.fixed.geometry().map_err(|e| Error::Usage(e.to_string()))?;
        if (swept.contains(&SweepParam::S) && self.fixed.d.is_some())
            || (swept.contains(&SweepParam::D) && self.fixed.s.is_some())
        {
            return usage("a fixed s or d conflicts with the swept geometry parameter".into());
        }
        if !sweeps_geometry && self.fixed.s.is_none() && self.fixed.d.is_none() {
            return usage("the geometry is unset: give s or d, or sweep one of them".into());
        }
        if swept.contains(&SweepParam::T) && swept.iter().any(|p| matches!(p, SweepParam::T1 | SweepParam::T2)) {
            return usage("cannot sweep t together with t1 or t2".into());
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return usage(format!("tail_tol must lie in (0, 1), got {}", self.tail_tol));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return usage(format!("nu must be positive, got {}", self.nu));
        }
        for point in self.points() {
            let (pair, _) = self
                .point_inputs(&point)
                .map_err(|e| Error::Usage(format!("{} is invalid: {e}", self.describe(&point))))?;
            if matches!(self.quantity, Quantity::QfiEqual | Quantity::PriorGain) && pair.t1 != pair.t2 {
                return usage(format!(
                    "{} needs t1 = t2, got t1 = {}, t2 = {} at {}",
                    self.quantity,
                    pair.t1,
                    pair.t2,
                    self.describe(&point)
                ));
            }
        }
        Ok(())
    }

    fn describe(&self, point: &[f64]) -> String {
        self.axes()
            .iter()
            .zip(point)
            .map(|(a, x)| format!("{} = {x}", a.param.name()))
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn point_inputs(&self, point: &[f64]) -> Result<(SourcePair, DiffractionGeometry)> {
        let mut f = self.fixed;
        let mut s = f.s;
        let mut d = f.d;
        for (a, &x) in self.axes().iter().zip(point) {
            match a.param {
                SweepParam::S => s = Some(x),
                SweepParam::D => d = Some(x),
                SweepParam::T => {
                    f.t1 = x;
                    f.t2 = x;
                }
                SweepParam::T1 => f.t1 = x,
                SweepParam::T2 => f.t2 = x,
                SweepParam::Omega => f.omega = x,
                SweepParam::Eta => f.eta = x,
            }
        }
        let pair = SourcePair::with_convention(f.t1, f.t2, f.omega, f.eta, self.conventions.gamma)?;
        let geom = match (s, d) {
            (Some(s), _) => DiffractionGeometry::overlap(s)?,
            (None, Some(d)) => DiffractionGeometry::gaussian_psf(d, f.varpi)?,
            (None, None) => return Err(Error::Usage("geometry unset".into())),
        };
        Ok((pair, geom))
    }

    fn cutoff(&self) -> ModeCutoff {
        self.hg_modes.map_or(ModeCutoff::Full, ModeCutoff::Finite)
    }
}

/// Evaluates one quantity at one point.
pub fn evaluate(
    quantity: Quantity,
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    conventions: &Conventions,
    cutoff: ModeCutoff,
    tail_tol: f64,
    nu: f64,
) -> Result<Vec<f64>> {
    Ok(match quantity {
        Quantity::QfiEqual => {
            let r = qfi_equal(pair.t1, pair.omega, pair.eta, geom.s())?;
            vec![r.qfi, r.qfi_low_t, r.qfi_high_t]
        }
        Quantity::QfiMatrix => {
            let h = qfi_matrix(pair, geom)?.matrix;
            vec![h.h11, h.h22, h.h12]
        }
        Quantity::Mu => {
            let h = qfi_matrix(pair, geom)?.matrix;
            let mu = ratio_mu(&h, conventions.mu);
            vec![mu, 1.0 / mu, simultaneous_bound(&h, nu), individual_bound(&h, nu)]
        }
        Quantity::PriorGain => {
            let g = prior_gain(pair.t1, pair.omega, pair.eta, geom.s())?;
            vec![g.f_prior, g.two_h11, g.gain]
        }
        Quantity::HgSensitivity => {
            let h = qfi_matrix(pair, geom)?.matrix;
            let m1 = hg_sensitivity_with(pair, geom, cutoff, Param::T1, conventions.beta_exponent)?;
            let m2 = hg_sensitivity_with(pair, geom, cutoff, Param::T2, conventions.beta_exponent)?;
            vec![m1, m2, m1 / h.h11, m2 / h.h22]
        }
        Quantity::CountingFi => {
            let f = counting_fi_matrix_with(pair, geom, tail_tol, conventions.f21_series)?;
            vec![f.h11, f.h22, f.h12, inverse_sim(&f, nu)]
        }
    })
}

fn inverse_sim(f: &FisherMatrix, nu: f64) -> f64 {
    1.0 / simultaneous_bound(f, nu)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Self {
            name: name.to_owned(),
            unit: unit.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

/// Twelve significant digits in scientific notation; `inf`/`-inf`/`nan` spelled out.
pub fn format_value(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self
            .columns
            .iter()
            .map(|c| format!("{} [{}]", c.name, c.unit))
            .collect::<Vec<_>>()
            .join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|&x| format_value(x)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    /// Rows as JSON objects keyed by column name; non-finite values become strings.
    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| {
                self.columns
                    .iter()
                    .zip(row)
                    .map(|(c, &x)| {
                        let v = serde_json::Number::from_f64(x)
                            .map_or_else(|| serde_json::Value::String(format_value(x)), serde_json::Value::Number);
                        (c.name.clone(), v)
                    })
                    .collect()
            })
            .collect();
        let mut out = serde_json::to_string_pretty(&rows).expect("maps of numbers serialize");
        out.push('\n');
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Runs the sweep; points are evaluated in parallel and returned in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Table> {
    spec.validate()?;
    let cutoff = spec.cutoff();
    let points = spec.points();
    let rows: Vec<Result<Vec<f64>>> = points
        .par_iter()
        .map(|point| {
            let (pair, geom) = spec.point_inputs(point)?;
            let values = evaluate(
                spec.quantity,
                &pair,
                &geom,
                &spec.conventions,
                cutoff,
                spec.tail_tol,
                spec.nu,
            )
            .map_err(|e| Error::Numerical(format!("{} at {}: {e}", spec.quantity, spec.describe(point))))?;
            Ok(point.iter().copied().chain(values).collect())
        })
        .collect();
    let mut columns: Vec<Column> = spec
        .axes()
        .iter()
        .map(|a| Column::new(a.param.name(), a.param.unit()))
        .collect();
    columns.extend(spec.quantity.columns());
    Ok(Table {
        columns,
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// Provenance record written next to every table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: &'static str,
    pub sweeps: Vec<LabeledSweep>,
    /// Parameters chosen by this tool where the figure leaves them open.
    pub artifact_defaults: Vec<String>,
    pub columns: Vec<Column>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledSweep {
    pub label: String,
    pub spec: SweepSpec,
}

pub fn sweep_metadata(spec: &SweepSpec, table: &Table) -> Metadata {
    Metadata {
        command: "sweep".into(),
        version: env!("CARGO_PKG_VERSION"),
        sweeps: vec![LabeledSweep {
            label: String::new(),
            spec: spec.clone(),
        }],
        artifact_defaults: Vec::new(),
        columns: table.columns.clone(),
        rows: table.rows.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl Figure {
    pub const ALL: [Figure; 7] = [
        Figure::Fig2,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig6,
        Figure::Fig7,
        Figure::Fig8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown figure {s:?}, expected fig2..fig8")))
    }
}

/// Knobs shared by all figure presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureOptions {
    /// Grid points along `s` (per axis for the contour plot).
    pub steps: usize,
    /// Temperature for the single-temperature figures.
    pub temperature: f64,
    pub conventions: Conventions,
    pub hg_modes: Option<usize>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            steps: 101,
            temperature: 1.0,
            conventions: Conventions::default(),
            hg_modes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub table: Table,
    pub metadata: Metadata,
}

struct Series {
    label: String,
    spec: SweepSpec,
    /// Columns kept from the sweep, renamed `<name><suffix>`.
    keep: Vec<&'static str>,
    suffix: String,
}

fn s_axis(steps: usize) -> Axis {
    Axis::new(SweepParam::S, 0.0, 1.0, steps)
}

fn fixed(t1: f64, t2: f64, omega: f64, eta: f64) -> Fixed {
    Fixed {
        t1,
        t2,
        omega,
        eta,
        ..Fixed::default()
    }
}

fn spec_with(quantity: Quantity, axis: Axis, f: Fixed, opts: &FigureOptions) -> SweepSpec {
    let mut spec = SweepSpec::new(quantity, axis, f);
    spec.conventions = opts.conventions;
    spec.hg_modes = opts.hg_modes;
    spec
}

/// Evaluates the sweeps of a figure and joins them on their shared axes.
fn assemble(figure: Figure, series: Vec<Series>, artifact_defaults: Vec<String>) -> Result<FigureData> {
    let mut table: Option<Table> = None;
    let mut sweeps = Vec::new();
    for s in series {
        let t = run_sweep(&s.spec)?;
        let n_axes = 1 + usize::from(s.spec.axis2.is_some());
        let kept: Vec<usize> = s
            .keep
            .iter()
            .map(|name| t.columns.iter().position(|c| c.name == *name).expect("known column"))
            .collect();
        let acc = table.get_or_insert_with(|| Table {
            columns: t.columns[..n_axes].to_vec(),
            rows: t.rows.iter().map(|r| r[..n_axes].to_vec()).collect(),
        });
        for &k in &kept {
            let c = &t.columns[k];
            acc.columns.push(Column::new(&format!("{}{}", c.name, s.suffix), &c.unit));
        }
        for (row, src) in acc.rows.iter_mut().zip(&t.rows) {
            row.extend(kept.iter().map(|&k| src[k]));
        }
        sweeps.push(LabeledSweep {
            label: s.label,
            spec: s.spec,
        });
    }
    let table = table.expect("every figure has at least one series");
    let metadata = Metadata {
        command: format!("figure {}", figure.name()),
        version: env!("CARGO_PKG_VERSION"),
        sweeps,
        artifact_defaults,
        columns: table.columns.clone(),
        rows: table.rows.len(),
    };
    Ok(FigureData { table, metadata })
}

fn eta_suffix(eta: f64) -> String {
    format!("_eta_{eta}")
}

/// `(T₁, T₂)` pairs for the photon-counting figure.
pub const FIG8_PAIRS: [(f64, f64); 3] = [(1.0, 1.1), (0.8, 1.2), (0.5, 1.5)];

/// Attenuation values shown in the multi-curve figures.
pub const FIG5_ETAS: [f64; 3] = [0.1, 0.5, 0.9];
pub const FIG7_ETAS: [f64; 3] = [0.1, 0.5, 1.0];

pub fn figure(fig: Figure, opts: &FigureOptions) -> Result<FigureData> {
    if opts.steps < 2 {
        return Err(Error::Usage(format!("steps must be at least 2, got {}", opts.steps)));
    }
    let t = opts.temperature;
    let axis = s_axis(opts.steps);
    match fig {
        Figure::Fig2 => assemble(
            fig,
            vec![Series {
                label: "F(T)".into(),
                spec: spec_with(Quantity::QfiEqual, axis, fixed(t, t, 1.0, 0.5), opts),
                keep: vec!["qfi", "qfi_low_t", "qfi_high_t"],
                suffix: String::new(),
            }],
            vec![format!("t = {t}")],
        ),
        Figure::Fig3 => assemble(
            fig,
            vec![Series {
                label: "F(T1) versus 2 H11(T2 -> T1)".into(),
                spec: spec_with(Quantity::PriorGain, axis, fixed(t, t, 1.0, 0.5), opts),
                keep: vec!["f_prior", "two_h11", "gain"],
                suffix: String::new(),
            }],
            vec![format!("t1 = {t}")],
        ),
        Figure::Fig4 => {
            let n = opts.steps.min(60);
            let mut series = Vec::new();
            for (conv, suffix) in [(MuConvention::ResourceConsistent, ""), (MuConvention::Unsplit, "_unsplit")] {
                let mut spec = spec_with(
                    Quantity::Mu,
                    Axis::new(SweepParam::T1, 1.0, 20.0, n),
                    Fixed {
                        s: Some(0.5),
                        ..fixed(1.0, 1.0, 10.0, 0.5)
                    },
                    opts,
                );
                spec.axis2 = Some(Axis::new(SweepParam::T2, 1.0, 20.0, n));
                spec.conventions.mu = conv;
                series.push(Series {
                    label: format!("mu ({conv:?})"),
                    spec,
                    keep: vec!["mu"],
                    suffix: suffix.into(),
                });
            }
            assemble(fig, series, vec!["t1, t2 grid over [1, 20]".into()])
        }
        Figure::Fig5 => {
            let mut series = Vec::new();
            for (conv, tag) in [(MuConvention::ResourceConsistent, ""), (MuConvention::Unsplit, "_unsplit")] {
                for eta in FIG5_ETAS {
                    let mut spec = spec_with(Quantity::Mu, axis, fixed(8.0, 10.0, 10.0, eta), opts);
                    spec.conventions.mu = conv;
                    series.push(Series {
                        label: format!("1/mu ({conv:?}, eta = {eta})"),
                        spec,
                        keep: vec!["inv_mu"],
                        suffix: format!("{tag}{}", eta_suffix(eta)),
                    });
                }
            }
            assemble(fig, series, vec![format!("eta in {FIG5_ETAS:?}")])
        }
        Figure::Fig6 => {
            let series = FIG5_ETAS
                .iter()
                .map(|&eta| Series {
                    label: format!("individual bound (eta = {eta})"),
                    spec: spec_with(Quantity::Mu, axis, fixed(8.0, 10.0, 10.0, eta), opts),
                    keep: vec!["ind_bound"],
                    suffix: eta_suffix(eta),
                })
                .collect();
            assemble(fig, series, vec![format!("eta in {FIG5_ETAS:?}"), "nu = 1".into()])
        }
        Figure::Fig7 => {
            let series = FIG7_ETAS
                .iter()
                .map(|&eta| Series {
                    label: format!("M/H11 (eta = {eta})"),
                    spec: spec_with(Quantity::HgSensitivity, axis, fixed(1.0, t, 1.0, eta), opts),
                    keep: vec!["m_over_h11"],
                    suffix: eta_suffix(eta),
                })
                .collect();
            let basis = match opts.hg_modes {
                None => "full HG basis".to_owned(),
                Some(k) => format!("HG modes 0..={k}"),
            };
            assemble(
                fig,
                series,
                vec![
                    format!("t2 = {t}"),
                    format!("eta in {FIG7_ETAS:?}"),
                    basis,
                    "d from s through the Gaussian overlap".into(),
                ],
            )
        }
        Figure::Fig8 => {
            let series = FIG8_PAIRS
                .iter()
                .map(|&(t1, t2)| Series {
                    label: format!("1/sim bound (t1 = {t1}, t2 = {t2})"),
                    spec: spec_with(Quantity::CountingFi, axis, fixed(t1, t2, 1.0, 0.5), opts),
                    keep: vec!["inv_sim_bound"],
                    suffix: format!("_t1_{t1}_t2_{t2}"),
                })
                .collect();
            assemble(fig, series, vec![format!("(t1, t2) pairs {FIG8_PAIRS:?}")])
        }
    }
}

/// Every quantity at a single point, for machine consumption.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub t1: f64,
    pub t2: f64,
    pub omega: f64,
    pub eta: f64,
    pub s: f64,
    pub conventions: Conventions,
    pub n_plus: f64,
    pub n_minus: f64,
    pub gamma: f64,
    pub qfi_matrix: FisherMatrix,
    pub sim_bound: f64,
    pub ind_bound: f64,
    pub mu: f64,
    pub hg_sensitivity: [f64; 2],
    pub counting_fi: FisherMatrix,
    /// Present when `t1 = t2`.
    pub qfi_equal: Option<f64>,
    pub prior_gain: Option<f64>,
    pub diagnostics: Vec<String>,
}

pub fn evaluate_point(
    pair: &SourcePair,
    geom: &DiffractionGeometry,
    conventions: &Conventions,
    hg_modes: Option<usize>,
    tail_tol: f64,
    nu: f64,
) -> Result<PointReport> {
    let state = crate::model::build_image_state(pair, geom)?;
    let q = qfi_matrix(pair, geom)?;
    let h = q.matrix;
    let cutoff = hg_modes.map_or(ModeCutoff::Full, ModeCutoff::Finite);
    let cmp = crate::estimation::compare(&h, nu);
    let mut diagnostics: Vec<String> = cmp.diagnostic.iter().map(|d| d.to_string()).collect();
    diagnostics.push(format!("qfi path: {:?}", q.path));
    let (qfi_eq, gain) = if pair.t1 == pair.t2 {
        let r = qfi_equal(pair.t1, pair.omega, pair.eta, geom.s())?;
        let g = prior_gain(pair.t1, pair.omega, pair.eta, geom.s())?;
        (Some(r.qfi), Some(g.gain))
    } else {
        (None, None)
    };
    Ok(PointReport {
        t1: pair.t1,
        t2: pair.t2,
        omega: pair.omega,
        eta: pair.eta,
        s: geom.s(),
        conventions: *conventions,
        n_plus: state.n_plus,
        n_minus: state.n_minus,
        gamma: state.gamma,
        qfi_matrix: h,
        sim_bound: cmp.sim_bound,
        ind_bound: cmp.ind_bound,
        mu: ratio_mu(&h, conventions.mu),
        hg_sensitivity: [
            hg_sensitivity_with(pair, geom, cutoff, Param::T1, conventions.beta_exponent)?,
            hg_sensitivity_with(pair, geom, cutoff, Param::T2, conventions.beta_exponent)?,
        ],
        counting_fi: counting_fi_matrix_with(pair, geom, tail_tol, conventions.f21_series)?,
        qfi_equal: qfi_eq,
        prior_gain: gain,
        diagnostics,
    })
}
