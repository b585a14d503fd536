//! Problem description: material parameters, grid, fields, damping profile,
//! initial data, and the run configuration.
//!
//! The computational domain is the square `[-R, R]^2` with a uniform
//! cell-centered lattice: node `(i, j)` sits at
//! `x = -R + (i + 1/2) dx`, `y = -R + (j + 1/2) dx`, `n * dx = 2R`.
//! `R` is sized so the propagation cone of the data never reaches the edges:
//! `R >= L + b*T + margin`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Wave speeds of the elastic system; `a` is the shear speed, `b` the
/// pressure speed, `0 < a < b`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LameParams {
    pub a: f64,
    pub b: f64,
}

impl LameParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite()) || self.a <= 0.0 || self.b <= self.a {
            return Err(Error::config(format!(
                "wave speeds must satisfy 0 < a < b, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

/// Uniform cell-centered square lattice on `[-radius, radius]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    /// Nodes per axis (`n >= 16`).
    pub n: usize,
    /// Lattice spacing; `n * dx = 2 * radius`.
    pub dx: f64,
    /// Half side length of the domain.
    pub radius: f64,
}

impl Grid2D {
    /// Build a lattice of `n` nodes per axis with spacing `dx`.
    pub fn new(n: usize, dx: f64) -> Result<Self> {
        if n < 16 {
            return Err(Error::config(format!("grid needs n >= 16 nodes per axis, got {n}")));
        }
        if !dx.is_finite() || dx <= 0.0 {
            return Err(Error::config(format!("grid spacing must be positive, got {dx}")));
        }
        Ok(Grid2D { n, dx, radius: 0.5 * n as f64 * dx })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node index `i` along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.radius + (i as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// Euclidean distance of node `(i, j)` from the origin.
    #[inline]
    pub fn node_radius(&self, i: usize, j: usize) -> f64 {
        let x = self.coord(i);
        let y = self.coord(j);
        (x * x + y * y).sqrt()
    }

    /// Quadrature weight of one cell (midpoint rule).
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dx
    }
}

/// Scalar lattice function (damping coefficient, divergence, ...).
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        ScalarField { grid, data: vec![0.0; grid.len()] }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Two-component vector lattice function, components stored as separate
/// row-major planes (struct-of-arrays keeps the stencil sweeps streaming).
#[derive(Debug, Clone)]
pub struct VectorField2 {
    pub grid: Grid2D,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
}

impl VectorField2 {
    pub fn zeros(grid: Grid2D) -> Self {
        let len = grid.len();
        VectorField2 { grid, c1: vec![0.0; len], c2: vec![0.0; len] }
    }

    /// Pointwise Euclidean magnitude at a flat index.
    #[inline]
    pub fn magnitude_at(&self, k: usize) -> f64 {
        (self.c1[k] * self.c1[k] + self.c2[k] * self.c2[k]).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        let m1 = self.c1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let m2 = self.c2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        m1.max(m2)
    }

    pub fn same_grid(&self, other: &VectorField2) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "fields live on different lattices ({}x{} dx={} vs {}x{} dx={})",
                self.grid.n, self.grid.n, self.grid.dx, other.grid.n, other.grid.n, other.grid.dx
            )));
        }
        Ok(())
    }
}

/// Damping coefficient profile.
///
/// `Critical` is the space-dependent profile `V(x) = V0 / sqrt(1 + |x|^2)`,
/// which satisfies the two-sided bound `V0/(1+|x|) <= V(x) <= V0` at every
/// point. `Tabulated` accepts an arbitrary lattice that is checked against
/// the same bound for its declared `V0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum DampingProfile {
    Zero,
    Critical {
        #[serde(rename = "V0")]
        v0: f64,
    },
    Tabulated {
        #[serde(rename = "V0")]
        v0: f64,
        /// Row-major lattice values; length must equal `n * n`.
        values: Vec<f64>,
    },
}

impl DampingProfile {
    /// Declared amplitude `V0` (0 for the zero profile).
    pub fn v0(&self) -> f64 {
        match self {
            DampingProfile::Zero => 0.0,
            DampingProfile::Critical { v0 } | DampingProfile::Tabulated { v0, .. } => *v0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DampingProfile::Zero => Ok(()),
            DampingProfile::Critical { v0 } | DampingProfile::Tabulated { v0, .. } => {
                if !v0.is_finite() || *v0 <= 0.0 {
                    Err(Error::config(format!("damping amplitude V0 must be positive, got {v0}")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Sample the damping profile on the lattice.
///
/// Tabulated values must satisfy `V0/(1+|x|) <= V <= V0` at every node; the
/// first offending node is reported.
pub fn sample_damping(profile: &DampingProfile, grid: Grid2D) -> Result<ScalarField> {
    profile.validate()?;
    match profile {
        DampingProfile::Zero => Ok(ScalarField::zeros(grid)),
        DampingProfile::Critical { v0 } => {
            let mut f = ScalarField::zeros(grid);
            for j in 0..grid.n {
                let y = grid.coord(j);
                for i in 0..grid.n {
                    let x = grid.coord(i);
                    f.data[grid.idx(i, j)] = v0 / (1.0 + x * x + y * y).sqrt();
                }
            }
            Ok(f)
        }
        DampingProfile::Tabulated { v0, values } => {
            if values.len() != grid.len() {
                return Err(Error::config(format!(
                    "tabulated damping has {} values, lattice needs {}",
                    values.len(),
                    grid.len()
                )));
            }
            // Tolerate roundoff at the bound itself, nothing more.
            let slack = 1e-12 * v0;
            for j in 0..grid.n {
                for i in 0..grid.n {
                    let v = values[grid.idx(i, j)];
                    let lower = v0 / (1.0 + grid.node_radius(i, j));
                    if !v.is_finite() || v < lower - slack || v > v0 + slack {
                        return Err(Error::config(format!(
                            "tabulated damping violates V0/(1+|x|) <= V <= V0 at node ({i}, {j}), \
                             x = ({:.6}, {:.6}): V = {v}, bounds [{lower}, {v0}]",
                            grid.coord(i),
                            grid.coord(j),
                        )));
                    }
                }
            }
            Ok(ScalarField { grid, data: values.clone() })
        }
    }
}

/// One radial polynomial bump `amp_k * (1 - |x - c|^2 / r^2)^4` per component,
/// supported on the disk `|x - c| <= r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: [f64; 2],
}

impl BumpSpec {
    /// Profile value at squared distance `d2` from the center (amplitude 1).
    #[inline]
    pub fn profile(&self, d2: f64) -> f64 {
        let s = 1.0 - d2 / (self.radius * self.radius);
        if s <= 0.0 {
            0.0
        } else {
            let s2 = s * s;
            s2 * s2
        }
    }
}

/// Parametric initial data: sums of bumps for displacement `u0` and
/// velocity `u1`, all supported inside the disk `|x| <= L`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(default)]
    pub u0_bumps: Vec<BumpSpec>,
    #[serde(default)]
    pub u1_bumps: Vec<BumpSpec>,
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.l.is_finite() || self.l <= 0.0 {
            return Err(Error::config(format!("support radius L must be positive, got {}", self.l)));
        }
        for (name, bumps) in [("u0", &self.u0_bumps), ("u1", &self.u1_bumps)] {
            for (k, b) in bumps.iter().enumerate() {
                if !b.radius.is_finite() || b.radius <= 0.0 {
                    return Err(Error::config(format!(
                        "{name} bump {k}: radius must be positive, got {}",
                        b.radius
                    )));
                }
                if b.center.iter().chain(b.amplitude.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::config(format!("{name} bump {k}: non-finite parameter")));
                }
                let c = (b.center[0] * b.center[0] + b.center[1] * b.center[1]).sqrt();
                if c + b.radius > self.l * (1.0 + 1e-12) {
                    return Err(Error::config(format!(
                        "{name} bump {k} extends to |x| = {} beyond the declared support L = {}",
                        c + b.radius,
                        self.l
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Sampled initial data; both fields vanish identically outside `|x| <= l`.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub u0: VectorField2,
    pub u1: VectorField2,
    /// Declared support radius `L`.
    pub l: f64,
}

/// Sample the bump family on the lattice. Support containment is exact by
/// construction: a node outside `|x| <= L` is outside every bump disk.
pub fn sample_initial_data(spec: &InitSpec, grid: Grid2D) -> Result<InitialData> {
    spec.validate()?;
    if spec.l >= grid.radius {
        return Err(Error::config(format!(
            "data support L = {} does not fit in the domain radius {}",
            spec.l, grid.radius
        )));
    }
    let mut u0 = VectorField2::zeros(grid);
    let mut u1 = VectorField2::zeros(grid);
    for (bumps, field) in [(&spec.u0_bumps, &mut u0), (&spec.u1_bumps, &mut u1)] {
        for b in bumps {
            for j in 0..grid.n {
                let y = grid.coord(j) - b.center[1];
                for i in 0..grid.n {
                    let x = grid.coord(i) - b.center[0];
                    let p = b.profile(x * x + y * y);
                    if p > 0.0 {
                        let k = grid.idx(i, j);
                        field.c1[k] += b.amplitude[0] * p;
                        field.c2[k] += b.amplitude[1] * p;
                    }
                }
            }
        }
    }
    Ok(InitialData { u0, u1, l: spec.l })
}

/// Damping regime of a run, mirrored by which decay claim applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// `V0 > 2b`: energy decays like `t^-2 log t`.
    StrongDamping,
    /// `b < V0 <= 2b`: energy decays like `t^(-V0/b + delta) log t`.
    IntermediateDamping,
    /// `0 < V0 <= b`: runnable, no decay claim attached.
    WeakDamping,
    /// `V = 0`: L2 norm may grow like `log t`.
    Undamped,
}

/// Which verification suites a run evaluates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Suites {
    pub multiplier: bool,
    pub potential: bool,
    pub rate: bool,
}

impl Default for Suites {
    fn default() -> Self {
        Suites { multiplier: true, potential: true, rate: true }
    }
}

fn default_cfl() -> f64 {
    0.5
}
fn default_t0() -> f64 {
    1.0
}
fn default_stride() -> usize {
    1
}
fn default_margin() -> f64 {
    1.0
}
fn default_memory_cap() -> u64 {
    4096
}

/// Full description of one run. Unknown JSON keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub lame: LameParams,
    pub damping: DampingProfile,
    pub init: InitSpec,
    /// Time horizon.
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Fraction of the stability limit used for the time step, in (0, 1).
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    /// Earliest time from which the weight conditions are scanned.
    #[serde(default = "default_t0")]
    pub t0: f64,
    /// Exponent offset for the IntermediateDamping weight family.
    #[serde(default)]
    pub delta: Option<f64>,
    pub case: Case,
    /// Record diagnostics every this many steps.
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    /// Extra domain padding beyond `L + b*T`, at least `4 dx`.
    #[serde(default = "default_margin")]
    pub grid_margin: f64,
    /// Lattice nodes per unit length.
    pub resolution: f64,
    /// Reject grids whose working set would exceed this many MiB.
    #[serde(default = "default_memory_cap")]
    pub memory_cap_mb: u64,
    #[serde(default)]
    pub suites: Suites,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.lame.validate()?;
        self.damping.validate()?;
        self.init.validate()?;
        if !self.t_end.is_finite() || self.t_end <= 0.0 {
            return Err(Error::config(format!("horizon T must be positive, got {}", self.t_end)));
        }
        if !self.cfl_safety.is_finite() || self.cfl_safety <= 0.0 || self.cfl_safety >= 1.0 {
            return Err(Error::config(format!(
                "cfl_safety must lie in (0, 1), got {}",
                self.cfl_safety
            )));
        }
        if !self.t0.is_finite() || self.t0 < 0.0 {
            return Err(Error::config(format!("t0 must be nonnegative, got {}", self.t0)));
        }
        if self.output_stride == 0 {
            return Err(Error::config("output_stride must be at least 1"));
        }
        if !self.grid_margin.is_finite() || self.grid_margin <= 0.0 {
            return Err(Error::config(format!(
                "grid_margin must be positive, got {}",
                self.grid_margin
            )));
        }
        if !self.resolution.is_finite() || self.resolution <= 0.0 {
            return Err(Error::config(format!(
                "resolution must be positive, got {}",
                self.resolution
            )));
        }
        let v0 = self.damping.v0();
        let b = self.lame.b;
        match self.case {
            Case::Undamped => {
                if !matches!(self.damping, DampingProfile::Zero) {
                    return Err(Error::config("case Undamped requires the Zero damping profile"));
                }
            }
            Case::StrongDamping => {
                if v0 <= 2.0 * b {
                    return Err(Error::config(format!(
                        "case StrongDamping requires V0 > 2b, got V0 = {v0}, b = {b}"
                    )));
                }
            }
            Case::IntermediateDamping => {
                if v0 <= b || v0 > 2.0 * b {
                    return Err(Error::config(format!(
                        "case IntermediateDamping requires b < V0 <= 2b, got V0 = {v0}, b = {b}"
                    )));
                }
                let delta = self.delta.ok_or_else(|| {
                    Error::config("case IntermediateDamping requires the delta exponent offset")
                })?;
                let limit = v0 / b - 1.0;
                if !delta.is_finite() || delta <= 0.0 || delta >= limit {
                    return Err(Error::config(format!(
                        "delta must lie in (0, V0/b - 1) = (0, {limit}), got {delta}"
                    )));
                }
            }
            Case::WeakDamping => {
                if v0 <= 0.0 || v0 > b {
                    return Err(Error::config(format!(
                        "case WeakDamping requires 0 < V0 <= b, got V0 = {v0}, b = {b}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Number of full-lattice f64 planes the solver keeps alive: three time
/// levels, the time integral, two operator scratches, the data velocity and
/// the source density (two components each), the damping lattice and its
/// implicit-solve inverse, plus transient headroom.
const WORKING_PLANES: u64 = 20;

/// Size the lattice for a config: `R = L + b*T + margin` rounded up to a
/// whole number of cells of width `1/resolution`.
pub fn build_grid(cfg: &SimConfig) -> Result<Grid2D> {
    cfg.validate()?;
    let dx = 1.0 / cfg.resolution;
    if cfg.grid_margin < 4.0 * dx * (1.0 - 1e-12) {
        return Err(Error::config(format!(
            "grid_margin = {} is below 4 dx = {} at resolution {}",
            cfg.grid_margin,
            4.0 * dx,
            cfg.resolution
        )));
    }
    let r_raw = cfg.init.l + cfg.lame.b * cfg.t_end + cfg.grid_margin;
    let cells = 2.0 * r_raw * cfg.resolution;
    // Snap to a whole cell count, guarding against roundoff just below one.
    let n = if (cells - cells.round()).abs() < 1e-9 {
        cells.round() as usize
    } else {
        cells.ceil() as usize
    };
    let bytes = (n as u64) * (n as u64) * 8 * WORKING_PLANES;
    let cap = cfg.memory_cap_mb.saturating_mul(1024 * 1024);
    if bytes > cap {
        return Err(Error::config(format!(
            "grid {n}x{n} needs about {} MiB of field storage, over the {} MiB cap",
            bytes / (1024 * 1024),
            cfg.memory_cap_mb
        )));
    }
    Grid2D::new(n, dx)
}
