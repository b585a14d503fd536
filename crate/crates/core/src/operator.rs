//! Second-order centered stencils and the elastic spatial operator
//!
//! ```text
//!   (L u)_1 = a^2 Δu_1 + (b^2 - a^2) (∂11 u_1 + ∂12 u_2)
//!   (L u)_2 = a^2 Δu_2 + (b^2 - a^2) (∂12 u_1 + ∂22 u_2)
//! ```
//!
//! on the cell-centered lattice. `∂ii` is the 3-point second difference,
//! `∂12` the four-corner cross stencil `1/(4 dx^2)`, first derivatives are
//! 2-point centered. The outermost node ring is treated as a homogeneous
//! Dirichlet halo: outputs there are zero and never read values outside the
//! lattice, which is exact as long as the data's propagation cone stays
//! inside the domain.

use crate::model::{Grid2D, LameParams, ScalarField, VectorField2};
use crate::Result;

/// Precomputed stencil coefficients for one lattice spacing.
#[derive(Debug, Clone, Copy)]
pub struct StencilSet {
    pub dx: f64,
    /// `1 / dx^2` for the 3-point second difference.
    pub inv_dx2: f64,
    /// `1 / (4 dx^2)` for the mixed-derivative cross stencil.
    pub inv_4dx2: f64,
    /// `1 / (2 dx)` for centered first derivatives.
    pub inv_2dx: f64,
}

impl StencilSet {
    pub fn new(grid: Grid2D) -> Self {
        let dx = grid.dx;
        StencilSet {
            dx,
            inv_dx2: 1.0 / (dx * dx),
            inv_4dx2: 0.25 / (dx * dx),
            inv_2dx: 0.5 / dx,
        }
    }
}

/// Half-open node-index ranges over which a sweep runs. Used to confine work
/// to the (growing) support of the solution; values are always clipped to
/// the interior `[1, n-1)`.
#[derive(Debug, Clone, Copy)]
pub struct Window {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl Window {
    pub fn interior(grid: Grid2D) -> Self {
        Window { i0: 1, i1: grid.n - 1, j0: 1, j1: grid.n - 1 }
    }

    pub fn clip(&self, grid: Grid2D) -> Self {
        Window {
            i0: self.i0.max(1),
            i1: self.i1.min(grid.n - 1),
            j0: self.j0.max(1),
            j1: self.j1.min(grid.n - 1),
        }
    }

    /// Grow by one node on every side (one step of stencil reach).
    pub fn expand(&self, grid: Grid2D) -> Self {
        Window {
            i0: self.i0.saturating_sub(1),
            i1: self.i1 + 1,
            j0: self.j0.saturating_sub(1),
            j1: self.j1 + 1,
        }
        .clip(grid)
    }

    pub fn is_degenerate(&self) -> bool {
        self.i0 >= self.i1 || self.j0 >= self.j1
    }
}

/// Apply the elastic operator on `window`, writing into `out`. Nodes outside
/// the window are left untouched (the caller keeps them zero).
pub fn apply_elastic_into(
    out: &mut VectorField2,
    u: &VectorField2,
    p: &LameParams,
    st: &StencilSet,
    window: Window,
) -> Result<()> {
    u.same_grid(out)?;
    let n = u.grid.n;
    let w = window.clip(u.grid);
    if w.is_degenerate() {
        return Ok(());
    }
    let a2 = p.a * p.a;
    let bma = p.b * p.b - a2;
    let (c1, c2) = (&u.c1[..], &u.c2[..]);
    let (o1, o2) = (&mut out.c1[..], &mut out.c2[..]);
    for j in w.j0..w.j1 {
        let row = j * n;
        for i in w.i0..w.i1 {
            let k = row + i;
            let d11_1 = (c1[k + 1] - 2.0 * c1[k] + c1[k - 1]) * st.inv_dx2;
            let d22_1 = (c1[k + n] - 2.0 * c1[k] + c1[k - n]) * st.inv_dx2;
            let d11_2 = (c2[k + 1] - 2.0 * c2[k] + c2[k - 1]) * st.inv_dx2;
            let d22_2 = (c2[k + n] - 2.0 * c2[k] + c2[k - n]) * st.inv_dx2;
            let d12_1 =
                (c1[k + n + 1] - c1[k + n - 1] - c1[k - n + 1] + c1[k - n - 1]) * st.inv_4dx2;
            let d12_2 =
                (c2[k + n + 1] - c2[k + n - 1] - c2[k - n + 1] + c2[k - n - 1]) * st.inv_4dx2;
            o1[k] = a2 * (d11_1 + d22_1) + bma * (d11_1 + d12_2);
            o2[k] = a2 * (d11_2 + d22_2) + bma * (d12_1 + d22_2);
        }
    }
    Ok(())
}

/// Elastic operator over the full interior, allocating the output.
pub fn apply_elastic(u: &VectorField2, p: &LameParams, st: &StencilSet) -> Result<VectorField2> {
    let mut out = VectorField2::zeros(u.grid);
    apply_elastic_into(&mut out, u, p, st, Window::interior(u.grid))?;
    Ok(out)
}

/// Centered divergence `∂1 u_1 + ∂2 u_2`; zero on the boundary ring.
pub fn divergence(u: &VectorField2, st: &StencilSet) -> ScalarField {
    let n = u.grid.n;
    let mut out = ScalarField::zeros(u.grid);
    for j in 1..n - 1 {
        let row = j * n;
        for i in 1..n - 1 {
            let k = row + i;
            out.data[k] = (u.c1[k + 1] - u.c1[k - 1]) * st.inv_2dx
                + (u.c2[k + n] - u.c2[k - n]) * st.inv_2dx;
        }
    }
    out
}

/// Pointwise `|∇u_1|^2 + |∇u_2|^2` from centered first derivatives; zero on
/// the boundary ring.
pub fn gradient_energy_density(u: &VectorField2, st: &StencilSet) -> ScalarField {
    let n = u.grid.n;
    let mut out = ScalarField::zeros(u.grid);
    for j in 1..n - 1 {
        let row = j * n;
        for i in 1..n - 1 {
            let k = row + i;
            let g11 = (u.c1[k + 1] - u.c1[k - 1]) * st.inv_2dx;
            let g12 = (u.c1[k + n] - u.c1[k - n]) * st.inv_2dx;
            let g21 = (u.c2[k + 1] - u.c2[k - 1]) * st.inv_2dx;
            let g22 = (u.c2[k + n] - u.c2[k - n]) * st.inv_2dx;
            out.data[k] = g11 * g11 + g12 * g12 + g21 * g21 + g22 * g22;
        }
    }
    out
}

/// 5-point scalar Laplacian; zero on the boundary ring.
pub fn laplacian(f: &ScalarField, st: &StencilSet) -> ScalarField {
    let n = f.grid.n;
    let mut out = ScalarField::zeros(f.grid);
    for j in 1..n - 1 {
        let row = j * n;
        for i in 1..n - 1 {
            let k = row + i;
            out.data[k] =
                (f.data[k + 1] + f.data[k - 1] + f.data[k + n] + f.data[k - n] - 4.0 * f.data[k])
                    * st.inv_dx2;
        }
    }
    out
}
