//! Cell-centred box grid, vector fields on it, and the discrete differential
//! operators (plain and helical).
//!
//! All derivatives are second-order central differences. Cells next to the
//! boundary read a ghost value outside the box whose construction is
//! selected by [`Boundary`]:
//!
//! * `Robin { ratio }` mirrors the interior value and tilts it so that the
//!   face flux `l_ex ∂_n m + (κ/l_ex) m × n` vanishes:
//!   `m_g = m_in - h (κ/l_ex²) (m_in × n)`. With `ratio = 0` this is the
//!   homogeneous Neumann mirror.
//! * `Free` uses no ghost at all: boundary cells switch to one-sided
//!   second-order stencils. This approximates the derivative of the sampled
//!   function itself and is what the calculus checks use.
//!
//! The helical Laplacian is built as `-Σ_i (∂_i^h)^T ∂_i^h`, the exact
//! adjoint composition of the helical partial with Robin ghosts. Its second
//! application therefore reads the adjoint ghost `-(v + s h r (v × e_i))`,
//! an odd reflection of the helical flux. This makes
//! `<∇_h u, ∇_h v> = -<u, Δ_h v>` hold to rounding on the grid, so the
//! discrete helical energy is an exact Lyapunov functional for the
//! semi-discrete dynamics.

use crate::error::{Error, Result};
use crate::lowerorder::MaterialParams;
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    extents: [T; 3],
    cells: [usize; 3],
    spacing: [T; 3],
}

impl<T: Real> Grid<T> {
    pub fn new(extents: [T; 3], cells: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if cells[a] == 0 {
                return Err(Error::InvalidGrid(format!("cells[{a}] must be positive")));
            }
            if !(extents[a] > T::zero()) || !extents[a].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "extents[{a}] must be positive and finite"
                )));
            }
        }
        let spacing = [
            extents[0] / T::from_usize(cells[0]).unwrap(),
            extents[1] / T::from_usize(cells[1]).unwrap(),
            extents[2] / T::from_usize(cells[2]).unwrap(),
        ];
        Ok(Grid {
            extents,
            cells,
            spacing,
        })
    }

    /// Grid with cubic cells of side `h`.
    pub fn cubic(cells: [usize; 3], h: T) -> Result<Self> {
        let e = |n: usize| T::from_usize(n).unwrap() * h;
        Self::new([e(cells[0]), e(cells[1]), e(cells[2])], cells)
    }

    pub fn extents(&self) -> [T; 3] {
        self.extents
    }

    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }

    pub fn spacing(&self) -> [T; 3] {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1] * self.cells[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> T {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// `|Ω|`.
    pub fn volume(&self) -> T {
        self.extents[0] * self.extents[1] * self.extents[2]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.cells[0] * (j + self.cells[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.cells[0];
        let ny = self.cells[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    #[inline]
    fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.cells[0],
            _ => self.cells[0] * self.cells[1],
        }
    }

    pub fn center(&self, idx: usize) -> Vec3<T> {
        let c = self.coords(idx);
        let half = T::lit(0.5);
        Vec3::new(
            (T::from_usize(c[0]).unwrap() + half) * self.spacing[0],
            (T::from_usize(c[1]).unwrap() + half) * self.spacing[1],
            (T::from_usize(c[2]).unwrap() + half) * self.spacing[2],
        )
    }

    /// Number of cell layers between `idx` and the nearest face (0 on the
    /// boundary layer).
    pub fn depth(&self, idx: usize) -> usize {
        let c = self.coords(idx);
        (0..3)
            .map(|a| c[a].min(self.cells[a] - 1 - c[a]))
            .min()
            .unwrap()
    }

    /// Same grid with every cell count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(
            self.extents,
            [
                self.cells[0] * factor,
                self.cells[1] * factor,
                self.cells[2] * factor,
            ],
        )
    }

    pub fn check_axis(axis: usize) -> Result<()> {
        if axis < 3 {
            Ok(())
        } else {
            Err(Error::Axis(axis))
        }
    }
}

/// One `R^3` value per cell, row-major with x fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    grid: Grid<T>,
    values: Vec<Vec3<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        VectorField {
            grid,
            values: vec![Vec3::zero(); grid.len()],
        }
    }

    pub fn uniform(grid: Grid<T>, v: Vec3<T>) -> Self {
        VectorField {
            grid,
            values: vec![v; grid.len()],
        }
    }

    pub fn from_values(grid: Grid<T>, values: Vec<Vec3<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField { grid, values })
    }

    /// Samples a closed-form field at the cell centres.
    pub fn from_fn(grid: Grid<T>, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        let values = (0..grid.len()).map(|c| f(grid.center(c))).collect();
        VectorField { grid, values }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Vec3<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec3<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Vec3<T>> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        VectorField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Cellwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Self, f: impl Fn(Vec3<T>, Vec3<T>) -> Vec3<T>) -> Result<Self> {
        self.same_grid(other)?;
        Ok(self.zip_map_unchecked(other, f))
    }

    pub(crate) fn zip_map_unchecked(
        &self,
        other: &Self,
        f: impl Fn(Vec3<T>, Vec3<T>) -> Vec3<T>,
    ) -> Self {
        VectorField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b * s)
    }

    /// Cellwise `self × other`.
    pub fn cross(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a.cross(b))
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.same_grid(other)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    /// Largest cell magnitude.
    pub fn max_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.norm()))
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(c) => Err(Error::NonFinite(c)),
            None => Ok(()),
        }
    }

    /// Largest deviation of `|u[c]|` from one.
    pub fn max_unit_deviation(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max((v.norm() - T::one()).abs()))
    }
}

/// A [`VectorField`] whose values lie on the unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct MagnetizationField<T>(VectorField<T>);

impl<T: Real> MagnetizationField<T> {
    /// Validates `|m| = 1` within [`Real::unit_tolerance`].
    pub fn new(field: VectorField<T>) -> Result<Self> {
        Self::with_tolerance(field, T::unit_tolerance())
    }

    pub fn with_tolerance(field: VectorField<T>, tol: T) -> Result<Self> {
        for (c, v) in field.values.iter().enumerate() {
            let n = v.norm();
            if !((n - T::one()).abs() <= tol) {
                return Err(Error::NotUnit {
                    cell: c,
                    norm: n.to_f64_lossy(),
                });
            }
        }
        Ok(MagnetizationField(field))
    }

    /// Projects every cell onto the sphere. Zero cells are an error.
    pub fn project(field: VectorField<T>) -> Result<Self> {
        let mut field = field;
        for (c, v) in field.values.iter_mut().enumerate() {
            *v = v.normalized().ok_or(Error::Degenerate(c))?;
        }
        Ok(MagnetizationField(field))
    }

    pub fn uniform(grid: Grid<T>, dir: Vec3<T>) -> Result<Self> {
        let d = dir.normalized().ok_or(Error::Degenerate(0))?;
        Ok(MagnetizationField(VectorField::uniform(grid, d)))
    }

    pub(crate) fn new_unchecked(field: VectorField<T>) -> Self {
        MagnetizationField(field)
    }

    pub fn field(&self) -> &VectorField<T> {
        &self.0
    }

    pub fn into_field(self) -> VectorField<T> {
        self.0
    }

    pub fn grid(&self) -> &Grid<T> {
        self.0.grid()
    }

    pub fn values(&self) -> &[Vec3<T>] {
        self.0.values()
    }
}

impl<T> AsRef<VectorField<T>> for MagnetizationField<T> {
    fn as_ref(&self) -> &VectorField<T> {
        &self.0
    }
}

impl<T> std::ops::Deref for MagnetizationField<T> {
    type Target = VectorField<T>;
    fn deref(&self) -> &VectorField<T> {
        &self.0
    }
}

/// The three partial helical derivatives of a field.
#[derive(Clone, Debug, PartialEq)]
pub struct HelicalGradient<T> {
    pub components: [VectorField<T>; 3],
}

impl<T: Real> HelicalGradient<T> {
    pub fn grid(&self) -> &Grid<T> {
        self.components[0].grid()
    }

    /// `<∇_h u, ∇_h v>` summed over the three components.
    pub fn inner(&self, other: &Self) -> Result<T> {
        let mut s = T::zero();
        for a in 0..3 {
            s += inner_product(&self.components[a], &other.components[a])?;
        }
        Ok(s)
    }

    pub fn norm_sq(&self) -> T {
        self.components
            .iter()
            .map(|c| inner_product(c, c).unwrap())
            .sum()
    }
}

/// Boundary closure used by the difference stencils.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Boundary<T> {
    /// One-sided stencils at the boundary, no ghost cells.
    Free,
    /// Ghost `m_g = m_in - h·ratio·(m_in × n)`; `ratio = κ/l_ex²`.
    Robin { ratio: T },
}

impl<T: Real> Boundary<T> {
    pub fn neumann() -> Self {
        Boundary::Robin { ratio: T::zero() }
    }

    /// The ghost rule implied by the material parameters.
    pub fn llg(params: &MaterialParams<T>) -> Self {
        Boundary::Robin {
            ratio: params.kappa / (params.ell_ex * params.ell_ex),
        }
    }
}

#[derive(Clone, Copy)]
enum Closure<T> {
    Free,
    Robin(T),
    /// Adjoint of the Robin closure (odd reflection of the flux).
    Flux(T),
}

impl<T: Real> Closure<T> {
    /// Ghost value beyond the face with outward normal `side · e_axis`.
    #[inline]
    fn ghost(self, inner: Vec3<T>, axis: usize, side: T, h: T) -> Vec3<T> {
        match self {
            Closure::Free => unreachable!("free closure has no ghost"),
            Closure::Robin(r) => inner - inner.cross_unit(axis) * (side * h * r),
            Closure::Flux(r) => -(inner + inner.cross_unit(axis) * (side * h * r)),
        }
    }
}

/// Ghost value prescribed by the LLG boundary condition for one face.
///
/// `side` is `+1` for the upper face of `axis`, `-1` for the lower one.
pub fn llg_ghost_value<T: Real>(
    inner: Vec3<T>,
    axis: usize,
    side: T,
    spacing: T,
    params: &MaterialParams<T>,
) -> Vec3<T> {
    let r = params.kappa / (params.ell_ex * params.ell_ex);
    Closure::Robin(r).ghost(inner, axis, side, spacing)
}

/// Ghost values on the six faces of the box.
#[derive(Clone, Debug)]
pub struct GhostLayer<T> {
    /// `faces[axis][0]` lower face, `faces[axis][1]` upper face, each listing
    /// `(boundary cell index, ghost value)`.
    pub faces: [[Vec<(usize, Vec3<T>)>; 2]; 3],
}

/// Ghost layer for `m` under the LLG boundary condition.
pub fn fill_ghost_llg<T: Real>(m: &VectorField<T>, params: &MaterialParams<T>) -> GhostLayer<T> {
    let grid = *m.grid();
    let n = grid.cells();
    let h = grid.spacing();
    let mut faces: [[Vec<(usize, Vec3<T>)>; 2]; 3] = Default::default();
    for (c, &v) in m.values().iter().enumerate() {
        let ijk = grid.coords(c);
        for a in 0..3 {
            if ijk[a] == 0 {
                faces[a][0].push((c, llg_ghost_value(v, a, -T::one(), h[a], params)));
            }
            if ijk[a] == n[a] - 1 {
                faces[a][1].push((c, llg_ghost_value(v, a, T::one(), h[a], params)));
            }
        }
    }
    GhostLayer { faces }
}

/// Largest face value of the helical flux `l_ex ∂_n m + (κ/l_ex) m_in × n`
/// with `∂_n m = (m_g - m_in)/h`.
pub fn max_boundary_flux<T: Real>(m: &VectorField<T>, params: &MaterialParams<T>) -> T {
    let layer = fill_ghost_llg(m, params);
    let h = m.grid().spacing();
    let k_l = params.kappa / params.ell_ex;
    let mut worst = T::zero();
    for a in 0..3 {
        for (s, face) in layer.faces[a].iter().enumerate() {
            let side = if s == 0 { -T::one() } else { T::one() };
            for &(c, g) in face {
                let inner = m.values()[c];
                let dn = (g - inner) / h[a];
                let flux = dn * params.ell_ex + inner.cross_unit(a) * (side * k_l);
                worst = worst.max(flux.max_abs());
            }
        }
    }
    worst
}

fn diff_axis<T: Real>(u: &VectorField<T>, axis: usize, closure: Closure<T>) -> VectorField<T> {
    let grid = *u.grid();
    let n = grid.cells()[axis];
    let h = grid.spacing()[axis];
    let stride = grid.stride(axis);
    let vals = u.values();
    let two = T::lit(2.0);
    let inv2h = T::one() / (two * h);
    let out = (0..grid.len())
        .map(|c| {
            let i = grid.coords(c)[axis];
            match closure {
                Closure::Free => match n {
                    1 => Vec3::zero(),
                    2 => {
                        let (lo, hi) = if i == 0 { (c, c + stride) } else { (c - stride, c) };
                        (vals[hi] - vals[lo]) / h
                    }
                    _ => {
                        if i == 0 {
                            (vals[c] * T::lit(-3.0) + vals[c + stride] * T::lit(4.0)
                                - vals[c + 2 * stride])
                                * inv2h
                        } else if i == n - 1 {
                            (vals[c] * T::lit(3.0) - vals[c - stride] * T::lit(4.0)
                                + vals[c - 2 * stride])
                                * inv2h
                        } else {
                            (vals[c + stride] - vals[c - stride]) * inv2h
                        }
                    }
                },
                _ => {
                    let lo = if i == 0 {
                        closure.ghost(vals[c], axis, -T::one(), h)
                    } else {
                        vals[c - stride]
                    };
                    let hi = if i == n - 1 {
                        closure.ghost(vals[c], axis, T::one(), h)
                    } else {
                        vals[c + stride]
                    };
                    (hi - lo) * inv2h
                }
            }
        })
        .collect();
    VectorField { grid, values: out }
}

fn closure_of<T: Real>(bc: Boundary<T>) -> Closure<T> {
    match bc {
        Boundary::Free => Closure::Free,
        Boundary::Robin { ratio } => Closure::Robin(ratio),
    }
}

/// Central-difference `∂_axis u` (0-based axis).
pub fn partial_derivative<T: Real>(
    u: &VectorField<T>,
    axis: usize,
    bc: Boundary<T>,
) -> Result<VectorField<T>> {
    Grid::<T>::check_axis(axis)?;
    if matches!(bc, Boundary::Free) && u.grid().cells()[axis] < 2 {
        return Err(Error::GridTooSmall(format!(
            "one-sided stencil needs 2 cells along axis {axis}"
        )));
    }
    Ok(diff_axis(u, axis, closure_of(bc)))
}

fn helical_partial_closure<T: Real>(
    u: &VectorField<T>,
    axis: usize,
    params: &MaterialParams<T>,
    closure: Closure<T>,
) -> VectorField<T> {
    let d = diff_axis(u, axis, closure);
    let l = params.ell_ex;
    let k_l = params.kappa / params.ell_ex;
    d.zip_map_unchecked(u, |du, uc| du * l + uc.cross_unit(axis) * k_l)
}

/// `∂_i^h u = l_ex ∂_i u + (κ/l_ex) (u × e_i)` with the LLG ghost rule.
pub fn helical_partial<T: Real>(
    u: &VectorField<T>,
    axis: usize,
    params: &MaterialParams<T>,
) -> Result<VectorField<T>> {
    helical_partial_with(u, axis, params, Boundary::llg(params))
}

/// Helical partial derivative with an explicit boundary closure.
pub fn helical_partial_with<T: Real>(
    u: &VectorField<T>,
    axis: usize,
    params: &MaterialParams<T>,
    bc: Boundary<T>,
) -> Result<VectorField<T>> {
    let d = partial_derivative(u, axis, bc)?;
    let l = params.ell_ex;
    let k_l = params.kappa / params.ell_ex;
    Ok(d.zip_map_unchecked(u, |du, uc| du * l + uc.cross_unit(axis) * k_l))
}

pub fn helical_gradient<T: Real>(
    u: &VectorField<T>,
    params: &MaterialParams<T>,
) -> HelicalGradient<T> {
    helical_gradient_with(u, params, Boundary::llg(params)).expect("ghosted stencils need no minimum size")
}

pub fn helical_gradient_with<T: Real>(
    u: &VectorField<T>,
    params: &MaterialParams<T>,
    bc: Boundary<T>,
) -> Result<HelicalGradient<T>> {
    Ok(HelicalGradient {
        components: [
            helical_partial_with(u, 0, params, bc)?,
            helical_partial_with(u, 1, params, bc)?,
            helical_partial_with(u, 2, params, bc)?,
        ],
    })
}

/// `Δ_h u = Σ_i ∂_i^h ∂_i^h u`, realised as `-Σ_i (∂_i^h)^T ∂_i^h` so that
/// it is exactly the negative gradient of `½ ‖∇_h u‖²`.
pub fn helical_laplacian<T: Real>(u: &VectorField<T>, params: &MaterialParams<T>) -> VectorField<T> {
    let r = params.kappa / (params.ell_ex * params.ell_ex);
    let mut acc = VectorField::zeros(*u.grid());
    for a in 0..3 {
        let first = helical_partial_closure(u, a, params, Closure::Robin(r));
        let second = helical_partial_closure(&first, a, params, Closure::Flux(r));
        acc.add_assign(&second).unwrap();
    }
    acc
}

/// Helical Laplacian by plain composition with an explicit closure (both
/// applications use the same stencil). Used by the calculus checks.
pub fn helical_laplacian_composed<T: Real>(
    u: &VectorField<T>,
    params: &MaterialParams<T>,
    bc: Boundary<T>,
) -> Result<VectorField<T>> {
    let mut acc = VectorField::zeros(*u.grid());
    for a in 0..3 {
        let first = helical_partial_with(u, a, params, bc)?;
        let second = helical_partial_with(&first, a, params, bc)?;
        acc.add_assign(&second)?;
    }
    Ok(acc)
}

/// `curl u = Σ_i e_i × ∂_i u`.
pub fn curl<T: Real>(u: &VectorField<T>, bc: Boundary<T>) -> Result<VectorField<T>> {
    let d = [
        partial_derivative(u, 0, bc)?,
        partial_derivative(u, 1, bc)?,
        partial_derivative(u, 2, bc)?,
    ];
    let values = (0..u.len())
        .map(|c| {
            let (dx, dy, dz) = (d[0].values[c], d[1].values[c], d[2].values[c]);
            Vec3::new(dy.z() - dz.y(), dz.x() - dx.z(), dx.y() - dy.x())
        })
        .collect();
    Ok(VectorField {
        grid: *u.grid(),
        values,
    })
}

/// Adjoint of [`curl`] with respect to the grid inner product.
///
/// For the Robin closure this is what makes `κ ∫ m·curl m` differentiate to
/// `κ (curl + curl*) m` exactly.
pub fn curl_adjoint<T: Real>(u: &VectorField<T>, bc: Boundary<T>) -> Result<VectorField<T>> {
    let closure = match bc {
        Boundary::Robin { ratio } => Closure::Flux(ratio),
        Boundary::Free => {
            return Err(Error::Param(
                "curl adjoint is only defined for ghosted closures".into(),
            ))
        }
    };
    // curl u = -Σ_i C_i u × e_i, so curl* v = -Σ_i C_i^T (e_i × v) = Σ_i C̃_i(e_i × v)
    // where C̃_i = -C_i^T is the difference with the adjoint ghost.
    let mut acc = VectorField::zeros(*u.grid());
    for a in 0..3 {
        let w = u.map(|v| -v.cross_unit(a));
        let d = diff_axis(&w, a, closure);
        acc.add_assign(&d)?;
    }
    Ok(acc)
}

/// Plain vector Laplacian `-Σ_i C_i^T C_i u` with the given ghost ratio.
pub fn laplacian_adjoint<T: Real>(u: &VectorField<T>, ratio: T) -> VectorField<T> {
    let mut acc = VectorField::zeros(*u.grid());
    for a in 0..3 {
        let first = diff_axis(u, a, Closure::Robin(ratio));
        let second = diff_axis(&first, a, Closure::Flux(ratio));
        acc.add_assign(&second).unwrap();
    }
    acc
}

/// Midpoint-rule `<u, v>_Ω`.
pub fn inner_product<T: Real>(u: &VectorField<T>, v: &VectorField<T>) -> Result<T> {
    u.same_grid(v)?;
    let s: T = u
        .values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| a.dot(*b))
        .sum();
    Ok(s * u.grid.cell_volume())
}

pub fn l2_norm<T: Real>(u: &VectorField<T>) -> T {
    inner_product(u, u).unwrap().sqrt()
}

/// Face quadrature of `<u, ∇_h v · n>_∂Ω` from cell data. Face values are
/// extrapolated linearly from the two nearest cells (second order).
pub fn boundary_pairing<T: Real>(u: &VectorField<T>, grad: &HelicalGradient<T>) -> Result<T> {
    u.same_grid(&grad.components[0])?;
    let grid = *u.grid();
    let n = grid.cells();
    let h = grid.spacing();
    let half = T::lit(0.5);
    let three_halves = T::lit(1.5);
    let mut total = T::zero();
    for a in 0..3 {
        let stride = grid.stride(a);
        let area = grid.cell_volume() / h[a];
        let comp = grad.components[a].values();
        for c in 0..grid.len() {
            let i = grid.coords(c)[a];
            let mut faces = Vec::with_capacity(2);
            if i == 0 {
                faces.push((-T::one(), c + stride));
            }
            if i == n[a] - 1 {
                faces.push((T::one(), c.wrapping_sub(stride)));
            }
            for (side, next) in faces {
                let (uf, gf) = if n[a] >= 2 {
                    (
                        u.values[c] * three_halves - u.values[next] * half,
                        comp[c] * three_halves - comp[next] * half,
                    )
                } else {
                    (u.values[c], comp[c])
                };
                total += uf.dot(gf) * side * area;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    type Vec3 = crate::vec3::Vec3<f64>;
    type Grid = super::Grid<f64>;
    type VectorField = super::VectorField<f64>;

    fn params(ell: f64, kappa: f64) -> MaterialParams<f64> {
        MaterialParams {
            ell_ex: ell,
            kappa,
            ..MaterialParams::default()
        }
    }

    fn box_grid(n: usize) -> Grid {
        Grid::new([1.0, 1.0, 1.0], [n, n, n]).unwrap()
    }

    #[test]
    fn spacing_is_extent_over_cells() {
        let g = Grid::new([1.0, 2.0, 0.3], [4, 5, 3]).unwrap();
        assert_eq!(g.spacing(), [1.0 / 4.0, 2.0 / 5.0, 0.3 / 3.0]);
        assert_eq!(g.len(), 60);
        assert!(Grid::new([1.0, 1.0, 1.0], [0, 1, 1]).is_err());
        assert!(Grid::new([1.0, -1.0, 1.0], [1, 1, 1]).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::new([1.0, 1.0, 1.0], [3, 4, 5]).unwrap();
        for c in 0..g.len() {
            let [i, j, k] = g.coords(c);
            assert_eq!(g.index(i, j, k), c);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = box_grid(5);
        let u = VectorField::uniform(g, Vec3::new(0.0, 0.0, 1.0));
        for a in 0..3 {
            for bc in [Boundary::Free, Boundary::neumann()] {
                let d = partial_derivative(&u, a, bc).unwrap();
                assert_eq!(d.max_norm(), 0.0);
            }
        }
    }

    #[test]
    fn linear_field_exact_in_interior() {
        let g = box_grid(6);
        let u = VectorField::from_fn(g, |x| Vec3::new(x.x(), 0.0, 0.0));
        let d = partial_derivative(&u, 0, Boundary::neumann()).unwrap();
        for c in 0..g.len() {
            let i = g.coords(c)[0];
            if i > 0 && i < 5 {
                assert!((d.values()[c] - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-13);
            }
        }
        // one-sided stencils are exact for linear data everywhere
        let d = partial_derivative(&u, 0, Boundary::Free).unwrap();
        for v in d.values() {
            assert!((*v - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn bad_axis_is_rejected() {
        let u = VectorField::uniform(box_grid(3), Vec3::new(1.0, 0.0, 0.0));
        assert!(matches!(
            partial_derivative(&u, 3, Boundary::Free),
            Err(Error::Axis(3))
        ));
    }

    #[test]
    fn free_stencil_needs_two_cells() {
        let g = Grid::new([1.0, 1.0, 1.0], [4, 4, 1]).unwrap();
        let u = VectorField::uniform(g, Vec3::new(1.0, 0.0, 0.0));
        assert!(matches!(
            partial_derivative(&u, 2, Boundary::Free),
            Err(Error::GridTooSmall(_))
        ));
        assert!(partial_derivative(&u, 2, Boundary::neumann()).is_ok());
    }

    #[test]
    fn ghost_rule_hand_value() {
        // κ/l² = 2, spacing 0.1, n = +e_x
        let p = params(1.0, 2.0);
        let g = llg_ghost_value(Vec3::new(0.0, 0.0, 1.0), 0, 1.0, 0.1, &p);
        assert!((g - Vec3::new(0.0, -0.2, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn ghost_rule_degenerate_cases() {
        let m = Vec3::new(0.6, 0.0, 0.8);
        assert_eq!(llg_ghost_value(m, 1, -1.0, 0.1, &params(0.5, 0.0)), m);
        let n = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(llg_ghost_value(n, 0, 1.0, 0.1, &params(0.5, 0.7)), n);
    }

    #[test]
    fn fill_ghost_counts_faces() {
        let g = Grid::new([1.0, 1.0, 1.0], [3, 4, 2]).unwrap();
        let u = VectorField::uniform(g, Vec3::new(0.0, 0.0, 1.0));
        let layer = fill_ghost_llg(&u, &params(1.0, 0.3));
        assert_eq!(layer.faces[0][0].len(), 8);
        assert_eq!(layer.faces[1][1].len(), 6);
        assert_eq!(layer.faces[2][0].len(), 12);
    }

    #[test]
    fn boundary_flux_vanishes_after_ghost_fill() {
        let p = params(0.7, 0.4);
        let g = box_grid(5);
        let m = VectorField::from_fn(g, |x| {
            Vec3::new(x.x().cos(), x.x().sin() * x.y().cos(), x.y().sin() * x.x().sin())
                .normalized()
                .unwrap()
        });
        assert!(max_boundary_flux(&m, &p) < 1e-14);
    }

    #[test]
    fn helical_partial_of_constant() {
        let p = params(0.5, 0.3);
        let g = box_grid(5);
        let u = VectorField::uniform(g, Vec3::new(0.0, 0.0, 1.0));
        let d = helical_partial(&u, 0, &p).unwrap();
        let want = Vec3::new(0.0, 0.3 / 0.5, 0.0);
        for c in 0..g.len() {
            if g.coords(c)[0] > 0 && g.coords(c)[0] < 4 {
                assert!((d.values()[c] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn helical_partial_without_dmi_is_scaled_derivative() {
        let p = params(0.5, 0.0);
        let g = box_grid(5);
        let u = VectorField::from_fn(g, |x| Vec3::new(x.y().sin(), x.z(), x.x() * x.y()));
        for a in 0..3 {
            let d = helical_partial(&u, a, &p).unwrap();
            let plain = partial_derivative(&u, a, Boundary::neumann()).unwrap().scale(0.5);
            assert_eq!(d, plain);
        }
    }

    #[test]
    fn constant_field_helical_laplacian_interior() {
        let (l, k) = (0.8, 0.5);
        let p = params(l, k);
        let g = box_grid(7);
        let u0 = Vec3::new(0.48, 0.6, 0.64);
        let u = VectorField::uniform(g, u0);
        let lap = helical_laplacian(&u, &p);
        let want = u0 * (-2.0 * (k / l) * (k / l));
        for c in 0..g.len() {
            if g.depth(c) >= 2 {
                assert!((lap.values()[c] - want).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn quadratic_laplacian_interior() {
        let l = 0.7;
        let p = params(l, 0.0);
        let g = box_grid(8);
        let u = VectorField::from_fn(g, |x| Vec3::new(x.x() * x.x(), 0.0, 0.0));
        let lap = helical_laplacian(&u, &p);
        for c in 0..g.len() {
            if g.depth(c) >= 2 {
                assert!((lap.values()[c] - Vec3::new(2.0 * l * l, 0.0, 0.0)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn summation_by_parts_is_exact() {
        let p = params(0.6, 0.45);
        let g = Grid::new([1.0, 0.8, 0.3], [6, 5, 2]).unwrap();
        let u = VectorField::from_fn(g, |x| Vec3::new(x.x().sin(), x.y() * x.z(), (x.x() + x.y()).cos()));
        let v = VectorField::from_fn(g, |x| Vec3::new(x.y().cos(), x.x() * x.x(), x.z().sin()));
        let lhs = helical_gradient(&u, &p).inner(&helical_gradient(&v, &p)).unwrap();
        let rhs = -inner_product(&u, &helical_laplacian(&v, &p)).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        // and Δ_h is symmetric
        let a = inner_product(&u, &helical_laplacian(&v, &p)).unwrap();
        let b = inner_product(&helical_laplacian(&u, &p), &v).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn single_cell_axis_has_zero_helical_flux() {
        let p = params(0.3, 0.9);
        let g = Grid::new([1.0, 1.0, 1.0], [1, 1, 1]).unwrap();
        let u = VectorField::uniform(g, Vec3::new(0.0, 0.6, 0.8));
        for a in 0..3 {
            assert!(helical_partial(&u, a, &p).unwrap().max_norm() < 1e-15);
        }
        assert!(helical_laplacian(&u, &p).max_norm() < 1e-15);
    }

    #[test]
    fn linear_curl_interior() {
        let g = box_grid(5);
        let u = VectorField::from_fn(g, |x| Vec3::new(0.0, 0.0, x.x()));
        let c = curl(&u, Boundary::Free).unwrap();
        for v in c.values() {
            assert!((*v - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-13);
        }
        let c0 = curl(&VectorField::uniform(g, Vec3::new(1.0, 2.0, 3.0)), Boundary::neumann()).unwrap();
        assert_eq!(c0.max_norm(), 0.0);
    }

    #[test]
    fn curl_adjoint_matches_transpose() {
        let bc = Boundary::Robin { ratio: 0.7 };
        let g = Grid::new([1.0, 0.8, 0.3], [5, 4, 2]).unwrap();
        let u = VectorField::from_fn(g, |x| Vec3::new(x.x().sin(), x.y() * x.z(), (x.x() + x.y()).cos()));
        let v = VectorField::from_fn(g, |x| Vec3::new(x.y().cos(), x.x() * x.x(), x.z().sin()));
        let a = inner_product(&curl(&u, bc).unwrap(), &v).unwrap();
        let b = inner_product(&u, &curl_adjoint(&v, bc).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn inner_product_of_unit_constant_is_volume() {
        let g = Grid::new([1.0, 2.0, 0.5], [3, 3, 3]).unwrap();
        let u = VectorField::uniform(g, Vec3::new(0.0, 1.0, 0.0));
        assert!((l2_norm(&u).powi(2) - 1.0).abs() < 1e-14);
        let other = VectorField::zeros(box_grid(3));
        assert!(matches!(inner_product(&u, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn project_rejects_zero_cells() {
        let g = box_grid(2);
        let mut u = VectorField::uniform(g, Vec3::new(2.0, 0.0, 0.0));
        u.values_mut()[3] = Vec3::zero();
        assert!(matches!(MagnetizationField::project(u), Err(Error::Degenerate(3))));
    }

    #[test]
    fn magnetization_validates_norm() {
        let g = box_grid(2);
        let u = VectorField::uniform(g, Vec3::new(1.0, 1e-5, 0.0));
        assert!(MagnetizationField::new(u).is_err());
    }

    #[test]
    fn operators_work_in_single_precision() {
        let p = MaterialParams::<f32> {
            ell_ex: 0.5,
            kappa: 0.2,
            ..MaterialParams::default()
        };
        let g = super::Grid::<f32>::new([1.0, 1.0, 1.0], [4, 4, 4]).unwrap();
        let u = super::VectorField::uniform(g, crate::vec3::Vec3::new(0.0f32, 0.0, 1.0));
        let lap = helical_laplacian(&u, &p);
        assert!(lap.first_non_finite().is_none());
    }
}
