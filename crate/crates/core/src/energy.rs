//! Energy functionals, effective fields, dissipation and energy-law residuals.
//!
//! All spatial derivatives use the LLG ghost rule, so the discrete energies
//! below are exact quadratic forms in `m` and the effective field
//! [`effective_field_classical`] is their exact discrete gradient.
//!
//! Conventions:
//!
//! * `E = (l_ex²/2)‖∇m‖² + κ⟨m, curl m⟩ − ½⟨m, π(m)⟩ − ⟨m, f⟩`
//! * `E_h = ½‖∇_h m‖² − ½⟨m, π(m)⟩ − ⟨m, f⟩ = E + (κ²/l_ex²)|Ω|` for unit `m`
//! * `D(t) = ∫₀ᵗ α‖∂_t m‖² + ∫₀ᵗ ⟨∂_t f, m⟩`

use crate::demag::DemagTensor;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::grid::{
    curl, curl_adjoint, helical_gradient, helical_laplacian, inner_product, laplacian_adjoint,
    partial_derivative, Boundary, Grid, MagnetizationField, VectorField,
};
use crate::lowerorder::{pi_op, AppliedField, MaterialParams};
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown<T> {
    pub exchange: T,
    pub dmi: T,
    pub lower_order: T,
    pub applied: T,
    /// `exchange + dmi + lower_order + applied`.
    pub total: T,
    /// `½‖∇_h m‖² + lower_order + applied`.
    pub helical_total: T,
    /// `(κ²/l_ex²)|Ω|`.
    pub shift: T,
}

impl<T: Real> EnergyBreakdown<T> {
    /// `helical_total − total − shift`; zero up to rounding for unit fields.
    pub fn identity_defect(&self) -> T {
        self.helical_total - self.total - self.shift
    }
}

/// Energy of a unit field.
pub fn energy<T: Real>(
    m: &MagnetizationField<T>,
    f_t: &VectorField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<EnergyBreakdown<T>> {
    let tol = T::unit_tolerance() * T::lit(10.0);
    if m.max_unit_deviation() > tol {
        let (cell, norm) = m
            .values()
            .iter()
            .enumerate()
            .map(|(c, v)| (c, v.norm()))
            .max_by(|a, b| (a.1 - T::one()).abs().partial_cmp(&(b.1 - T::one()).abs()).unwrap())
            .unwrap();
        return Err(Error::NotUnit {
            cell,
            norm: norm.to_f64_lossy(),
        });
    }
    energy_functional(m.field(), f_t, params, tensor)
}

/// Same quadratic functionals as [`energy`], evaluated on an arbitrary
/// field (used for difference fields).
pub fn energy_functional<T: Real>(
    u: &VectorField<T>,
    f_t: &VectorField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<EnergyBreakdown<T>> {
    u.same_grid(f_t)?;
    let half = T::lit(0.5);
    let bc = Boundary::llg(params);
    let mut grad_sq = T::zero();
    for a in 0..3 {
        let d = partial_derivative(u, a, bc)?;
        grad_sq += inner_product(&d, &d)?;
    }
    let exchange = half * params.ell_ex * params.ell_ex * grad_sq;
    let dmi = params.kappa * inner_product(u, &curl(u, bc)?)?;
    let lower_order = -half * inner_product(u, &pi_op(u, params, tensor)?)?;
    let applied = -inner_product(u, f_t)?;
    let helical_total = half * helical_gradient(u, params).norm_sq() + lower_order + applied;
    let k_l = params.helicity() / params.ell_ex;
    let shift = params.kappa * k_l * u.grid().volume();
    Ok(EnergyBreakdown {
        exchange,
        dmi,
        lower_order,
        applied,
        total: exchange + dmi + lower_order + applied,
        helical_total,
        shift,
    })
}

/// `|½‖∇_h m‖² − ((l_ex²/2)‖∇m‖² + κ⟨m, curl m⟩ + (κ²/l_ex²)|Ω|)|`.
pub fn helicity_identity_gap<T: Real>(m: &MagnetizationField<T>, params: &MaterialParams<T>) -> Result<T> {
    let quiet = MaterialParams {
        enable_aniso: false,
        enable_demag: false,
        ..*params
    };
    let zero = VectorField::zeros(*m.grid());
    Ok(energy(m, &zero, &quiet, None)?.identity_defect().abs())
}

/// Helical effective field `Δ_h m + π(m) + f`.
pub fn effective_field<T: Real>(
    m: &VectorField<T>,
    f_t: &VectorField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<VectorField<T>> {
    let mut h = helical_laplacian(m, params);
    h.add_assign(&pi_op(m, params, tensor)?)?;
    h.add_assign(f_t)?;
    Ok(h)
}

/// Classical effective field `l_ex² Δm − κ (curl + curl*) m + π(m) + f`, the
/// exact discrete gradient of [`energy`]. Differs from [`effective_field`]
/// by `2(κ²/l_ex²) m`.
pub fn effective_field_classical<T: Real>(
    m: &VectorField<T>,
    f_t: &VectorField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<VectorField<T>> {
    let bc = Boundary::llg(params);
    let ratio = params.kappa / (params.ell_ex * params.ell_ex);
    let l2 = params.ell_ex * params.ell_ex;
    let mut h = laplacian_adjoint(m, ratio).scale(l2);
    let c = curl(m, bc)?.add(&curl_adjoint(m, bc)?)?;
    h = h.axpy(-params.kappa, &c)?;
    h.add_assign(&pi_op(m, params, tensor)?)?;
    h.add_assign(f_t)?;
    Ok(h)
}

/// Directional derivative `∂_m E[m, f](ψ)` in gradient form (no
/// integration by parts).
pub fn energy_derivative<T: Real>(
    m: &VectorField<T>,
    psi: &VectorField<T>,
    f_t: &VectorField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<T> {
    StateTerms::new(m, f_t, params, tensor)?.derivative(psi)
}

/// The parts of `∂_m E[m, f]` that depend only on `m`, so that many
/// directions can be evaluated cheaply.
struct StateTerms<'a, T> {
    m: &'a VectorField<T>,
    params: &'a MaterialParams<T>,
    partials: [VectorField<T>; 3],
    curl_m: VectorField<T>,
    /// `π(m) + f`.
    lower: VectorField<T>,
}

impl<'a, T: Real> StateTerms<'a, T> {
    fn new(
        m: &'a VectorField<T>,
        f_t: &VectorField<T>,
        params: &'a MaterialParams<T>,
        tensor: Option<&DemagTensor<T>>,
    ) -> Result<Self> {
        let bc = Boundary::llg(params);
        let partials = [
            partial_derivative(m, 0, bc)?,
            partial_derivative(m, 1, bc)?,
            partial_derivative(m, 2, bc)?,
        ];
        let mut lower = pi_op(m, params, tensor)?;
        lower.add_assign(f_t)?;
        Ok(StateTerms {
            m,
            params,
            partials,
            curl_m: curl(m, bc)?,
            lower,
        })
    }

    fn derivative(&self, psi: &VectorField<T>) -> Result<T> {
        let bc = Boundary::llg(self.params);
        let mut grad = T::zero();
        for a in 0..3 {
            grad += inner_product(&self.partials[a], &partial_derivative(psi, a, bc)?)?;
        }
        let l2 = self.params.ell_ex * self.params.ell_ex;
        let dmi = inner_product(self.m, &curl(psi, bc)?)? + inner_product(psi, &self.curl_m)?;
        Ok(l2 * grad + self.params.kappa * dmi - inner_product(&self.lower, psi)?)
    }
}

/// `∂_t m` at every stored time: centred inside, second-order one-sided at
/// the ends (first order when only two samples exist).
pub fn time_derivatives<T: Real>(traj: &Trajectory<T>) -> Result<Vec<VectorField<T>>> {
    let fields: Vec<&VectorField<T>> = traj.snapshots.iter().map(|m| m.field()).collect();
    rates_of(&traj.times, &fields)
}

/// Time derivative of a uniformly sampled field sequence, same stencils as
/// [`time_derivatives`].
pub fn rates_of<T: Real>(times: &[T], fields: &[&VectorField<T>]) -> Result<Vec<VectorField<T>>> {
    let n = fields.len();
    if n < 2 {
        return Err(Error::TooFewSnapshots { needed: 2, found: n });
    }
    let dt = times[1] - times[0];
    let m = |k: usize| fields[k];
    if n == 2 {
        let d = m(1).sub(m(0))?.scale(T::one() / dt);
        return Ok(vec![d.clone(), d]);
    }
    let inv2 = T::one() / (T::lit(2.0) * dt);
    let mut out = Vec::with_capacity(n);
    out.push(
        m(0).scale(T::lit(-3.0))
            .axpy(T::lit(4.0), m(1))?
            .axpy(-T::one(), m(2))?
            .scale(inv2),
    );
    for k in 1..n - 1 {
        out.push(m(k + 1).sub(m(k - 1))?.scale(inv2));
    }
    out.push(
        m(n - 1)
            .scale(T::lit(3.0))
            .axpy(T::lit(-4.0), m(n - 2))?
            .axpy(T::one(), m(n - 3))?
            .scale(inv2),
    );
    Ok(out)
}

/// Cumulative trapezoid of `values` over `times`.
pub fn cumulative_trapezoid<T: Real>(times: &[T], values: &[T]) -> Vec<T> {
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(values.len());
    for k in 0..values.len() {
        if k > 0 {
            acc += T::lit(0.5) * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        }
        out.push(acc);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct DissipationRecord<T> {
    pub times: Vec<T>,
    /// `∫₀ᵗ α‖∂_t m‖²`.
    pub alpha_term: Vec<T>,
    /// `∫₀ᵗ ⟨∂_t f, m⟩`.
    pub field_term: Vec<T>,
    pub total: Vec<T>,
}

pub fn dissipation<T: Real>(traj: &Trajectory<T>, f: &AppliedField<T>) -> Result<DissipationRecord<T>> {
    let rates = time_derivatives(traj)?;
    let grid = *traj.grid();
    let alpha = traj.params.alpha;
    let a_int: Vec<T> = rates.iter().map(|d| alpha * inner_product(d, d).unwrap()).collect();
    let f_int = traj
        .snapshots
        .iter()
        .zip(&traj.times)
        .map(|(m, &t)| inner_product(&f.rate_field(&grid, t), m.field()))
        .collect::<Result<Vec<T>>>()?;
    let alpha_term = cumulative_trapezoid(&traj.times, &a_int);
    let field_term = cumulative_trapezoid(&traj.times, &f_int);
    let total = alpha_term.iter().zip(&field_term).map(|(a, b)| *a + *b).collect();
    Ok(DissipationRecord {
        times: traj.times.clone(),
        alpha_term,
        field_term,
        total,
    })
}

/// Energy of every stored snapshot.
pub fn energy_series<T: Real>(
    traj: &Trajectory<T>,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<Vec<EnergyBreakdown<T>>> {
    let grid = *traj.grid();
    traj.snapshots
        .iter()
        .zip(&traj.times)
        .map(|(m, &t)| energy(m, &f.field(&grid, t), params, tensor))
        .collect()
}

/// `r(t) = E_h[m(t), f(t)] + D(t) − E_h[m₀, f(0)]`.
pub fn energy_law_residual<T: Real>(
    traj: &Trajectory<T>,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<Vec<T>> {
    let e = energy_series(traj, f, params, tensor)?;
    let d = dissipation(traj, f)?;
    let e0 = e[0].helical_total;
    Ok(e.iter().zip(&d.total).map(|(e, d)| e.helical_total + *d - e0).collect())
}

/// `‖∂_t m · (α ∂_t m − H_eff(m))‖` at the interior stored times.
pub fn conservation_residual<T: Real>(
    traj: &Trajectory<T>,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<Vec<T>> {
    let n = traj.snapshots.len();
    if n < 3 {
        return Err(Error::TooFewSnapshots { needed: 3, found: n });
    }
    let rates = time_derivatives(traj)?;
    let grid = *traj.grid();
    (1..n - 1)
        .map(|k| {
            let m = traj.snapshots[k].field();
            let h = effective_field(m, &f.field(&grid, traj.times[k]), params, tensor)?;
            let d = &rates[k];
            let s: T = d
                .values()
                .iter()
                .zip(h.values())
                .map(|(&v, &hh)| {
                    let r = v.dot(v * params.alpha - hh);
                    r * r
                })
                .sum();
            Ok((s * grid.cell_volume()).sqrt())
        })
        .collect()
}

/// The test fields `x^a y^b z^c e_i` with `a + b + c ≤ 1`, coordinates
/// measured from the box centre.
pub fn default_test_fields<T: Real>(grid: &Grid<T>) -> Vec<VectorField<T>> {
    let half = grid.extents().map(|e| e * T::lit(0.5));
    let mut out = Vec::with_capacity(12);
    for monomial in 0..4 {
        for i in 0..3 {
            out.push(VectorField::from_fn(*grid, |x| {
                let s = if monomial == 0 {
                    T::one()
                } else {
                    x[monomial - 1] - half[monomial - 1]
                };
                Vec3::unit(i) * s
            }));
        }
    }
    out
}

/// Largest violation over `test_fields` of
/// `∫₀ᵀ⟨∂_t m, φ⟩ = ∫₀ᵀ α⟨∂_t m, φ×m⟩ + ∂_m E[m, f](φ×m)` with `T` the last
/// stored time.
pub fn weak_form_residual<T: Real>(
    traj: &Trajectory<T>,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
    test_fields: &[VectorField<T>],
) -> Result<T> {
    if test_fields.is_empty() {
        return Err(Error::NoTestFields);
    }
    let rates = time_derivatives(traj)?;
    let grid = *traj.grid();
    let mut integrands = vec![Vec::with_capacity(rates.len()); test_fields.len()];
    for (k, (m, d)) in traj.snapshots.iter().zip(&rates).enumerate() {
        let m = m.field();
        let f_t = f.field(&grid, traj.times[k]);
        let terms = StateTerms::new(m, &f_t, params, tensor)?;
        for (phi, integrand) in test_fields.iter().zip(&mut integrands) {
            let psi = phi.cross(m)?;
            let lhs = inner_product(d, phi)?;
            let rhs = params.alpha * inner_product(d, &psi)? + terms.derivative(&psi)?;
            integrand.push(lhs - rhs);
        }
    }
    Ok(integrands
        .iter()
        .map(|i| cumulative_trapezoid(&traj.times, i).last().unwrap().abs())
        .fold(T::zero(), T::max))
}
