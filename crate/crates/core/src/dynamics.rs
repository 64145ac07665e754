//! Time integration of the LLG equation.
//!
//! The Gilbert form `∂_t m = α m × ∂_t m − m × H` is solved for `∂_t m`
//! by crossing it with `m` and using `m · ∂_t m = 0`, `|m| = 1`:
//!
//! ```text
//! m × ∂_t m = α m × (m × ∂_t m) − m × (m × H) = −α ∂_t m − m × (m × H)
//! ∂_t m     = −α (α ∂_t m + m × (m × H)) − m × H
//! ⇒ ∂_t m  = −(m × H + α m × (m × H)) / (1 + α²)
//! ```
//!
//! The same elimination with a non-unit `a` in place of `m` gives the
//! exact solution of `v = a × (α v − H)`:
//! `v = −(a × H + α a × (a × H)) / (1 + α² |a|²)`, which is what the
//! implicit midpoint rule solves at every fixed-point iterate. Because
//! `v ⊥ a`, the midpoint update preserves `|m|`, and because `v · H = α|v|²`
//! it dissipates the helical energy exactly when `π` is linear and `f` is
//! constant.

use std::fmt;
use std::str::FromStr;

use crate::demag::DemagTensor;
use crate::energy::effective_field;
use crate::error::{Error, Result};
use crate::grid::{l2_norm, Grid, MagnetizationField, VectorField};
use crate::lowerorder::{AppliedField, MaterialParams};
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    ProjectedHeun,
    ImplicitMidpoint,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::ProjectedHeun => "projected_heun",
            Scheme::ImplicitMidpoint => "implicit_midpoint",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projected_heun" => Ok(Scheme::ProjectedHeun),
            "implicit_midpoint" => Ok(Scheme::ImplicitMidpoint),
            other => Err(Error::Param(format!(
                "unknown scheme '{other}' (expected projected_heun or implicit_midpoint)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub dt: T,
    pub t_end: T,
    pub scheme: Scheme,
    /// Fixed-point tolerance on the L∞ distance of successive iterates.
    pub tolerance: T,
    pub max_iterations: usize,
    /// Keep every `stride`-th state.
    pub stride: usize,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(dt: T, t_end: T, scheme: Scheme) -> Self {
        SolverConfig {
            dt,
            t_end,
            scheme,
            tolerance: T::lit(1e-12),
            max_iterations: 200,
            stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::Param("dt > 0".into()));
        }
        if !(self.t_end >= T::zero()) || !self.t_end.is_finite() {
            return Err(Error::Param("t_end >= 0".into()));
        }
        if self.t_end > T::zero() && self.dt > self.t_end {
            return Err(Error::Param("dt <= t_end".into()));
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::Param("tolerance > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Param("max_iterations >= 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::Param("stride >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps; the last step may overshoot `t_end` by less than `dt`.
    pub fn steps(&self) -> usize {
        let ratio = (self.t_end / self.dt).to_f64_lossy();
        (ratio - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics<T> {
    pub step: usize,
    /// Fixed-point iterations (1 for explicit steps).
    pub iterations: usize,
    /// Final successive-iterate distance (0 for explicit steps).
    pub last_update: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub params: MaterialParams<T>,
    pub times: Vec<T>,
    pub snapshots: Vec<MagnetizationField<T>>,
    /// One entry per step taken, stored or not.
    pub diagnostics: Vec<StepDiagnostics<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn grid(&self) -> &Grid<T> {
        self.snapshots[0].grid()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn last(&self) -> &MagnetizationField<T> {
        self.snapshots.last().expect("trajectory holds m0")
    }
}

/// `−(m × H + α m × (m × H)) / (1 + α²|m|²)` cellwise.
pub fn ll_velocity<T: Real>(m: &VectorField<T>, h: &VectorField<T>, alpha: T) -> Result<VectorField<T>> {
    m.zip_map(h, |a, hh| {
        let ah = a.cross(hh);
        (ah + a.cross(ah) * alpha) * (-T::one() / (T::one() + alpha * alpha * a.norm_sq()))
    })
}

/// Landau–Lifshitz right-hand side for a unit field.
pub fn llg_rhs<T: Real>(
    m: &VectorField<T>,
    f_t: &VectorField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<VectorField<T>> {
    let h = effective_field(m, f_t, params, tensor)?;
    ll_velocity(m, &h, params.alpha)
}

/// `‖mdot − α m × mdot + m × H_eff‖`.
pub fn gilbert_residual<T: Real>(
    m: &VectorField<T>,
    mdot: &VectorField<T>,
    f_t: &VectorField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<T> {
    let h = effective_field(m, f_t, params, tensor)?;
    let alpha = params.alpha;
    let r = VectorField::from_values(
        *m.grid(),
        m.values()
            .iter()
            .zip(mdot.values())
            .zip(h.values())
            .map(|((&a, &v), &hh)| v - a.cross(v) * alpha + a.cross(hh))
            .collect(),
    )?;
    Ok(l2_norm(&r))
}

fn normalize_cells<T: Real>(u: VectorField<T>) -> Result<MagnetizationField<T>> {
    if let Some(c) = u.values().iter().position(|v| v.norm_sq() == T::zero()) {
        return Err(Error::Degenerate(c));
    }
    if let Some(c) = u.first_non_finite() {
        return Err(Error::NonFinite(c));
    }
    Ok(MagnetizationField::new_unchecked(u.map(|v| v / v.norm())))
}

/// One explicit Heun step followed by cellwise renormalisation.
pub fn step_projected_heun<T: Real>(
    m: &MagnetizationField<T>,
    t: T,
    config: &SolverConfig<T>,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<MagnetizationField<T>> {
    let grid = *m.grid();
    let dt = config.dt;
    let k1 = llg_rhs(m.field(), &f.field(&grid, t), params, tensor)?;
    let pred = m.field().axpy(dt, &k1)?;
    if let Some(c) = pred.first_non_finite() {
        return Err(Error::NonFinite(c));
    }
    let k2 = llg_rhs(&pred, &f.field(&grid, t + dt), params, tensor)?;
    let half = dt * T::lit(0.5);
    let next = m.field().axpy(half, &k1)?.axpy(half, &k2)?;
    normalize_cells(next)
}

/// One implicit midpoint step, solved by fixed-point iteration.
pub fn step_implicit_midpoint<T: Real>(
    m: &MagnetizationField<T>,
    t: T,
    config: &SolverConfig<T>,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<(MagnetizationField<T>, StepDiagnostics<T>)> {
    let grid = *m.grid();
    let dt = config.dt;
    let half = T::lit(0.5);
    let f_mid = f.field(&grid, t + dt * half);
    let m0 = m.field();
    let mut next = m0.clone();
    let mut last = T::infinity();
    for it in 1..=config.max_iterations {
        let mid = m0.zip_map(&next, |a, b| (a + b) * half)?;
        let h = effective_field(&mid, &f_mid, params, tensor)?;
        let v = ll_velocity(&mid, &h, params.alpha)?;
        let cand = m0.axpy(dt, &v)?;
        if let Some(c) = cand.first_non_finite() {
            return Err(Error::NonFinite(c));
        }
        last = cand
            .values()
            .iter()
            .zip(next.values())
            .map(|(a, b)| (*a - *b).max_abs())
            .fold(T::zero(), T::max);
        next = cand;
        if last < config.tolerance {
            let diag = StepDiagnostics {
                step: 0,
                iterations: it,
                last_update: last,
            };
            return Ok((MagnetizationField::new_unchecked(next), diag));
        }
    }
    Err(Error::NoConvergence {
        iterations: config.max_iterations,
        last_update: last.to_f64_lossy(),
    })
}

/// Integrates from `m0` to `config.t_end`, keeping every `stride`-th state.
pub fn simulate<T: Real>(
    m0: &MagnetizationField<T>,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    config: &SolverConfig<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<Trajectory<T>> {
    params.validate()?;
    config.validate()?;
    if params.enable_demag && tensor.is_none() {
        return Err(Error::MissingTensor);
    }
    let steps = config.steps();
    let mut traj = Trajectory {
        params: *params,
        times: vec![T::zero()],
        snapshots: vec![m0.clone()],
        diagnostics: Vec::with_capacity(steps),
    };
    let mut m = m0.clone();
    for k in 0..steps {
        let t = T::lit(k as f64) * config.dt;
        let annotate = |e: Error| Error::Step {
            step: k + 1,
            source: Box::new(e),
        };
        let (next, mut diag) = match config.scheme {
            Scheme::ProjectedHeun => {
                let next = step_projected_heun(&m, t, config, f, params, tensor).map_err(annotate)?;
                let diag = StepDiagnostics {
                    step: 0,
                    iterations: 1,
                    last_update: T::zero(),
                };
                (next, diag)
            }
            Scheme::ImplicitMidpoint => {
                step_implicit_midpoint(&m, t, config, f, params, tensor).map_err(annotate)?
            }
        };
        diag.step = k + 1;
        traj.diagnostics.push(diag);
        m = next;
        if (k + 1) % config.stride == 0 {
            traj.times.push(T::lit((k + 1) as f64) * config.dt);
            traj.snapshots.push(m.clone());
        }
    }
    Ok(traj)
}

/// Closed-form single-spin solution under a constant field `H e_z`.
pub fn macrospin_exact<T: Real>(m0: Vec3<T>, field: T, alpha: T, t: T) -> Vec3<T> {
    let theta0 = m0.z().max(-T::one()).min(T::one()).acos();
    let phi0 = m0.y().atan2(m0.x());
    let denom = T::one() + alpha * alpha;
    let phi = phi0 + field * t / denom;
    let two = T::lit(2.0);
    let theta = two * ((theta0 / two).tan() * (-alpha * field * t / denom).exp()).atan();
    Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}
