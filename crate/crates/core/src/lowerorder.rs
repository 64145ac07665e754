//! Material parameters, the applied field, and the lower-order operator
//! `π` (uniaxial anisotropy plus stray field).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demag::{stray_field, DemagTensor};
use crate::error::{Error, Result};
use crate::grid::{l2_norm, Grid, VectorField};
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams<T> {
    /// Exchange length `l_ex > 0`.
    pub ell_ex: T,
    /// DMI strength `κ`.
    pub kappa: T,
    /// Gilbert damping `α > 0`.
    pub alpha: T,
    /// Easy axis, unit length when anisotropy is enabled.
    pub aniso_axis: Vec3<T>,
    pub aniso_strength: T,
    pub enable_aniso: bool,
    pub enable_demag: bool,
}

impl<T: Real> Default for MaterialParams<T> {
    fn default() -> Self {
        MaterialParams {
            ell_ex: T::one(),
            kappa: T::zero(),
            alpha: T::lit(0.1),
            aniso_axis: Vec3::unit(2),
            aniso_strength: T::zero(),
            enable_aniso: false,
            enable_demag: false,
        }
    }
}

impl<T: Real> MaterialParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.ell_ex > T::zero()) || !self.ell_ex.is_finite() {
            return Err(Error::Param("ell_ex > 0".into()));
        }
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(Error::Param("alpha > 0".into()));
        }
        if !self.kappa.is_finite() {
            return Err(Error::Param("kappa must be finite".into()));
        }
        if !(self.aniso_strength >= T::zero()) {
            return Err(Error::Param("aniso_strength >= 0".into()));
        }
        if self.enable_aniso && (self.aniso_axis.norm() - T::one()).abs() > T::unit_tolerance() {
            return Err(Error::Param("|aniso_axis| = 1".into()));
        }
        Ok(())
    }

    /// `κ/l_ex`, the zeroth-order coefficient of the helical derivative.
    pub fn helicity(&self) -> T {
        self.kappa / self.ell_ex
    }
}

/// Time-dependent external field, uniform in space.
#[derive(Clone, Debug, PartialEq)]
pub enum AppliedField<T> {
    Constant(Vec3<T>),
    /// `start + t·rate`.
    Ramp { start: Vec3<T>, rate: Vec3<T> },
    /// `bias + amplitude (cos ωt, sin ωt, 0)`.
    Rotating { bias: Vec3<T>, amplitude: T, omega: T },
    /// Piecewise-linear samples; the rate uses centred differences in time.
    Tabulated { times: Vec<T>, values: Vec<Vec3<T>> },
}

impl<T: Real> AppliedField<T> {
    pub fn zero() -> Self {
        AppliedField::Constant(Vec3::zero())
    }

    pub fn tabulated(times: Vec<T>, values: Vec<Vec3<T>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Param("tabulated field needs matching, non-empty samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Param("tabulated field times must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Param("tabulated field must be finite".into()));
        }
        Ok(AppliedField::Tabulated { times, values })
    }

    pub fn is_constant(&self) -> bool {
        match self {
            AppliedField::Constant(_) => true,
            AppliedField::Ramp { rate, .. } => *rate == Vec3::zero(),
            AppliedField::Rotating { amplitude, omega, .. } => {
                *amplitude == T::zero() || *omega == T::zero()
            }
            AppliedField::Tabulated { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    pub fn value(&self, t: T) -> Vec3<T> {
        match self {
            AppliedField::Constant(v) => *v,
            AppliedField::Ramp { start, rate } => *start + *rate * t,
            AppliedField::Rotating { bias, amplitude, omega } => {
                let ph = *omega * t;
                *bias + Vec3::new(ph.cos(), ph.sin(), T::zero()) * *amplitude
            }
            AppliedField::Tabulated { times, values } => interpolate(times, values, t),
        }
    }

    /// `∂_t f`.
    pub fn rate(&self, t: T) -> Vec3<T> {
        match self {
            AppliedField::Constant(_) => Vec3::zero(),
            AppliedField::Ramp { rate, .. } => *rate,
            AppliedField::Rotating { amplitude, omega, .. } => {
                let ph = *omega * t;
                Vec3::new(-ph.sin(), ph.cos(), T::zero()) * (*amplitude * *omega)
            }
            AppliedField::Tabulated { times, values } => {
                let n = times.len();
                if n < 2 {
                    return Vec3::zero();
                }
                let node_rates: Vec<Vec3<T>> = (0..n)
                    .map(|k| {
                        let (a, b) = if k == 0 {
                            (0, 1)
                        } else if k == n - 1 {
                            (n - 2, n - 1)
                        } else {
                            (k - 1, k + 1)
                        };
                        (values[b] - values[a]) / (times[b] - times[a])
                    })
                    .collect();
                interpolate(times, &node_rates, t)
            }
        }
    }

    pub fn field(&self, grid: &Grid<T>, t: T) -> VectorField<T> {
        VectorField::uniform(*grid, self.value(t))
    }

    pub fn rate_field(&self, grid: &Grid<T>, t: T) -> VectorField<T> {
        VectorField::uniform(*grid, self.rate(t))
    }
}

fn interpolate<T: Real>(times: &[T], values: &[Vec3<T>], t: T) -> Vec3<T> {
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let k = times.partition_point(|&s| s <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    values[k] * (T::one() - w) + values[k + 1] * w
}

/// `π_aniso(m) = 2 K (m·e) e` cellwise.
pub fn anisotropy_op<T: Real>(m: &VectorField<T>, params: &MaterialParams<T>) -> Result<VectorField<T>> {
    let e = params.aniso_axis;
    if (e.norm() - T::one()).abs() > T::unit_tolerance() {
        return Err(Error::Param("|aniso_axis| = 1".into()));
    }
    let k2 = T::lit(2.0) * params.aniso_strength;
    Ok(m.map(|v| e * (k2 * v.dot(e))))
}

/// Sum of the enabled lower-order contributions.
pub fn pi_op<T: Real>(
    m: &VectorField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<VectorField<T>> {
    let mut out = if params.enable_aniso {
        anisotropy_op(m, params)?
    } else {
        VectorField::zeros(*m.grid())
    };
    if params.enable_demag {
        let t = tensor.ok_or(Error::MissingTensor)?;
        out.add_assign(&stray_field(m, t)?)?;
    }
    Ok(out)
}

/// Upper estimate `C_π` of the discrete L² operator norm of `π`, by power
/// iteration from a seeded random start.
pub fn estimate_pi_norm<T: Real>(
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
    grid: &Grid<T>,
) -> Result<T> {
    if !params.enable_aniso && !params.enable_demag {
        return Ok(T::zero());
    }
    const MIN_ITERS: usize = 30;
    const MAX_ITERS: usize = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut u = VectorField::from_values(
        *grid,
        (0..grid.len())
            .map(|_| {
                Vec3::new(
                    T::lit(rng.gen_range(-1.0..1.0)),
                    T::lit(rng.gen_range(-1.0..1.0)),
                    T::lit(rng.gen_range(-1.0..1.0)),
                )
            })
            .collect(),
    )?;
    let n0 = l2_norm(&u);
    u = u.scale(T::one() / n0);
    let mut estimate = T::zero();
    for it in 0..MAX_ITERS {
        let v = pi_op(&u, params, tensor)?;
        let nv = l2_norm(&v);
        if nv == T::zero() {
            return Ok(T::zero());
        }
        let change = (nv - estimate).abs();
        estimate = nv;
        u = v.scale(T::one() / nv);
        if it + 1 >= MIN_ITERS && change <= T::lit(1e-13) * nv {
            break;
        }
    }
    Ok(estimate)
}
