//! Uniqueness laboratory: the `Ψ`/`ψ` operators, Gronwall constants and
//! horizon, the strong-strong perturbation experiment, the weak-strong
//! two-integrator experiment, and harnesses for the Poincaré and Gronwall
//! lemmas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demag::{build_demag_tensor, DemagTensor};
use crate::dynamics::{llg_rhs, simulate, Scheme, SolverConfig, Trajectory};
use crate::energy::{cumulative_trapezoid, energy_functional, rates_of};
use crate::error::{Error, Result};
use crate::grid::{
    helical_gradient, helical_laplacian, inner_product, l2_norm, partial_derivative, Boundary,
    Grid, MagnetizationField, VectorField,
};
use crate::lowerorder::{estimate_pi_norm, pi_op, AppliedField, MaterialParams};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// `Ψ[u] = α u̇ − Δ_h u − π(u)`.
pub fn psi_apply<T: Real>(
    u: &VectorField<T>,
    u_dot: &VectorField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<VectorField<T>> {
    let lap = helical_laplacian(u, params);
    let pi = pi_op(u, params, tensor)?;
    u_dot.scale(params.alpha).sub(&lap)?.sub(&pi)
}

/// `ψ[u₁, u₂] = α⟨u̇₁, u₂⟩ + ⟨∇_h u₁, ∇_h u₂⟩ − ⟨π(u₁), u₂⟩`.
pub fn psi_form<T: Real>(
    u1: &VectorField<T>,
    u1_dot: &VectorField<T>,
    u2: &VectorField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<T> {
    let a = params.alpha * inner_product(u1_dot, u2)?;
    let g = helical_gradient(u1, params).inner(&helical_gradient(u2, params))?;
    let p = inner_product(&pi_op(u1, params, tensor)?, u2)?;
    Ok(a + g - p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GronwallReport<T> {
    pub alpha: T,
    pub c_pi: T,
    pub c_psi: T,
    pub delta: T,
    pub c_left: T,
    pub c_right: T,
    /// `+∞` when `c_right = 0`, `0` when `c_left ≤ 0`.
    pub t_star: T,
}

impl<T: Real> GronwallReport<T> {
    pub fn assemble(alpha: T, c_pi: T, c_psi: T, delta: T) -> Self {
        let half = T::lit(0.5);
        let c_left = alpha - (alpha * delta + delta) * half;
        let c_right = (alpha / (T::lit(2.0) * delta) + T::one()) * c_psi * c_psi
            + (half + half / delta) * c_pi * c_pi;
        GronwallReport {
            alpha,
            c_pi,
            c_psi,
            delta,
            c_left,
            c_right,
            t_star: horizon(c_left, c_right),
        }
    }

    /// Upper end of the admissible Young parameter range, where `c_left = 0`.
    pub fn delta_max(alpha: T) -> T {
        T::lit(2.0) * alpha / (alpha + T::one())
    }
}

fn horizon<T: Real>(c_left: T, c_right: T) -> T {
    if c_left <= T::zero() {
        T::zero()
    } else if c_right == T::zero() {
        T::infinity()
    } else {
        (c_left / c_right).sqrt()
    }
}

/// Maximises `T*(δ)` over `(0, 2α/(α+1))` by golden-section search.
pub fn optimal_delta<T: Real>(alpha: T, c_pi: T, c_psi: T) -> T {
    let hi = GronwallReport::delta_max(alpha);
    if c_pi == T::zero() && c_psi == T::zero() {
        return hi * T::lit(0.5);
    }
    let objective = |d: T| GronwallReport::assemble(alpha, c_pi, c_psi, d).t_star;
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (T::zero(), hi);
    let mut x1 = b - (b - a) * inv_phi;
    let mut x2 = a + (b - a) * inv_phi;
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + (b - a) * inv_phi;
            f2 = objective(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - (b - a) * inv_phi;
            f1 = objective(x1);
        }
        if b - a <= T::epsilon() * hi {
            break;
        }
    }
    (a + b) * T::lit(0.5)
}

/// `max_c |g| + max_c |∇g|` with one-sided stencils at the boundary.
fn sup_with_gradient<T: Real>(g: &VectorField<T>) -> Result<T> {
    let grid = *g.grid();
    let mut grad_sq = vec![T::zero(); grid.len()];
    for a in 0..3 {
        if grid.cells()[a] < 2 {
            continue;
        }
        let d = partial_derivative(g, a, Boundary::Free)?;
        for (acc, v) in grad_sq.iter_mut().zip(d.values()) {
            *acc += v.norm_sq();
        }
    }
    let gmax = grad_sq.into_iter().fold(T::zero(), T::max).sqrt();
    Ok(g.max_norm() + gmax)
}

/// Constants of the strong-strong estimate measured along `traj1`.
pub fn gronwall_constants<T: Real>(
    traj1: &Trajectory<T>,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    delta: Option<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<GronwallReport<T>> {
    if traj1.is_empty() {
        return Err(Error::TooFewSnapshots { needed: 1, found: 0 });
    }
    let grid = *traj1.grid();
    let c_pi = estimate_pi_norm(params, tensor, &grid)?;
    let mut c_psi = T::zero();
    for (m, &t) in traj1.snapshots.iter().zip(&traj1.times) {
        let f_t = f.field(&grid, t);
        let u_dot = llg_rhs(m.field(), &f_t, params, tensor)?;
        let g = psi_apply(m.field(), &u_dot, params, tensor)?.sub(&f_t)?;
        c_psi = c_psi.max(sup_with_gradient(&g)?);
    }
    let delta = delta.unwrap_or_else(|| optimal_delta(params.alpha, c_pi, c_psi));
    Ok(GronwallReport::assemble(params.alpha, c_pi, c_psi, delta))
}

/// Time series describing `w = m₂ − m₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceDiagnostics<T> {
    pub times: Vec<T>,
    pub w_norm: Vec<T>,
    pub grad_w_sq: Vec<T>,
    /// `∫₀ᵗ ‖∂_t w‖²`.
    pub dt_w_sq_integral: Vec<T>,
    /// `∫₀ᵗ ‖w‖²`.
    pub w_sq_integral: Vec<T>,
    /// `∫₀ᵗ ‖∇_h w‖²`.
    pub grad_w_sq_integral: Vec<T>,
}

fn difference_fields<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<Vec<VectorField<T>>> {
    if a.times.len() != b.times.len() {
        return Err(Error::TooFewSnapshots {
            needed: a.times.len(),
            found: b.times.len(),
        });
    }
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| y.field().sub(x.field()))
        .collect()
}

pub fn difference_diagnostics<T: Real>(
    m1: &Trajectory<T>,
    m2: &Trajectory<T>,
    params: &MaterialParams<T>,
) -> Result<DifferenceDiagnostics<T>> {
    let w = difference_fields(m1, m2)?;
    let times = m1.times.clone();
    let w_norm: Vec<T> = w.iter().map(l2_norm).collect();
    let grad_w_sq: Vec<T> = w.iter().map(|x| helical_gradient(x, params).norm_sq()).collect();
    let w_sq: Vec<T> = w_norm.iter().map(|x| *x * *x).collect();
    let dt_w_sq: Vec<T> = if w.len() >= 2 {
        let refs: Vec<&VectorField<T>> = w.iter().collect();
        rates_of(&times, &refs)?
            .iter()
            .map(|d| inner_product(d, d))
            .collect::<Result<_>>()?
    } else {
        vec![T::zero(); w.len()]
    };
    Ok(DifferenceDiagnostics {
        dt_w_sq_integral: cumulative_trapezoid(&times, &dt_w_sq),
        w_sq_integral: cumulative_trapezoid(&times, &w_sq),
        grad_w_sq_integral: cumulative_trapezoid(&times, &grad_w_sq),
        times,
        w_norm,
        grad_w_sq,
    })
}

/// Seeded random unit field tangent to `m0`.
pub fn perturbation_field<T: Real>(m0: &MagnetizationField<T>, seed: u64) -> Result<VectorField<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = m0
        .values()
        .iter()
        .map(|&m| loop {
            let v = Vec3::new(
                T::lit(rng.gen_range(-1.0..1.0)),
                T::lit(rng.gen_range(-1.0..1.0)),
                T::lit(rng.gen_range(-1.0..1.0)),
            );
            let tangent = v - m * v.dot(m);
            if let Some(u) = tangent.normalized() {
                if tangent.norm() > T::lit(1e-3) {
                    break u;
                }
            }
        })
        .collect();
    VectorField::from_values(*m0.grid(), values)
}

pub const PERTURBATION_SEED: u64 = 0x9e37_79b9;

#[derive(Clone, Debug)]
pub struct StrongStrongReport<T> {
    pub eps: T,
    pub gronwall: GronwallReport<T>,
    pub diagnostics: DifferenceDiagnostics<T>,
    pub max_w: T,
    /// `RHS − LHS` of the integrated contraction estimate at every stored
    /// time up to `min(t_end, T*)`.
    pub slack: Vec<T>,
    /// Magnitude used to normalise the slack.
    pub scale: T,
}

impl<T: Real> StrongStrongReport<T> {
    pub fn min_slack(&self) -> T {
        self.slack.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn estimate_holds(&self, rel: T) -> bool {
        self.min_slack() >= -rel * self.scale
    }
}

/// Two implicit-midpoint runs from `m0` and from `normalize(m0 + ε p)`.
pub fn strong_strong_experiment<T: Real>(
    m0: &MagnetizationField<T>,
    eps: T,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    config: &SolverConfig<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<StrongStrongReport<T>> {
    let mut cfg = *config;
    cfg.scheme = Scheme::ImplicitMidpoint;
    let traj1 = simulate(m0, f, params, &cfg, tensor)?;
    strong_strong_with_reference(&traj1, m0, eps, f, params, &cfg, tensor)
}

fn strong_strong_with_reference<T: Real>(
    traj1: &Trajectory<T>,
    m0: &MagnetizationField<T>,
    eps: T,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    cfg: &SolverConfig<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<StrongStrongReport<T>> {
    if !(eps >= T::zero()) {
        return Err(Error::Param("eps >= 0".into()));
    }
    let p = perturbation_field(m0, PERTURBATION_SEED)?;
    let perturbed = if eps == T::zero() {
        m0.clone()
    } else {
        MagnetizationField::project(m0.field().axpy(eps, &p)?)?
    };
    let traj2 = simulate(&perturbed, f, params, cfg, tensor)?;
    let gronwall = gronwall_constants(traj1, f, params, None, tensor)?;
    let d = difference_diagnostics(traj1, &traj2, params)?;
    let max_w = d.w_norm.iter().copied().fold(T::zero(), T::max);
    let half = T::lit(0.5);
    let limit = gronwall.t_star.min(cfg.t_end.max(*d.times.last().unwrap()));
    let mut slack = Vec::new();
    let mut scale = T::min_positive_value();
    for k in 0..d.times.len() {
        if d.times[k] > limit {
            break;
        }
        let lhs = gronwall.c_left * d.dt_w_sq_integral[k] + half * d.grad_w_sq[k];
        let rhs = half * d.grad_w_sq[0]
            + half * d.grad_w_sq_integral[k]
            + gronwall.c_right * d.w_sq_integral[k];
        scale = scale.max(lhs.abs()).max(rhs.abs());
        slack.push(rhs - lhs);
    }
    Ok(StrongStrongReport {
        eps,
        gronwall,
        diagnostics: d,
        max_w,
        slack,
        scale,
    })
}

#[derive(Clone, Debug)]
pub struct SweepReport<T> {
    pub reports: Vec<StrongStrongReport<T>>,
    /// Times `0 < t ≤ T*/2` at which the ratios were compared.
    pub times: Vec<T>,
    /// `‖w(t)‖/ε` per experiment (outer) and comparison time (inner).
    pub ratios: Vec<Vec<T>>,
    /// Largest `max_ε / min_ε − 1` over the comparison times.
    pub spread: T,
}

impl<T: Real> SweepReport<T> {
    pub fn stable(&self, tol: T) -> bool {
        !self.times.is_empty() && self.spread <= tol
    }
}

/// Runs the strong-strong experiment for every `ε` (all `> 0`) and compares
/// `‖w‖/ε` on `0 < t ≤ T*/2`.
pub fn strong_strong_sweep<T: Real>(
    m0: &MagnetizationField<T>,
    eps_list: &[T],
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    config: &SolverConfig<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<SweepReport<T>> {
    let mut cfg = *config;
    cfg.scheme = Scheme::ImplicitMidpoint;
    let traj1 = simulate(m0, f, params, &cfg, tensor)?;
    let reports = eps_list
        .iter()
        .map(|&e| strong_strong_with_reference(&traj1, m0, e, f, params, &cfg, tensor))
        .collect::<Result<Vec<_>>>()?;
    let t_half = reports
        .first()
        .map(|r| r.gronwall.t_star * T::lit(0.5))
        .unwrap_or(T::zero());
    let times: Vec<T> = traj1
        .times
        .iter()
        .copied()
        .filter(|&t| t > T::zero() && t <= t_half)
        .collect();
    let ratios: Vec<Vec<T>> = reports
        .iter()
        .map(|r| {
            r.diagnostics
                .times
                .iter()
                .zip(&r.diagnostics.w_norm)
                .filter(|(t, _)| **t > T::zero() && **t <= t_half)
                .map(|(_, w)| *w / r.eps)
                .collect()
        })
        .collect();
    let mut spread = T::zero();
    for k in 0..times.len() {
        let lo = ratios.iter().map(|r| r[k]).fold(T::infinity(), T::min);
        let hi = ratios.iter().map(|r| r[k]).fold(T::zero(), T::max);
        spread = spread.max(hi / lo - T::one());
    }
    Ok(SweepReport {
        reports,
        times,
        ratios,
        spread,
    })
}

#[derive(Clone, Debug)]
pub struct WeakStrongLevel<T> {
    pub cells: [usize; 3],
    pub dt: T,
    /// `‖w(T)‖` between the projected-Heun and implicit-midpoint runs.
    pub w_final: T,
    pub diagnostics: DifferenceDiagnostics<T>,
    /// `RHS − LHS` of the weak-strong energy estimate at every stored time.
    pub gap: Vec<T>,
    pub poincare: PoincareReport<T>,
}

#[derive(Clone, Debug)]
pub struct WeakStrongReport<T> {
    pub levels: Vec<WeakStrongLevel<T>>,
    /// `‖w_k(T)‖ / ‖w_{k+1}(T)‖`.
    pub factors: Vec<T>,
    /// `log₂` of `factors`.
    pub orders: Vec<T>,
}

impl<T: Real> WeakStrongReport<T> {
    /// Every refinement reduces `‖w(T)‖` by at least `factor`.
    pub fn decreasing_by(&self, factor: T) -> bool {
        !self.factors.is_empty() && self.factors.iter().all(|&q| q >= factor)
    }
}

/// Signed gap of `E_h[w, f] + D[w, f] ≤ −∫(ψ[m₂, ∂_t m₁] + ⟨∂_t m₂, Ψ[m₁]⟩ − 2⟨f, ∂_t m₁⟩)`
/// with `m₁` the strong surrogate.
pub fn weak_strong_gap<T: Real>(
    m1: &Trajectory<T>,
    m2: &Trajectory<T>,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    tensor: Option<&DemagTensor<T>>,
) -> Result<Vec<T>> {
    let grid = *m1.grid();
    let times = &m1.times;
    let f1: Vec<&VectorField<T>> = m1.snapshots.iter().map(|m| m.field()).collect();
    let f2: Vec<&VectorField<T>> = m2.snapshots.iter().map(|m| m.field()).collect();
    let r1 = rates_of(times, &f1)?;
    let r2 = rates_of(times, &f2)?;
    let w = difference_fields(m1, m2)?;
    let wr: Vec<&VectorField<T>> = w.iter().collect();
    let rw = rates_of(times, &wr)?;
    let mut integrand = Vec::with_capacity(times.len());
    let mut diss_a = Vec::with_capacity(times.len());
    let mut diss_f = Vec::with_capacity(times.len());
    let mut energy = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let t = times[k];
        let f_t = f.field(&grid, t);
        let psi1 = psi_apply(f1[k], &r1[k], params, tensor)?;
        let term = psi_form(f2[k], &r2[k], &r1[k], params, tensor)? + inner_product(&r2[k], &psi1)?
            - T::lit(2.0) * inner_product(&f_t, &r1[k])?;
        integrand.push(-term);
        diss_a.push(params.alpha * inner_product(&rw[k], &rw[k])?);
        diss_f.push(inner_product(&f.rate_field(&grid, t), &w[k])?);
        energy.push(energy_functional(&w[k], &f_t, params, tensor)?.helical_total);
    }
    let rhs = cumulative_trapezoid(times, &integrand);
    let da = cumulative_trapezoid(times, &diss_a);
    let df = cumulative_trapezoid(times, &diss_f);
    Ok((0..times.len()).map(|k| rhs[k] - (energy[k] + da[k] + df[k])).collect())
}

/// Projected Heun against implicit midpoint at `levels` joint refinements
/// `(h, dt), (h/2, dt/2), …` starting from `grid` and `config.dt`.
pub fn weak_strong_experiment<T: Real>(
    grid: &Grid<T>,
    initial: &dyn Fn(Vec3<T>) -> Vec3<T>,
    f: &AppliedField<T>,
    params: &MaterialParams<T>,
    config: &SolverConfig<T>,
    levels: usize,
) -> Result<WeakStrongReport<T>> {
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let factor = 1usize << level;
        let g = grid.refined(factor)?;
        let m0 = MagnetizationField::project(VectorField::from_fn(g, initial))?;
        let tensor = params.enable_demag.then(|| build_demag_tensor(&g));
        let mut cfg = *config;
        cfg.dt = config.dt / T::lit(factor as f64);
        cfg.stride = config.stride * factor;
        cfg.scheme = Scheme::ImplicitMidpoint;
        let strong = simulate(&m0, f, params, &cfg, tensor.as_ref())?;
        cfg.scheme = Scheme::ProjectedHeun;
        let weak = simulate(&m0, f, params, &cfg, tensor.as_ref())?;
        let diagnostics = difference_diagnostics(&strong, &weak, params)?;
        let gap = weak_strong_gap(&strong, &weak, f, params, tensor.as_ref())?;
        let w = difference_fields(&strong, &weak)?;
        let poincare = poincare_check(&strong.times, &w)?;
        out.push(WeakStrongLevel {
            cells: g.cells(),
            dt: cfg.dt,
            w_final: *diagnostics.w_norm.last().unwrap(),
            diagnostics,
            gap,
            poincare,
        });
    }
    let factors: Vec<T> = out.windows(2).map(|p| p[0].w_final / p[1].w_final).collect();
    let orders = factors.iter().map(|q| q.log2()).collect();
    Ok(WeakStrongReport {
        levels: out,
        factors,
        orders,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoincareReport<T> {
    pub times: Vec<T>,
    /// `∫₀ᵗ ‖u‖²`.
    pub lhs: Vec<T>,
    /// `t² ∫₀ᵗ ‖∂_t u‖²`.
    pub rhs: Vec<T>,
    pub scale: T,
}

impl<T: Real> PoincareReport<T> {
    pub fn holds(&self, rel: T) -> bool {
        self.lhs
            .iter()
            .zip(&self.rhs)
            .all(|(l, r)| *l <= *r + rel * self.scale)
    }
}

/// `∫₀ᵗ‖u‖² ≤ t² ∫₀ᵗ‖∂_t u‖²` at every stored time, for `u(0) = 0`.
pub fn poincare_check<T: Real>(times: &[T], u: &[VectorField<T>]) -> Result<PoincareReport<T>> {
    let start = u.first().map(l2_norm).unwrap_or(T::zero());
    let scale0 = u.iter().map(l2_norm).fold(T::zero(), T::max);
    if start > T::lit(1e-12) * scale0.max(T::one()) {
        return Err(Error::NonzeroStart(start.to_f64_lossy()));
    }
    let sq: Vec<T> = u.iter().map(|x| inner_product(x, x)).collect::<Result<_>>()?;
    let dsq: Vec<T> = if u.len() >= 2 {
        let refs: Vec<&VectorField<T>> = u.iter().collect();
        rates_of(times, &refs)?
            .iter()
            .map(|d| inner_product(d, d))
            .collect::<Result<_>>()?
    } else {
        vec![T::zero(); u.len()]
    };
    let lhs = cumulative_trapezoid(times, &sq);
    let rhs: Vec<T> = cumulative_trapezoid(times, &dsq)
        .into_iter()
        .zip(times)
        .map(|(i, t)| *t * *t * i)
        .collect();
    let scale = lhs.iter().chain(&rhs).fold(T::min_positive_value(), |a, b| a.max(b.abs()));
    Ok(PoincareReport {
        times: times.to_vec(),
        lhs,
        rhs,
        scale,
    })
}

/// Poincaré check on the difference of two trajectories.
pub fn poincare_check_pair<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<PoincareReport<T>> {
    poincare_check(&a.times, &difference_fields(a, b)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GronwallCheck {
    /// `u(t) ≤ C ∫₀ᵗ u + atol` at every sample.
    pub hypothesis: bool,
    /// `max_t u(t) ≤ atol`.
    pub conclusion: bool,
}

pub fn gronwall_check<T: Real>(times: &[T], series: &[T], c: T, atol: T) -> Result<GronwallCheck> {
    if let Some(k) = series.iter().position(|v| *v < T::zero()) {
        return Err(Error::NegativeSeries(k));
    }
    let integral = cumulative_trapezoid(times, series);
    let hypothesis = series.iter().zip(&integral).all(|(u, i)| *u <= c * *i + atol);
    let conclusion = series.iter().all(|u| *u <= atol);
    Ok(GronwallCheck {
        hypothesis,
        conclusion,
    })
}
