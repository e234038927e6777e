//! Solvers for the singularly perturbed vortex problems: the single-sign
//! problem by Nehari-constrained Picard iteration, the vortex-pair problem by
//! nodal Nehari projection, vorticity diagnostics, and ε-sweep reports that
//! fit the asymptotic expansions.
//!
//! Discrete objective on a grid (h²-weighted nodal sums, operator-form
//! Dirichlet energy):
//!
//!   E(u) = ½ Σ_edges (Δu)² − ε⁻² h² Σ F(u − q^ε),  F(s) = s₊^{p+1}/(p+1),
//!
//! whose stationary points are exactly the solutions of the 5-point scheme
//! A u = ε⁻² f(u − q^ε).

use crate::domain::{Domain, Grid, NodeRef};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::green::GreenEvaluator;
use crate::poisson::{energy_form_zero_bc, BoundaryValues, GridField, Poisson};
use crate::radial_profile::{profile_for_kappa, solve_unit_profile, RadialProfile};
use crate::routh::{routh_maximize, BackgroundField, RouthConfig};
use std::sync::Arc;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Dirichlet data carried by artificial truncation edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArtificialBc {
    /// Far-field zero.
    Zero,
    /// κ·G(x*, ·) frozen at the Kirchhoff–Routh maximizer, absorbed into an
    /// effective q by a harmonic lift.
    GreenMatched,
}

/// Smooth strictly-larger replacement of q outside a ball: q is kept on
/// B(center, r_in), lifted by `lift` outside B(center, r_out), blended by a
/// C² smoothstep on the annulus between.
#[derive(Clone, Copy, Debug)]
pub struct QBarrier {
    pub center: Point,
    pub r_in: f64,
    pub r_out: f64,
    pub lift: f64,
}

impl QBarrier {
    /// 0 inside r_in, 1 outside r_out, quintic C² blend between.
    fn factor(&self, x: Point) -> f64 {
        let r = x.dist(self.center);
        if r <= self.r_in {
            0.0
        } else if r >= self.r_out {
            1.0
        } else {
            let t = (r - self.r_in) / (self.r_out - self.r_in);
            t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
        }
    }
}

/// Numeric knobs of the Picard iteration.
#[derive(Clone, Copy, Debug)]
pub struct SolverKnobs {
    /// Damping θ of the Picard update.
    pub damping: f64,
    pub max_iters: usize,
    /// Relative tolerance on ‖A u − ε⁻²f(u−q^ε)‖₂.
    pub pde_tol: f64,
    /// Relative tolerance on the energy change.
    pub energy_tol: f64,
}

impl Default for SolverKnobs {
    fn default() -> Self {
        SolverKnobs { damping: 0.5, max_iters: 500, pde_tol: 1e-6, energy_tol: 1e-10 }
    }
}

/// A single-vortex problem instance: domain, grid, background data, Green
/// evaluator, and the limiting profile. ε enters per solve.
pub struct SingleProblem {
    pub domain: Domain,
    pub grid: Arc<Grid>,
    pub solver: Poisson,
    pub p: f64,
    pub kappa: f64,
    pub background: BackgroundField,
    pub green: Arc<GreenEvaluator>,
    pub profile: Arc<RadialProfile>,
    pub knobs: SolverKnobs,
    /// Kirchhoff–Routh maximizer; hat initializers center here.
    pub x_hat: Point,
    /// W(x_hat).
    pub w_star: f64,
    q_nodes: Vec<f64>,
    lift: Option<(GridField, BoundaryValues)>,
    barrier: Option<QBarrier>,
}

impl SingleProblem {
    pub fn new(
        domain: &Domain,
        h: f64,
        p: f64,
        kappa: f64,
        background: BackgroundField,
        green: Arc<GreenEvaluator>,
        artificial_bc: ArtificialBc,
        barrier: Option<QBarrier>,
    ) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::UnsupportedExponent(p));
        }
        if !(kappa > 0.0) {
            return Err(Error::NonPositiveKappa(kappa));
        }
        let grid = match green.grid() {
            Some(g) if (g.h - h).abs() < 1e-12 => g.clone(),
            _ => Arc::new(crate::domain::discretize(domain, h)?),
        };
        let solver = Poisson::new(&grid);
        let profile = Arc::new(solve_unit_profile(p)?);
        let routh_cfg =
            RouthConfig::single(green.clone(), kappa, background.clone())?;
        let max = routh_maximize(&routh_cfg)?;
        if max.near_boundary {
            return Err(Error::NoInteriorMaximum);
        }
        let x_hat = max.points[0];
        let w_star = max.value;

        let mut q_nodes: Vec<f64> =
            (0..grid.n_interior()).map(|k| background.q_at(grid.interior_pos(k))).collect();
        if let Some(b) = &barrier {
            for k in 0..grid.n_interior() {
                q_nodes[k] += b.lift * b.factor(grid.interior_pos(k));
            }
        }

        // GreenMatched windows: harmonic lift of κ·G(x*,·) on artificial
        // edges folded into an effective q
        let lift = match artificial_bc {
            ArtificialBc::Zero => None,
            ArtificialBc::GreenMatched => {
                let bdata = BoundaryValues {
                    vals: grid
                        .boundary_nodes()
                        .iter()
                        .map(|n| {
                            if n.tag == crate::domain::BoundaryTag::Artificial {
                                green.green(x_hat, n.pos).unwrap_or(0.0) * kappa
                            } else {
                                0.0
                            }
                        })
                        .collect(),
                };
                let b = solver.solve(&grid, &GridField::zeros(&grid), &bdata)?;
                for k in 0..grid.n_interior() {
                    q_nodes[k] -= b.vals[k];
                }
                Some((b, bdata))
            }
        };

        Ok(SingleProblem {
            domain: domain.clone(),
            grid,
            solver,
            p,
            kappa,
            background,
            green,
            profile,
            knobs: SolverKnobs::default(),
            x_hat,
            w_star,
            q_nodes,
            lift,
            barrier,
        })
    }

    /// q^ε at the interior nodes (effective q including barrier and lift).
    pub fn q_eps(&self, eps: f64) -> Vec<f64> {
        let shift = self.kappa / TWO_PI * (1.0 / eps).ln();
        self.q_nodes.iter().map(|q| q + shift).collect()
    }

    /// q^ε at an arbitrary point.
    fn q_eps_at(&self, x: Point, eps: f64) -> f64 {
        let mut q = self.background.q_at(x);
        if let Some(b) = &self.barrier {
            q += b.lift * b.factor(x);
        }
        if let Some((lf, lb)) = &self.lift {
            q -= interp_or_nearest(&self.grid, lf, lb, x);
        }
        q + self.kappa / TWO_PI * (1.0 / eps).ln()
    }

    fn validate_eps(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0) {
            return Err(Error::InvalidSpec(format!("eps must be positive, got {eps}")));
        }
        let pk = profile_for_kappa(&self.profile, self.kappa)?;
        let core = eps * pk.rho;
        let min = 6.0 * self.grid.h;
        if core < min {
            return Err(Error::GridTooCoarseForCore { core, min });
        }
        let q_eps = self.q_eps(eps);
        let qmin = q_eps.iter().cloned().fold(f64::INFINITY, f64::min);
        if qmin < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "q^eps must be nonnegative (Nehari hypothesis); min = {qmin:.4e}"
            )));
        }
        Ok(())
    }

    /// The near-manifold initializer: scaled profile core glued to κ̂ G(x̂, ·).
    pub fn hat_function(&self, eps: f64) -> Result<GridField> {
        self.hat_at(eps, self.x_hat)
    }

    pub fn hat_at(&self, eps: f64, x_hat: Point) -> Result<GridField> {
        self.validate_eps(eps)?;
        hat_field(
            &self.grid,
            &self.green,
            &self.profile,
            self.kappa,
            eps,
            x_hat,
            self.q_eps_at(x_hat, eps),
        )
    }

    /// Discrete energy E^ε(u) for u ∈ H¹₀ (interior values, zero trace).
    pub fn energy(&self, u: &GridField, eps: f64) -> f64 {
        let q_eps = self.q_eps(eps);
        energy_of(&self.grid, u, &q_eps, eps, self.p)
    }

    /// Hat-center refinement: the continuum Kirchhoff–Routh maximizer sits an
    /// O(h) distance from the discrete optimum, which the Picard iteration
    /// would otherwise creep toward along a near-neutral mode. Minimize the
    /// (unprojected) hat energy over the center position first.
    fn refined_hat_center(&self, eps: f64) -> Point {
        let q_eps = self.q_eps(eps);
        let objective = |c: &[f64]| -> f64 {
            let x = Point::new(c[0], c[1]);
            if !self.domain.contains(x) {
                return f64::NEG_INFINITY;
            }
            let hat = match hat_field(
                &self.grid,
                &self.green,
                &self.profile,
                self.kappa,
                eps,
                x,
                self.q_eps_at(x, eps),
            ) {
                Ok(h) => h,
                Err(_) => return f64::NEG_INFINITY,
            };
            // energy on the manifold: project first (the raw hat energy is
            // unbounded below as the Robin denominator degenerates)
            match nehari_scale(&self.grid, &hat, &q_eps, eps, self.p) {
                Ok((_, proj)) => -energy_of(&self.grid, &proj, &q_eps, eps, self.p),
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let (best, val) = crate::routh::nelder_mead(
            &objective,
            &[self.x_hat.x1, self.x_hat.x2],
            2.0 * self.grid.h,
            0.05 * self.grid.h,
            1e-13,
        );
        if val.is_finite() {
            Point::new(best[0], best[1])
        } else {
            self.x_hat
        }
    }

    /// Solves the single-sign problem at `eps`. `init` defaults to the
    /// Nehari-projected hat function centered near the Kirchhoff–Routh
    /// maximizer (position refined against the discrete energy).
    pub fn solve(&self, eps: f64, init: Option<&GridField>) -> Result<SolveResult> {
        self.validate_eps(eps)?;
        let q_eps = self.q_eps(eps);
        let inv_eps2 = 1.0 / (eps * eps);
        let h2 = self.grid.h * self.grid.h;
        let p = self.p;

        let start = match init {
            Some(u) => u.clone(),
            None => self.hat_at(eps, self.refined_hat_center(eps))?,
        };
        let (_, mut u) = nehari_scale(&self.grid, &start, &q_eps, eps, p)?;
        let mut energy = energy_of(&self.grid, &u, &q_eps, eps, p);
        // the spec-level hat at the continuum maximizer is the energy
        // reference; never start above it
        if init.is_none() {
            if let Ok(hat0) = self.hat_function(eps) {
                if let Ok((_, u0)) = nehari_scale(&self.grid, &hat0, &q_eps, eps, p) {
                    let e0 = energy_of(&self.grid, &u0, &q_eps, eps, p);
                    if e0 < energy {
                        u = u0;
                        energy = e0;
                    }
                }
            }
        }

        let rhs_of = |u: &GridField| -> GridField {
            GridField {
                vals: u
                    .vals
                    .iter()
                    .zip(&q_eps)
                    .map(|(&ui, &qi)| inv_eps2 * pos(ui - qi).powf(p))
                    .collect(),
            }
        };

        let zb = BoundaryValues::zeros(&self.grid);
        let mut iterations = 0;
        let mut converged = false;
        // θ grows toward 1 after sustained energy decrease, which speeds up
        // the near-neutral core-translation mode; any increase halves it back
        let mut theta_base = self.knobs.damping;
        let mut streak = 0usize;
        for it in 0..self.knobs.max_iters {
            iterations = it + 1;
            let rhs = rhs_of(&u);
            let rhs_norm = norm2(&rhs.vals);
            if rhs_norm == 0.0 {
                return Err(Error::TrivialCollapse);
            }
            let w = self.solver.solve_with_guess(&self.grid, &rhs, &zb, Some(&u))?;
            let (_, tw) = nehari_scale(&self.grid, &w, &q_eps, eps, p)?;

            // damped update with energy control
            let mut theta = theta_base;
            let mut cand;
            let mut e_cand;
            loop {
                cand = GridField {
                    vals: u
                        .vals
                        .iter()
                        .zip(&tw.vals)
                        .map(|(&a, &b)| (1.0 - theta) * a + theta * b)
                        .collect(),
                };
                e_cand = energy_of(&self.grid, &cand, &q_eps, eps, p);
                if e_cand <= energy + 1e-13 * (1.0 + energy.abs()) || theta < 0.02 {
                    break;
                }
                theta *= 0.5;
            }
            if theta < theta_base {
                theta_base = (0.5 * theta_base).max(0.05);
                streak = 0;
            } else {
                streak += 1;
                if streak >= 3 {
                    theta_base = (1.4 * theta_base).min(1.0);
                    streak = 0;
                }
            }
            u = cand;
            let e_prev = energy;
            energy = e_cand;

            // convergence: PDE residual and energy stagnation
            let rhs_new = rhs_of(&u);
            let au = self.solver.apply(&u.vals);
            let res: f64 = au
                .iter()
                .zip(&rhs_new.vals)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den = norm2(&rhs_new.vals);
            if den == 0.0 {
                return Err(Error::TrivialCollapse);
            }
            if res <= self.knobs.pde_tol * den
                && (energy - e_prev).abs() <= self.knobs.energy_tol * (1.0 + energy.abs())
            {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence(format!(
                "Picard iteration cap {} reached",
                self.knobs.max_iters
            )));
        }
        // final exact Nehari projection
        let (_, u) = nehari_scale(&self.grid, &u, &q_eps, eps, p)?;
        let energy = energy_of(&self.grid, &u, &q_eps, eps, p);
        let s = energy_form_zero_bc(&self.grid, &u);
        let fu: f64 = u
            .vals
            .iter()
            .zip(&q_eps)
            .map(|(&ui, &qi)| inv_eps2 * pos(ui - qi).powf(p) * ui)
            .sum::<f64>()
            * h2;
        let nehari_residual = (s - fu).abs() / s.max(1e-300);
        Ok(SolveResult { u, energy, nehari_residual, iterations, converged, eps })
    }

    /// Vorticity diagnostics of a solved field.
    pub fn diagnostics(&self, u: &GridField, eps: f64) -> Result<VortexDiagnostics> {
        let q_eps = self.q_eps(eps);
        diagnostics_impl(&self.grid, u, &q_eps, eps, self.p, 1.0, self.energy(u, eps))
    }

    /// The physical field u + lift (GreenMatched windows only).
    pub fn physical_field(&self, u: &GridField) -> GridField {
        match &self.lift {
            None => u.clone(),
            Some((b, _)) => GridField {
                vals: u.vals.iter().zip(&b.vals).map(|(a, c)| a + c).collect(),
            },
        }
    }
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn interp_or_nearest(grid: &Grid, u: &GridField, b: &BoundaryValues, x: Point) -> f64 {
    let fi = (x.x1 - grid.origin.x1) / grid.h;
    let fj = (x.x2 - grid.origin.x2) / grid.h;
    let (i0, j0) = (fi.floor() as i64, fj.floor() as i64);
    let val = |i: i64, j: i64| {
        grid.node_at(i, j).map(|r| match r {
            NodeRef::Interior(k) => u.vals[k],
            NodeRef::Boundary(k) => b.vals[k],
        })
    };
    match (val(i0, j0), val(i0 + 1, j0), val(i0, j0 + 1), val(i0 + 1, j0 + 1)) {
        (Some(v00), Some(v10), Some(v01), Some(v11)) => {
            let tx = fi - i0 as f64;
            let ty = fj - j0 as f64;
            v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty
                + v11 * tx * ty
        }
        _ => grid.nearest_interior(x).map(|k| u.vals[k]).unwrap_or(0.0),
    }
}

/// E(u) = ½ S(u,u) − ε⁻² h² Σ F(u − q^ε).
fn energy_of(grid: &Grid, u: &GridField, q_eps: &[f64], eps: f64, p: f64) -> f64 {
    let s = energy_form_zero_bc(grid, u);
    let h2 = grid.h * grid.h;
    let inv_eps2 = 1.0 / (eps * eps);
    let f: f64 = u
        .vals
        .iter()
        .zip(q_eps)
        .map(|(&ui, &qi)| pos(ui - qi).powf(p + 1.0) / (p + 1.0))
        .sum();
    0.5 * s - inv_eps2 * h2 * f
}

/// Finds t* > 0 with g(t) = t∫|∇w|² − ε⁻²∫(tw − q^ε)₊^p w = 0 by bracket
/// expansion and bisection, and returns the scaled field t*·w.
///
/// g > 0 for small t (q^ε > 0 truncates f) and g < 0 for large t (p > 1), so
/// a sign change exists whenever w can activate the nonlinearity within the
/// bracket cap.
pub fn nehari_scale(
    grid: &Grid,
    w: &GridField,
    q_eps: &[f64],
    eps: f64,
    p: f64,
) -> Result<(f64, GridField)> {
    let mut wmax = 0.0f64;
    for &v in &w.vals {
        if v < -1e-12 * wmax.max(1.0) {
            return Err(Error::NotNonnegative);
        }
        wmax = wmax.max(v);
    }
    if wmax <= 0.0 {
        return Err(Error::NoPositivePart("field is identically zero".into()));
    }
    let s_ww = energy_form_zero_bc(grid, w);
    let h2 = grid.h * grid.h;
    let inv_eps2 = 1.0 / (eps * eps);
    let g = |t: f64| -> f64 {
        let f: f64 = w
            .vals
            .iter()
            .zip(q_eps)
            .map(|(&wi, &qi)| {
                if wi > 0.0 {
                    pos(t * wi - qi).powf(p) * wi
                } else {
                    0.0
                }
            })
            .sum();
        t * s_ww - inv_eps2 * h2 * f
    };
    // activation threshold: smallest t with a nonempty positive part
    let min_ratio = w
        .vals
        .iter()
        .zip(q_eps)
        .filter(|(&wi, _)| wi > 1e-14 * wmax)
        .map(|(&wi, &qi)| qi / wi)
        .fold(f64::INFINITY, f64::min);
    let cap = 1e6;
    if !min_ratio.is_finite() || min_ratio > cap {
        return Err(Error::NoPositivePart(
            "field cannot activate the nonlinearity within the bracket cap".into(),
        ));
    }
    let mut lo = 0.5 * min_ratio.max(1e-300);
    debug_assert!(g(lo) > 0.0);
    let mut hi = (2.0 * min_ratio).max(1.0);
    let mut grow = 0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        grow += 1;
        if hi > 1e3 * cap || grow > 80 {
            return Err(Error::NoPositivePart(
                "no sign change of the Nehari residual within the bracket cap".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let scaled = GridField { vals: w.vals.iter().map(|&v| t * v).collect() };
    Ok((t, scaled))
}

/// Builds the hat function û = U_κ̂((·−x̂)/ε) + κ̂(log(1/(ε ρ̂))/2π + H(x̂,·))
/// inside the core, κ̂ G(x̂,·) outside.
fn hat_field(
    grid: &Grid,
    green: &GreenEvaluator,
    profile: &Arc<RadialProfile>,
    kappa: f64,
    eps: f64,
    x_hat: Point,
    q_eps_at_hat: f64,
) -> Result<GridField> {
    let pk = profile_for_kappa(profile, kappa)?;
    let h_hat = green.robin(x_hat)?;
    let denom = (1.0 / (eps * pk.rho)).ln() / TWO_PI + h_hat;
    if denom <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "eps = {eps} too large for the hat construction (denominator {denom:.3e})"
        )));
    }
    let kappa_hat = q_eps_at_hat / denom;
    if !(kappa_hat > 0.0) {
        return Err(Error::InvalidSpec("hat circulation not positive".into()));
    }
    let pk_hat = profile_for_kappa(profile, kappa_hat)?;
    let core = eps * pk_hat.rho;
    let tail_const = (1.0 / (eps * pk_hat.rho)).ln() / TWO_PI;
    let mut vals = Vec::with_capacity(grid.n_interior());
    for k in 0..grid.n_interior() {
        let x = grid.interior_pos(k);
        let r = x.dist(x_hat);
        let v = if r < core {
            let h_off = green.regular_part(x_hat, x)?;
            pk_hat.u(r / eps) + kappa_hat * (tail_const + h_off)
        } else {
            kappa_hat * green.green(x_hat, x)?
        };
        vals.push(pos(v));
    }
    Ok(GridField { vals })
}

/// Outcome of a single-sign solve.
#[derive(Clone, Debug)]
pub struct SolveResult {
    /// The H¹₀ field (add the problem's lift for the physical field on
    /// GreenMatched windows).
    pub u: GridField,
    pub energy: f64,
    /// |⟨dE(u), u⟩| / ∫|∇u|².
    pub nehari_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub eps: f64,
}

/// Measured vorticity quantities of a solved field.
#[derive(Clone, Debug, serde::Serialize)]
pub struct VortexDiagnostics {
    /// Node count of the vorticity set A^ε = {u > q^ε}.
    pub a_count: usize,
    /// Total vorticity κ^ε = h² Σ ω (signed).
    pub kappa_eps: f64,
    /// Center of vorticity, absent when the set is empty.
    centroid: Option<(f64, f64)>,
    /// Largest disc about the centroid inside A^ε.
    pub r_bar: f64,
    /// Smallest disc about the centroid containing A^ε.
    pub r_ring: f64,
    /// Max pairwise distance of A^ε nodes.
    pub diam: f64,
    /// 4-connected component count of A^ε.
    pub components: usize,
    /// E^ε(u).
    pub energy: f64,
}

impl VortexDiagnostics {
    pub fn centroid(&self) -> Result<Point> {
        self.centroid
            .map(|(a, b)| Point::new(a, b))
            .ok_or(Error::EmptyVorticity)
    }

    pub fn is_empty(&self) -> bool {
        self.centroid.is_none()
    }
}

fn diagnostics_impl(
    grid: &Grid,
    u: &GridField,
    q_eps: &[f64],
    eps: f64,
    p: f64,
    sign: f64,
    energy: f64,
) -> Result<VortexDiagnostics> {
    let inv_eps2 = 1.0 / (eps * eps);
    let h2 = grid.h * grid.h;
    let mut a_nodes = Vec::new();
    let mut kappa_eps = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for k in 0..grid.n_interior() {
        let excess = sign * (u.vals[k] - q_eps[k]);
        if excess > 0.0 {
            let w = sign * inv_eps2 * excess.powf(p);
            a_nodes.push(k);
            kappa_eps += w * h2;
            let x = grid.interior_pos(k);
            cx += x.x1 * w * h2;
            cy += x.x2 * w * h2;
        }
    }
    if a_nodes.is_empty() || kappa_eps == 0.0 {
        return Ok(VortexDiagnostics {
            a_count: 0,
            kappa_eps: 0.0,
            centroid: None,
            r_bar: 0.0,
            r_ring: 0.0,
            diam: 0.0,
            components: 0,
            energy,
        });
    }
    let centroid = Point::new(cx / kappa_eps, cy / kappa_eps);
    let in_a: std::collections::HashSet<(u32, u32)> =
        a_nodes.iter().map(|&k| grid.interior_latt(k)).collect();
    // r_bar: nearest node (interior complement or boundary) outside A
    let mut r_bar = f64::INFINITY;
    for k in 0..grid.n_interior() {
        if !in_a.contains(&grid.interior_latt(k)) {
            r_bar = r_bar.min(grid.interior_pos(k).dist(centroid));
        }
    }
    for b in grid.boundary_nodes() {
        r_bar = r_bar.min(b.pos.dist(centroid));
    }
    let mut r_ring = 0.0f64;
    let pts: Vec<Point> = a_nodes.iter().map(|&k| grid.interior_pos(k)).collect();
    for p in &pts {
        r_ring = r_ring.max(p.dist(centroid));
    }
    let diam = hull_diameter(&pts);
    let components = count_components(grid, &in_a, &a_nodes);
    Ok(VortexDiagnostics {
        a_count: a_nodes.len(),
        kappa_eps,
        centroid: Some((centroid.x1, centroid.x2)),
        r_bar,
        r_ring,
        diam,
        components,
        energy,
    })
}

fn count_components(
    grid: &Grid,
    in_a: &std::collections::HashSet<(u32, u32)>,
    a_nodes: &[usize],
) -> usize {
    let mut seen: std::collections::HashSet<(u32, u32)> = std::collections::HashSet::new();
    let mut comps = 0;
    for &k in a_nodes {
        let start = grid.interior_latt(k);
        if seen.contains(&start) {
            continue;
        }
        comps += 1;
        let mut stack = vec![start];
        seen.insert(start);
        while let Some((i, j)) = stack.pop() {
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 {
                    continue;
                }
                let key = (ni as u32, nj as u32);
                if in_a.contains(&key) && !seen.contains(&key) {
                    seen.insert(key);
                    stack.push(key);
                }
            }
        }
    }
    comps
}

/// Max pairwise distance via the convex hull.
fn hull_diameter(pts: &[Point]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let mut sorted: Vec<Point> = pts.to_vec();
    sorted.sort_by(|a, b| (a.x1, a.x2).partial_cmp(&(b.x1, b.x2)).unwrap());
    let cross = |o: Point, a: Point, b: Point| {
        (a.x1 - o.x1) * (b.x2 - o.x2) - (a.x2 - o.x2) * (b.x1 - o.x1)
    };
    let mut hull: Vec<Point> = Vec::new();
    for &p in sorted.iter().chain(sorted.iter().rev()) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let mut d = 0.0f64;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            d = d.max(hull[i].dist(hull[j]));
        }
    }
    d
}

/// One point of an ε-sweep.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub kappa_eps: f64,
    pub x_eps: (f64, f64),
    pub r_bar: f64,
    pub r_ring: f64,
    pub diam: f64,
    pub components: usize,
    pub energy: f64,
    /// E^ε − (κ²/4π) log(1/ε).
    pub energy_shifted: f64,
    /// diam(A^ε) / (2 ε ρ_κ).
    pub core_over_rho: f64,
    pub iterations: usize,
}

/// Report of an ε-sweep against the asymptotic expansions.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Least-squares fit κ^ε ≈ c1 + c2 / log(1/ε).
    pub fit_c1: f64,
    pub fit_c2: f64,
    pub fit_residual: f64,
    /// 2π (q(x*) − κH(x*,x*) − (κ/2π) log(1/ρ_κ)).
    pub c2_expected: f64,
    /// Aitken extrapolation of the shifted energies.
    pub energy_limit: f64,
    /// −W(x*) + 𝒞.
    pub energy_target: f64,
    pub rho_kappa: f64,
    pub argmax: (f64, f64),
    pub w_star: f64,
}

/// Solves a decreasing ε-list (warm-starting each solve from the previous
/// solution) and fits the expansions of the total vorticity and the energy.
pub fn epsilon_sweep(prob: &SingleProblem, eps_list: &[f64]) -> Result<SweepReport> {
    if eps_list.len() < 3 {
        return Err(Error::InsufficientPoints { need: 3, got: eps_list.len() });
    }
    for w in eps_list.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::InvalidSpec("eps list must be strictly decreasing".into()));
        }
    }
    let pk = profile_for_kappa(&prob.profile, prob.kappa)?;
    let mut points = Vec::new();
    let mut prev: Option<GridField> = None;
    for &eps in eps_list {
        let res = prob.solve(eps, prev.as_ref())?;
        let diag = prob.diagnostics(&res.u, eps)?;
        let x_eps = diag.centroid()?;
        let shifted =
            res.energy - prob.kappa * prob.kappa / (4.0 * std::f64::consts::PI) * (1.0 / eps).ln();
        points.push(SweepPoint {
            eps,
            kappa_eps: diag.kappa_eps,
            x_eps: (x_eps.x1, x_eps.x2),
            r_bar: diag.r_bar,
            r_ring: diag.r_ring,
            diam: diag.diam,
            components: diag.components,
            energy: res.energy,
            energy_shifted: shifted,
            core_over_rho: diag.diam / (2.0 * eps * pk.rho),
            iterations: res.iterations,
        });
        prev = Some(res.u);
    }

    // least squares kappa^eps = c1 + c2 / L
    let (c1, c2, resid) = fit_affine_in_inv_log(
        eps_list,
        &points.iter().map(|p| p.kappa_eps).collect::<Vec<_>>(),
    );
    let h_star = prob.green.robin(prob.x_hat)?;
    let q_star = prob.background.q_at(prob.x_hat);
    let c2_expected = TWO_PI
        * (q_star - prob.kappa * h_star - prob.kappa / TWO_PI * (1.0 / pk.rho).ln());

    // Aitken on the last three shifted energies
    let n = points.len();
    let (e0, e1, e2) = (
        points[n - 3].energy_shifted,
        points[n - 2].energy_shifted,
        points[n - 1].energy_shifted,
    );
    let denom = (e2 - e1) - (e1 - e0);
    let energy_limit = if denom.abs() > 1e-14 * (1.0 + e2.abs()) {
        e2 - (e2 - e1) * (e2 - e1) / denom
    } else {
        e2
    };
    let energy_target = -prob.w_star + crate::radial_profile::limit_constant(&pk);

    Ok(SweepReport {
        points,
        fit_c1: c1,
        fit_c2: c2,
        fit_residual: resid,
        c2_expected,
        energy_limit,
        energy_target,
        rho_kappa: pk.rho,
        argmax: (prob.x_hat.x1, prob.x_hat.x2),
        w_star: prob.w_star,
    })
}

fn fit_affine_in_inv_log(eps: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let xs: Vec<f64> = eps.iter().map(|&e| 1.0 / (1.0 / e).ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = xs.iter().zip(y).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    let c1 = (sxx * sy - sx * sxy) / det;
    let c2 = (n * sxy - sx * sy) / det;
    let resid = xs
        .iter()
        .zip(y)
        .map(|(x, y)| (y - c1 - c2 * x) * (y - c1 - c2 * x))
        .sum::<f64>()
        .sqrt();
    (c1, c2, resid)
}

/// A vortex-pair problem instance.
pub struct PairProblem {
    pub domain: Domain,
    pub grid: Arc<Grid>,
    pub solver: Poisson,
    pub p: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub background: BackgroundField,
    pub green: Arc<GreenEvaluator>,
    pub profile: Arc<RadialProfile>,
    pub knobs: SolverKnobs,
    pub x_hat_plus: Point,
    pub x_hat_minus: Point,
    q_nodes: Vec<f64>,
}

/// Outcome of a pair solve.
#[derive(Clone, Debug)]
pub struct PairSolveResult {
    pub u: GridField,
    pub energy: f64,
    /// |⟨dE(u), u₊⟩| / ∫|∇u₊|² and the minus analogue.
    pub nodal_residual_plus: f64,
    pub nodal_residual_minus: f64,
    pub iterations: usize,
    pub converged: bool,
    pub eps_plus: f64,
    pub eps_minus: f64,
}

/// Diagnostics of both signed cores.
#[derive(Clone, Debug, serde::Serialize)]
pub struct PairDiagnostics {
    pub plus: VortexDiagnostics,
    pub minus: VortexDiagnostics,
    pub energy: f64,
}

impl PairProblem {
    pub fn new(
        domain: &Domain,
        h: f64,
        p: f64,
        kappa_plus: f64,
        kappa_minus: f64,
        background: BackgroundField,
        green: Arc<GreenEvaluator>,
    ) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::UnsupportedExponent(p));
        }
        if !(kappa_plus > 0.0 && kappa_minus < 0.0) {
            return Err(Error::InvalidSpec(format!(
                "pair mode needs kappa_plus > 0 > kappa_minus, got {kappa_plus}, {kappa_minus}"
            )));
        }
        let grid = match green.grid() {
            Some(g) if (g.h - h).abs() < 1e-12 => g.clone(),
            _ => Arc::new(crate::domain::discretize(domain, h)?),
        };
        let solver = Poisson::new(&grid);
        let profile = Arc::new(solve_unit_profile(p)?);
        let cfg = RouthConfig::pair(green.clone(), kappa_plus, kappa_minus, background.clone())?;
        let max = routh_maximize(&cfg)?;
        let q_nodes: Vec<f64> =
            (0..grid.n_interior()).map(|k| background.q_at(grid.interior_pos(k))).collect();
        Ok(PairProblem {
            domain: domain.clone(),
            grid,
            solver,
            p,
            kappa_plus,
            kappa_minus,
            background,
            green,
            profile,
            knobs: SolverKnobs::default(),
            x_hat_plus: max.points[0],
            x_hat_minus: max.points[1],
            q_nodes,
        })
    }

    pub fn q_eps_plus(&self, eps: f64) -> Vec<f64> {
        let shift = self.kappa_plus / TWO_PI * (1.0 / eps).ln();
        self.q_nodes.iter().map(|q| q + shift).collect()
    }

    pub fn q_eps_minus(&self, eps: f64) -> Vec<f64> {
        let shift = self.kappa_minus / TWO_PI * (1.0 / eps).ln();
        self.q_nodes.iter().map(|q| q + shift).collect()
    }

    fn validate(&self, eps_plus: f64, eps_minus: f64) -> Result<()> {
        if !(eps_plus > 0.0 && eps_minus > 0.0) {
            return Err(Error::InvalidSpec("eps must be positive".into()));
        }
        let ratio = eps_plus.ln() / eps_minus.ln();
        if !(0.1..=10.0).contains(&ratio) {
            return Err(Error::InvalidSpec(format!(
                "log eps ratio {ratio:.3} outside the bounded-ratio window"
            )));
        }
        for (kappa, eps) in [(self.kappa_plus, eps_plus), (-self.kappa_minus, eps_minus)] {
            let pk = profile_for_kappa(&self.profile, kappa)?;
            let core = eps * pk.rho;
            let min = 6.0 * self.grid.h;
            if core < min {
                return Err(Error::GridTooCoarseForCore { core, min });
            }
        }
        let qp = self.q_eps_plus(eps_plus);
        if qp.iter().cloned().fold(f64::INFINITY, f64::min) < 0.0 {
            return Err(Error::InvalidSpec("q^eps_+ must be nonnegative".into()));
        }
        let qm = self.q_eps_minus(eps_minus);
        if qm.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > 0.0 {
            return Err(Error::InvalidSpec("q^eps_- must be nonpositive".into()));
        }
        Ok(())
    }

    /// Hat difference at given centers.
    fn pair_hat_at(
        &self,
        eps_plus: f64,
        eps_minus: f64,
        x_plus: Point,
        x_minus: Point,
    ) -> Result<GridField> {
        let qp_hat =
            self.background.q_at(x_plus) + self.kappa_plus / TWO_PI * (1.0 / eps_plus).ln();
        let hat_p = hat_field(
            &self.grid,
            &self.green,
            &self.profile,
            self.kappa_plus,
            eps_plus,
            x_plus,
            qp_hat,
        )?;
        let qm_hat =
            -(self.background.q_at(x_minus) + self.kappa_minus / TWO_PI * (1.0 / eps_minus).ln());
        let hat_m = hat_field(
            &self.grid,
            &self.green,
            &self.profile,
            -self.kappa_minus,
            eps_minus,
            x_minus,
            qm_hat,
        )?;
        Ok(GridField {
            vals: hat_p.vals.iter().zip(&hat_m.vals).map(|(a, b)| a - b).collect(),
        })
    }

    /// Pair initializer with the centers refined against the discrete energy
    /// (the continuum maximizer sits O(h) from the discrete optimum).
    fn refined_pair_hat(&self, eps_plus: f64, eps_minus: f64) -> Result<GridField> {
        let qp = self.q_eps_plus(eps_plus);
        let qm = self.q_eps_minus(eps_minus);
        let objective = |c: &[f64]| -> f64 {
            let xp = Point::new(c[0], c[1]);
            let xm = Point::new(c[2], c[3]);
            if !self.domain.contains(xp) || !self.domain.contains(xm) {
                return f64::NEG_INFINITY;
            }
            if xp.dist(xm) < 4.0 * self.grid.h {
                return f64::NEG_INFINITY;
            }
            let u = match self.pair_hat_at(eps_plus, eps_minus, xp, xm) {
                Ok(u) => u,
                Err(_) => return f64::NEG_INFINITY,
            };
            match self.project(&u, &qp, &qm, eps_plus, eps_minus) {
                Ok((tp, tm)) => {
                    let proj = recombine(&u, tp, tm);
                    -self.energy(&proj, eps_plus, eps_minus)
                }
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let start = [
            self.x_hat_plus.x1,
            self.x_hat_plus.x2,
            self.x_hat_minus.x1,
            self.x_hat_minus.x2,
        ];
        let (best, val) =
            crate::routh::nelder_mead(&objective, &start, 2.0 * self.grid.h, 0.05 * self.grid.h, 1e-13);
        let (xp, xm) = if val.is_finite() {
            (Point::new(best[0], best[1]), Point::new(best[2], best[3]))
        } else {
            (self.x_hat_plus, self.x_hat_minus)
        };
        if std::env::var_os("VORTEX2D_TRACE").is_some() {
            eprintln!(
                "pair init: routh ({:.4},{:.4})/({:.4},{:.4}) refined ({:.4},{:.4})/({:.4},{:.4}) val {val:.6e}",
                self.x_hat_plus.x1, self.x_hat_plus.x2, self.x_hat_minus.x1, self.x_hat_minus.x2,
                xp.x1, xp.x2, xm.x1, xm.x2
            );
        }
        self.pair_hat_at(eps_plus, eps_minus, xp, xm)
    }

    /// Total pair energy
    /// E(u) = ½S(u,u) − ε₊⁻²h²ΣF(u−q₊) − ε₋⁻²h²ΣF(q₋−u).
    pub fn energy(&self, u: &GridField, eps_plus: f64, eps_minus: f64) -> f64 {
        let qp = self.q_eps_plus(eps_plus);
        let qm = self.q_eps_minus(eps_minus);
        let s = energy_form_zero_bc(&self.grid, u);
        let h2 = self.grid.h * self.grid.h;
        let p = self.p;
        let mut fsum = 0.0;
        for k in 0..u.vals.len() {
            fsum += pos(u.vals[k] - qp[k]).powf(p + 1.0) / (p + 1.0) / (eps_plus * eps_plus);
            fsum += pos(qm[k] - u.vals[k]).powf(p + 1.0) / (p + 1.0) / (eps_minus * eps_minus);
        }
        0.5 * s - h2 * fsum
    }

    /// Solves the pair problem; `init` defaults to the difference of two hat
    /// functions at the pair maximizer.
    pub fn solve(
        &self,
        eps_plus: f64,
        eps_minus: f64,
        init: Option<&GridField>,
    ) -> Result<PairSolveResult> {
        self.validate(eps_plus, eps_minus)?;
        let qp = self.q_eps_plus(eps_plus);
        let qm = self.q_eps_minus(eps_minus);
        let p = self.p;
        let (iep2, iem2) = (1.0 / (eps_plus * eps_plus), 1.0 / (eps_minus * eps_minus));

        let mut u = match init {
            Some(f) => f.clone(),
            None => self.refined_pair_hat(eps_plus, eps_minus)?,
        };
        // project the initializer onto the nodal Nehari set
        let (tp, tm) = self.project(&u, &qp, &qm, eps_plus, eps_minus)?;
        u = recombine(&u, tp, tm);
        let mut energy = self.energy(&u, eps_plus, eps_minus);

        let rhs_of = |u: &GridField| -> GridField {
            GridField {
                vals: (0..u.vals.len())
                    .map(|k| {
                        iep2 * pos(u.vals[k] - qp[k]).powf(p)
                            - iem2 * pos(qm[k] - u.vals[k]).powf(p)
                    })
                    .collect(),
            }
        };

        let zb = BoundaryValues::zeros(&self.grid);
        let mut iterations = 0;
        let mut converged = false;
        let mut theta_base = self.knobs.damping;
        let mut streak = 0usize;
        for it in 0..self.knobs.max_iters {
            iterations = it + 1;
            let rhs = rhs_of(&u);
            if norm2(&rhs.vals) == 0.0 {
                return Err(Error::TrivialCollapse);
            }
            let w = self.solver.solve_with_guess(&self.grid, &rhs, &zb, Some(&u))?;
            let (tp, tm) = self.project(&w, &qp, &qm, eps_plus, eps_minus)?;
            let scaled = recombine(&w, tp, tm);

            let mut theta = theta_base;
            let mut cand;
            let mut e_cand;
            loop {
                cand = GridField {
                    vals: u
                        .vals
                        .iter()
                        .zip(&scaled.vals)
                        .map(|(&a, &b)| (1.0 - theta) * a + theta * b)
                        .collect(),
                };
                e_cand = self.energy(&cand, eps_plus, eps_minus);
                if e_cand <= energy + 1e-13 * (1.0 + energy.abs()) || theta < 0.02 {
                    break;
                }
                theta *= 0.5;
            }
            if theta < theta_base {
                theta_base = (0.5 * theta_base).max(0.05);
                streak = 0;
            } else {
                streak += 1;
                if streak >= 3 {
                    theta_base = (1.4 * theta_base).min(1.0);
                    streak = 0;
                }
            }
            u = cand;
            let e_prev = energy;
            energy = e_cand;

            let rhs_new = rhs_of(&u);
            let au = self.solver.apply(&u.vals);
            let res: f64 = au
                .iter()
                .zip(&rhs_new.vals)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den = norm2(&rhs_new.vals);
            if den == 0.0 {
                return Err(Error::TrivialCollapse);
            }
            if std::env::var_os("VORTEX2D_TRACE").is_some() {
                eprintln!(
                    "pair it {it}: energy {energy:.10e} dE {:.3e} res/den {:.3e} theta {theta:.3} t=({tp:.6},{tm:.6})",
                    energy - e_prev,
                    res / den
                );
            }
            if res <= self.knobs.pde_tol * den
                && (energy - e_prev).abs() <= self.knobs.energy_tol * (1.0 + energy.abs())
            {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence(format!(
                "pair Picard iteration cap {} reached",
                self.knobs.max_iters
            )));
        }
        // final exact nodal projection and residuals
        let (tp, tm) = self.project(&u, &qp, &qm, eps_plus, eps_minus)?;
        let u = recombine(&u, tp, tm);
        let energy = self.energy(&u, eps_plus, eps_minus);
        let (rp, rm) = self.nodal_residuals(&u, &qp, &qm, eps_plus, eps_minus);
        Ok(PairSolveResult {
            u,
            energy,
            nodal_residual_plus: rp,
            nodal_residual_minus: rm,
            iterations,
            converged,
            eps_plus,
            eps_minus,
        })
    }

    /// Locates (t₊, t₋) zeroing both nodal Nehari residuals of
    /// u = t₊w₊ − t₋w₋ by nested bisection (the sign configuration of the
    /// Poincaré–Miranda rectangle).
    fn project(
        &self,
        w: &GridField,
        qp: &[f64],
        qm: &[f64],
        eps_plus: f64,
        eps_minus: f64,
    ) -> Result<(f64, f64)> {
        let grid = &self.grid;
        let wp = GridField { vals: w.vals.iter().map(|&v| pos(v)).collect() };
        let wm = GridField { vals: w.vals.iter().map(|&v| pos(-v)).collect() };
        if wp.vals.iter().all(|&v| v == 0.0) || wm.vals.iter().all(|&v| v == 0.0) {
            return Err(Error::NoSignChange);
        }
        let s_pp = energy_form_zero_bc(grid, &wp);
        let s_mm = energy_form_zero_bc(grid, &wm);
        let zb = BoundaryValues::zeros(grid);
        let s_pm = crate::poisson::energy_form(grid, &wp, &zb, &wm, &zb);
        let h2 = grid.h * grid.h;
        let p = self.p;
        let iep2 = 1.0 / (eps_plus * eps_plus);
        let iem2 = 1.0 / (eps_minus * eps_minus);

        // R_+(t+, t-)/t+ and R_-(t+, t-)/t-
        let f_plus = |tp: f64| -> f64 {
            wp.vals
                .iter()
                .zip(qp)
                .map(|(&wi, &qi)| if wi > 0.0 { pos(tp * wi - qi).powf(p) * wi } else { 0.0 })
                .sum::<f64>()
                * h2
                * iep2
        };
        let f_minus = |tm: f64| -> f64 {
            wm.vals
                .iter()
                .zip(qm)
                .map(|(&wi, &qi)| if wi > 0.0 { pos(tm * wi + qi).powf(p) * wi } else { 0.0 })
                .sum::<f64>()
                * h2
                * iem2
        };
        let r_plus = |tp: f64, tm: f64| tp * s_pp - tm * s_pm - f_plus(tp);
        let r_minus = |tp: f64, tm: f64| tm * s_mm - tp * s_pm - f_minus(tm);

        let wp_max = wp.vals.iter().cloned().fold(0.0f64, f64::max);
        let wm_max = wm.vals.iter().cloned().fold(0.0f64, f64::max);
        let ratio_p = wp
            .vals
            .iter()
            .zip(qp)
            .filter(|(&wi, _)| wi > 1e-14 * wp_max)
            .map(|(&wi, &qi)| qi / wi)
            .fold(f64::INFINITY, f64::min);
        let ratio_m = wm
            .vals
            .iter()
            .zip(qm)
            .filter(|(&wi, _)| wi > 1e-14 * wm_max)
            .map(|(&wi, &qi)| -qi / wi)
            .fold(f64::INFINITY, f64::min);
        if !ratio_p.is_finite() || !ratio_m.is_finite() {
            return Err(Error::NoSignChange);
        }

        let solve_tp = |tm: f64| -> Result<f64> {
            let mut lo = 0.5 * ratio_p.max(1e-300);
            let mut hi = (2.0 * ratio_p).max(1.0);
            let mut grow = 0;
            while r_plus(hi, tm) > 0.0 {
                hi *= 2.0;
                grow += 1;
                if grow > 80 {
                    return Err(Error::NoSignChange);
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if r_plus(mid, tm) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-13 * hi {
                    break;
                }
            }
            Ok(0.5 * (lo + hi))
        };

        // outer bisection on t-
        let phi = |tm: f64| -> Result<f64> { Ok(r_minus(solve_tp(tm)?, tm)) };
        let mut lo = 0.5 * ratio_m.max(1e-300);
        let mut hi = (2.0 * ratio_m).max(1.0);
        if phi(lo)? <= 0.0 {
            lo *= 1e-3;
            if phi(lo)? <= 0.0 {
                return Err(Error::NoSignChange);
            }
        }
        let mut grow = 0;
        while phi(hi)? > 0.0 {
            hi *= 2.0;
            grow += 1;
            if grow > 80 {
                return Err(Error::NoSignChange);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        let tm = 0.5 * (lo + hi);
        let tp = solve_tp(tm)?;
        Ok((tp, tm))
    }

    fn nodal_residuals(
        &self,
        u: &GridField,
        qp: &[f64],
        qm: &[f64],
        eps_plus: f64,
        eps_minus: f64,
    ) -> (f64, f64) {
        let grid = &self.grid;
        let up = GridField { vals: u.vals.iter().map(|&v| pos(v)).collect() };
        let um = GridField { vals: u.vals.iter().map(|&v| pos(-v)).collect() };
        let zb = BoundaryValues::zeros(grid);
        let s_up = crate::poisson::energy_form(grid, u, &zb, &up, &zb);
        let s_um = crate::poisson::energy_form(grid, u, &zb, &um, &zb);
        let h2 = grid.h * grid.h;
        let p = self.p;
        let iep2 = 1.0 / (eps_plus * eps_plus);
        let iem2 = 1.0 / (eps_minus * eps_minus);
        let mut fp = 0.0;
        let mut fm = 0.0;
        for k in 0..u.vals.len() {
            let fpk = iep2 * pos(u.vals[k] - qp[k]).powf(p);
            let fmk = iem2 * pos(qm[k] - u.vals[k]).powf(p);
            fp += (fpk - fmk) * up.vals[k];
            fm += (fpk - fmk) * um.vals[k];
        }
        fp *= h2;
        fm *= h2;
        let den_p = energy_form_zero_bc(grid, &up).max(1e-300);
        let den_m = energy_form_zero_bc(grid, &um).max(1e-300);
        (((s_up - fp) / den_p).abs(), ((s_um - fm) / den_m).abs())
    }

    /// Diagnostics of both cores.
    pub fn diagnostics(
        &self,
        u: &GridField,
        eps_plus: f64,
        eps_minus: f64,
    ) -> Result<PairDiagnostics> {
        let qp = self.q_eps_plus(eps_plus);
        let qm = self.q_eps_minus(eps_minus);
        let energy = self.energy(u, eps_plus, eps_minus);
        let plus = diagnostics_impl(&self.grid, u, &qp, eps_plus, self.p, 1.0, energy)?;
        let minus = diagnostics_impl(&self.grid, u, &qm, eps_minus, self.p, -1.0, energy)?;
        Ok(PairDiagnostics { plus, minus, energy })
    }
}

fn recombine(w: &GridField, tp: f64, tm: f64) -> GridField {
    GridField {
        vals: w
            .vals
            .iter()
            .map(|&v| if v >= 0.0 { tp * v } else { tm * v })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_domain, DomainKind};

    const PI: f64 = std::f64::consts::PI;

    fn disc_problem(h: f64, kappa: f64) -> SingleProblem {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let green = Arc::new(GreenEvaluator::analytic(&d).unwrap());
        SingleProblem::new(
            &d,
            h,
            3.0,
            kappa,
            BackgroundField::zero(),
            green,
            ArtificialBc::Zero,
            None,
        )
        .unwrap()
    }

    #[test]
    fn nehari_scale_residual_and_errors() {
        let prob = disc_problem(1.0 / 32.0, 2.0 * PI);
        let eps = 0.1;
        let q = prob.q_eps(eps);
        // a smooth bump comfortably above threshold reach
        let w = GridField::from_fn(&prob.grid, |p| (1.0 - p.norm_sq()).max(0.0));
        let (t, tw) = nehari_scale(&prob.grid, &w, &q, eps, 3.0).unwrap();
        assert!(t > 0.0);
        let s = energy_form_zero_bc(&prob.grid, &tw);
        let h2 = prob.grid.h * prob.grid.h;
        let fu: f64 = tw
            .vals
            .iter()
            .zip(&q)
            .map(|(&ui, &qi)| (ui - qi).max(0.0).powf(3.0) * ui)
            .sum::<f64>()
            * h2
            / (eps * eps);
        assert!((s - fu).abs() <= 1e-9 * s, "residual {} vs {}", s, fu);

        // negative field rejected
        let bad = GridField::from_fn(&prob.grid, |p| -p.x1.abs() - 0.1);
        assert!(matches!(
            nehari_scale(&prob.grid, &bad, &q, eps, 3.0),
            Err(Error::NotNonnegative)
        ));
        // hopelessly small field cannot activate within the cap
        let tiny = GridField::from_fn(&prob.grid, |p| 1e-9 * (1.0 - p.norm_sq()).max(0.0));
        // min q/w is ~3e9 > 1e6 cap
        assert!(matches!(
            nehari_scale(&prob.grid, &tiny, &q, eps, 3.0),
            Err(Error::NoPositivePart(_))
        ));
    }

    #[test]
    fn solve_single_disc_small() {
        let prob = disc_problem(1.0 / 64.0, 2.0 * PI);
        let eps = 0.1;
        let res = prob.solve(eps, None).unwrap();
        assert!(res.converged);
        // positivity (discrete maximum principle)
        assert!(res.u.vals.iter().all(|&v| v >= 0.0));
        // Nehari identity at convergence
        assert!(res.nehari_residual < 1e-8, "nehari residual {}", res.nehari_residual);
        let diag = prob.diagnostics(&res.u, eps).unwrap();
        assert_eq!(diag.components, 1);
        // symmetric data concentrates at the center
        let c = diag.centroid().unwrap();
        assert!(c.norm() < 2.0 * prob.grid.h, "centroid {c:?}");
        // energy dominance over the projected hat initializer
        let hat = prob.hat_function(eps).unwrap();
        let q = prob.q_eps(eps);
        let (_, hat_proj) = nehari_scale(&prob.grid, &hat, &q, eps, 3.0).unwrap();
        let e_hat = prob.energy(&hat_proj, eps);
        assert!(
            res.energy <= e_hat,
            "solver energy {} should not exceed hat energy {}",
            res.energy,
            e_hat
        );
    }

    #[test]
    fn q_eps_negative_rejected() {
        // kappa small and eps close to 1 leaves q^eps < 0 for negative q
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let green = Arc::new(GreenEvaluator::analytic(&d).unwrap());
        let prob = SingleProblem::new(
            &d,
            1.0 / 32.0,
            3.0,
            2.0 * PI,
            BackgroundField::from_closure(|p| -2.0 * p.norm_sq(), None),
            green,
            ArtificialBc::Zero,
            None,
        )
        .unwrap();
        // eps = 0.9: shift = kappa/2pi * log(1/0.9) ≈ 0.105 < 2 → q^eps < 0
        // (core guard passes: 0.9 * 2.645 > 6h)
        assert!(matches!(prob.solve(0.9, None), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn core_resolution_guard() {
        let prob = disc_problem(1.0 / 32.0, 2.0 * PI);
        // eps*rho = 0.0265 < 6/32
        assert!(matches!(
            prob.solve(0.01, None),
            Err(Error::GridTooCoarseForCore { .. })
        ));
    }

    #[test]
    fn diagnostics_synthetic() {
        let prob = disc_problem(1.0 / 32.0, 2.0 * PI);
        let eps = 0.1;
        // field below threshold: empty vorticity
        let flat = GridField::from_fn(&prob.grid, |_| 0.1);
        let d0 = prob.diagnostics(&flat, eps).unwrap();
        assert!(d0.is_empty());
        assert_eq!(d0.kappa_eps, 0.0);
        assert!(matches!(d0.centroid(), Err(Error::EmptyVorticity)));
        // two synthetic bumps over threshold: 2 components
        let q = prob.q_eps(eps);
        let qmax = q.iter().cloned().fold(0.0f64, f64::max);
        let bumps = GridField::from_fn(&prob.grid, |p| {
            let b1 = (0.02 - (p - Point::new(0.4, 0.0)).norm_sq()).max(0.0);
            let b2 = (0.02 - (p + Point::new(0.4, 0.0)).norm_sq()).max(0.0);
            qmax + 100.0 * (b1 + b2)
        });
        let d2 = prob.diagnostics(&bumps, eps).unwrap();
        assert_eq!(d2.components, 2);
        assert!(d2.kappa_eps > 0.0);
    }

    #[test]
    fn hat_core_localization() {
        let prob = disc_problem(1.0 / 64.0, 2.0 * PI);
        let eps = 0.05;
        let hat = prob.hat_function(eps).unwrap();
        let diag = prob.diagnostics(&hat, eps).unwrap();
        assert!(!diag.is_empty());
        let c = diag.centroid().unwrap();
        assert!(c.dist(prob.x_hat) < prob.grid.h, "centroid {c:?} vs {:?}", prob.x_hat);
        // A^eps within a C*eps ball
        let pk = profile_for_kappa(&prob.profile, prob.kappa).unwrap();
        assert!(diag.r_ring < 2.0 * eps * pk.rho, "r_ring {} vs {}", diag.r_ring, eps * pk.rho);
    }

    #[test]
    fn pair_mode_contract() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let green = Arc::new(GreenEvaluator::analytic(&d).unwrap());
        assert!(PairProblem::new(
            &d,
            1.0 / 32.0,
            3.0,
            2.0 * PI,
            2.0 * PI,
            BackgroundField::zero(),
            green,
        )
        .is_err());
    }

    #[test]
    fn pair_solve_symmetric() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let green = Arc::new(GreenEvaluator::analytic(&d).unwrap());
        let prob = PairProblem::new(
            &d,
            1.0 / 64.0,
            3.0,
            2.0 * PI,
            -2.0 * PI,
            BackgroundField::zero(),
            green,
        )
        .unwrap();
        let res = prob.solve(0.1, 0.1, None).unwrap();
        assert!(res.converged);
        assert!(res.nodal_residual_plus < 1e-8, "r+ {}", res.nodal_residual_plus);
        assert!(res.nodal_residual_minus < 1e-8, "r- {}", res.nodal_residual_minus);
        let diag = prob.diagnostics(&res.u, 0.1, 0.1).unwrap();
        let cp = diag.plus.centroid().unwrap();
        let cm = diag.minus.centroid().unwrap();
        // mirror symmetry under the reflection symmetry of the data
        let mirror = Point::new(cm.x1, -cm.x2);
        let mirror2 = Point::new(-cm.x1, cm.x2);
        let d1 = cp.dist(mirror);
        let d2 = cp.dist(mirror2);
        assert!(
            d1 < 2.5 * prob.grid.h || d2 < 2.5 * prob.grid.h,
            "centroids {cp:?} {cm:?} not mirror-symmetric"
        );
        assert!(diag.plus.kappa_eps > 0.0);
        assert!(diag.minus.kappa_eps < 0.0);
    }
}
