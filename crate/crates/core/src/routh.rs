//! Background stream data q, Kirchhoff–Routh functions, their maximization,
//! and point-vortex dynamics under Kirchhoff's law κ_i ẋ_i = (∇_{x_i}𝒲)^⊥.

use crate::domain::{BoundaryTag, Domain, DomainKind, Grid, NodeRef};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::green::GreenEvaluator;
use crate::poisson::{energy_form, BoundaryValues, GridField, Poisson};
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// Boundary flux specification v_n on physical components.
#[derive(Clone)]
pub enum FluxSpec {
    None,
    /// v_n = amplitude · cos θ on circular components.
    CosTheta { amplitude: f64 },
    Custom(Arc<dyn Fn(Point, usize) -> f64 + Send + Sync>),
}

impl FluxSpec {
    fn eval(&self, p: Point, comp: usize, center: Point) -> f64 {
        match self {
            FluxSpec::None => 0.0,
            FluxSpec::CosTheta { amplitude } => {
                let d = p - center;
                let n = d.norm();
                if n < 1e-300 {
                    0.0
                } else {
                    amplitude * d.x1 / n
                }
            }
            FluxSpec::Custom(f) => f(p, comp),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, FluxSpec::None)
    }
}

/// The stream data q entering the elliptic problem: q = −ψ₀ − α|x|²/2,
/// composed of closed-form parts and a gridded harmonic-extension part.
#[derive(Clone, Default)]
pub struct BackgroundField {
    closures: Vec<(ScalarFn, Option<VectorFn>)>,
    grid_part: Option<GridPart>,
    /// Rotation rate folded into q.
    pub alpha: f64,
    /// Prescribed obstacle circulations.
    pub circulations: Vec<f64>,
}

#[derive(Clone)]
struct GridPart {
    grid: Arc<Grid>,
    vals: GridField,
    bvals: BoundaryValues,
}

impl BackgroundField {
    /// q ≡ 0.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Pure rotation: q = −α|x|²/2.
    pub fn rotation(alpha: f64) -> Self {
        let mut bg = Self::default();
        bg.alpha = alpha;
        if alpha != 0.0 {
            bg.closures.push((
                Arc::new(move |p: Point| -alpha * p.norm_sq() / 2.0),
                Some(Arc::new(move |p: Point| p * (-alpha))),
            ));
        }
        bg
    }

    /// Free-stream data on a half-plane with wall at x1 = a0: q = w∞ (x1 − a0).
    pub fn free_stream(w_inf: f64, a0: f64) -> Self {
        let mut bg = Self::default();
        bg.closures.push((
            Arc::new(move |p: Point| w_inf * (p.x1 - a0)),
            Some(Arc::new(move |_p: Point| Point::new(w_inf, 0.0))),
        ));
        bg
    }

    /// Custom closed-form q with optional gradient.
    pub fn from_closure(
        f: impl Fn(Point) -> f64 + Send + Sync + 'static,
        grad: Option<VectorFn>,
    ) -> Self {
        let mut bg = Self::default();
        bg.closures.push((Arc::new(f), grad));
        bg
    }

    /// Adds a closed-form term to q.
    pub fn plus_closure(
        mut self,
        f: impl Fn(Point) -> f64 + Send + Sync + 'static,
        grad: Option<VectorFn>,
    ) -> Self {
        self.closures.push((Arc::new(f), grad));
        self
    }

    pub fn q_at(&self, p: Point) -> f64 {
        let mut q = 0.0;
        for (f, _) in &self.closures {
            q += f(p);
        }
        if let Some(gp) = &self.grid_part {
            q += grid_interp(&gp.grid, &gp.vals, &gp.bvals, p);
        }
        q
    }

    /// Gradient of q; closed forms when available, central differences with
    /// step `fd_step` otherwise.
    pub fn grad_q(&self, p: Point, fd_step: f64) -> Point {
        let e1 = Point::new(fd_step, 0.0);
        let e2 = Point::new(0.0, fd_step);
        let central = |f: &dyn Fn(Point) -> f64| {
            Point::new(
                (f(p + e1) - f(p - e1)) / (2.0 * fd_step),
                (f(p + e2) - f(p - e2)) / (2.0 * fd_step),
            )
        };
        let mut g = Point::new(0.0, 0.0);
        for (f, gr) in &self.closures {
            g = g + match gr {
                Some(gr) => gr(p),
                None => central(&|q| f(q)),
            };
        }
        if let Some(gp) = &self.grid_part {
            g = g + central(&|q| grid_interp(&gp.grid, &gp.vals, &gp.bvals, q));
        }
        g
    }

    /// True when every part carries an analytic gradient.
    pub fn has_closed_grad(&self) -> bool {
        self.grid_part.is_none() && self.closures.iter().all(|(_, g)| g.is_some())
    }
}

fn grid_interp(grid: &Grid, u: &GridField, b: &BoundaryValues, p: Point) -> f64 {
    // bilinear on complete cells, nearest node otherwise
    let fi = (p.x1 - grid.origin.x1) / grid.h;
    let fj = (p.x2 - grid.origin.x2) / grid.h;
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
            v00 * (1.0 - tx) * (1.0 - ty)
                + v10 * tx * (1.0 - ty)
                + v01 * (1.0 - tx) * ty
                + v11 * tx * ty
        }
        _ => grid
            .nearest_interior(p)
            .map(|k| u.vals[k])
            .unwrap_or(0.0),
    }
}

/// Builds q = −ψ₀ − α|x|²/2 from boundary flux data and circulations.
///
/// ψ₀ boundary values come from cumulative integration of −v_n along each
/// component (additive constant zero at the component's parametrization
/// start); the interior is the harmonic extension; obstacle circulations are
/// matched by adding multiples of the harmonic measures Z_h.
pub fn build_stream_q(
    domain: &Domain,
    grid: Option<&Arc<Grid>>,
    v_n: &FluxSpec,
    gamma_h: &[f64],
    alpha: f64,
) -> Result<BackgroundField> {
    let trivial_flux = v_n.is_none();
    let trivial_circ = gamma_h.iter().all(|&g| g == 0.0);
    if trivial_flux && trivial_circ {
        let mut bg = BackgroundField::rotation(alpha);
        bg.circulations = gamma_h.to_vec();
        return Ok(bg);
    }
    let grid = grid.ok_or_else(|| {
        Error::InvalidSpec("build_stream_q needs a grid for nontrivial boundary data".into())
    })?;
    let solver = Poisson::new(grid);

    // psi0 boundary values by cumulative integration of -v_n per component
    let mut bvals = vec![0.0f64; grid.n_boundary()];
    for (comp_idx, comp) in domain.components().iter().enumerate() {
        let piece = &comp.piece;
        let len = piece.length();
        let center = piece_center(piece);
        let physical = comp.tag == BoundaryTag::Physical;
        // fine cumulative table
        const M: usize = 16_384;
        let ds = len / M as f64;
        let mut cum = vec![0.0f64; M + 1];
        let mut prev = if physical { v_n.eval(piece.point_at(0.0), comp_idx, center) } else { 0.0 };
        for k in 1..=M {
            let s = k as f64 * ds;
            let cur = if physical { v_n.eval(piece.point_at(s), comp_idx, center) } else { 0.0 };
            cum[k] = cum[k - 1] + 0.5 * (prev + cur) * ds;
            prev = cur;
        }
        let total = cum[M];
        let scale: f64 = 1.0 + cum.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if total.abs() > 1e-8 * scale {
            return Err(Error::FluxImbalance { component: comp_idx, integral: total });
        }
        for &bn in grid.boundary_nodes_of_component(comp_idx) {
            let node = &grid.boundary_nodes()[bn];
            let s = piece.arclength_of(node.pos).clamp(0.0, len);
            let x = s / ds;
            let k = (x.floor() as usize).min(M - 1);
            let t = x - k as f64;
            let f = cum[k] * (1.0 - t) + cum[k + 1] * t;
            bvals[bn] = -f; // psi0 = -integral of v_n
        }
    }
    let psi_b = BoundaryValues { vals: bvals };
    let mut psi = solver.solve(grid, &GridField::zeros(grid), &psi_b)?;
    let mut psi_bvals = psi_b.clone();

    // obstacle circulation matching
    let obstacle_comps: Vec<usize> = domain
        .components()
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            matches!(
                c.piece,
                crate::domain::BoundaryPiece::Circle { domain_inside: false, .. }
                    | crate::domain::BoundaryPiece::RectRing { domain_inside: false, .. }
            )
        })
        .map(|(i, _)| i)
        .collect();
    if !obstacle_comps.is_empty() && !trivial_circ {
        if gamma_h.len() != obstacle_comps.len() {
            return Err(Error::InvalidSpec(format!(
                "{} circulations supplied for {} obstacles",
                gamma_h.len(),
                obstacle_comps.len()
            )));
        }
        let m = obstacle_comps.len();
        let mut z = Vec::with_capacity(m);
        for &comp in &obstacle_comps {
            let zb = BoundaryValues::from_fn(grid, |n| if n.component == comp { 1.0 } else { 0.0 });
            let zf = solver.solve(grid, &GridField::zeros(grid), &zb)?;
            z.push((zf, zb));
        }
        // omega_{kh} and fluxes: flux_out(Z_k, comp h) = omega_{kh}
        let mut omega = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in a..m {
                let v = energy_form(grid, &z[a].0, &z[a].1, &z[b].0, &z[b].1);
                omega[a][b] = v;
                omega[b][a] = v;
            }
        }
        // rhs: gamma_h + flux_out(psi_harm, comp h) where flux_out = -Phi_into
        let mut rhs = vec![0.0f64; m];
        for (hi, &comp) in obstacle_comps.iter().enumerate() {
            rhs[hi] = gamma_h[hi] + flux_into_domain(grid, comp, &psi, &psi_bvals);
        }
        let c = solve_dense(&omega, &rhs).ok_or(Error::SingularCirculationSystem)?;
        for (k, ck) in c.iter().enumerate() {
            for i in 0..psi.vals.len() {
                psi.vals[i] += ck * z[k].0.vals[i];
            }
            for i in 0..psi_bvals.vals.len() {
                psi_bvals.vals[i] += ck * z[k].1.vals[i];
            }
        }
    }

    // q = -psi0 (grid part), plus the rotation closure
    let neg = GridField { vals: psi.vals.iter().map(|v| -v).collect() };
    let neg_b = BoundaryValues { vals: psi_bvals.vals.iter().map(|v| -v).collect() };
    let mut bg = BackgroundField::rotation(alpha);
    bg.circulations = gamma_h.to_vec();
    bg.grid_part = Some(GridPart { grid: grid.clone(), vals: neg, bvals: neg_b });
    Ok(bg)
}

fn piece_center(piece: &crate::domain::BoundaryPiece) -> Point {
    match *piece {
        crate::domain::BoundaryPiece::Circle { center, .. } => center,
        _ => Point::new(0.0, 0.0),
    }
}

/// Discrete flux Σ_{b∈comp} Σ_{i~b} (u_i − u_b): the into-domain normal
/// derivative integrated over the component. The outward flux is its negative.
pub fn flux_into_domain(grid: &Grid, comp: usize, u: &GridField, ub: &BoundaryValues) -> f64 {
    let mut flux = 0.0;
    for &bn in grid.boundary_nodes_of_component(comp) {
        let node = &grid.boundary_nodes()[bn];
        let (bi, bj) = node.latt;
        for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            if let Some(NodeRef::Interior(m)) = grid.node_at(bi as i64 + di, bj as i64 + dj) {
                flux += u.vals[m] - ub.vals[bn];
            }
        }
    }
    -flux // into-domain sum measures -∮∂u/∂n_out; flip to the outward convention
}

fn solve_dense(a: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-14 * (1.0 + m[col][col].abs()) {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Vortex configuration mode.
#[derive(Clone, Copy, Debug)]
pub enum RouthMode {
    Single { kappa: f64 },
    Pair { kappa_plus: f64, kappa_minus: f64 },
    Star { kappa: f64 },
    Rotating { kappa: f64, alpha: f64 },
    FreeStream { kappa: f64, w_inf: f64 },
}

/// A Kirchhoff–Routh configuration: mode, Green evaluator, background q.
///
/// The rotation/free-stream presets fold their q term into the background at
/// construction; `q_at` is the single source of truth afterwards.
#[derive(Clone)]
pub struct RouthConfig {
    pub mode: RouthMode,
    pub green: Arc<GreenEvaluator>,
    pub background: BackgroundField,
}

impl RouthConfig {
    pub fn new(mode: RouthMode, green: Arc<GreenEvaluator>, background: BackgroundField) -> Result<Self> {
        match mode {
            RouthMode::Single { kappa } | RouthMode::Star { kappa } => {
                if !(kappa > 0.0) {
                    return Err(Error::NonPositiveKappa(kappa));
                }
            }
            RouthMode::Rotating { kappa, .. } => {
                if !(kappa > 0.0) {
                    return Err(Error::NonPositiveKappa(kappa));
                }
            }
            RouthMode::FreeStream { kappa, w_inf } => {
                if !(kappa > 0.0) {
                    return Err(Error::NonPositiveKappa(kappa));
                }
                if !(w_inf > 0.0) {
                    return Err(Error::InvalidSpec(format!("w_inf must be positive, got {w_inf}")));
                }
            }
            RouthMode::Pair { kappa_plus, kappa_minus } => {
                if !(kappa_plus > 0.0 && kappa_minus < 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "pair mode needs kappa_plus > 0 > kappa_minus, got {kappa_plus}, {kappa_minus}"
                    )));
                }
            }
        }
        Ok(RouthConfig { mode, green, background })
    }

    /// Single vortex in a domain with background q.
    pub fn single(green: Arc<GreenEvaluator>, kappa: f64, background: BackgroundField) -> Result<Self> {
        Self::new(RouthMode::Single { kappa }, green, background)
    }

    /// Rotating frame preset: q = −α|x|²/2.
    pub fn rotating(green: Arc<GreenEvaluator>, kappa: f64, alpha: f64) -> Result<Self> {
        Self::new(RouthMode::Rotating { kappa, alpha }, green, BackgroundField::rotation(alpha))
    }

    /// Free-stream preset on a half-plane: q = w∞ (x1 − a0).
    pub fn free_stream(green: Arc<GreenEvaluator>, kappa: f64, w_inf: f64) -> Result<Self> {
        let a0 = match green.domain().map(|d| &d.kind) {
            Some(&DomainKind::HalfPlaneWindow { a0, .. }) => a0,
            _ => 0.0,
        };
        Self::new(
            RouthMode::FreeStream { kappa, w_inf },
            green,
            BackgroundField::free_stream(w_inf, a0),
        )
    }

    pub fn pair(
        green: Arc<GreenEvaluator>,
        kappa_plus: f64,
        kappa_minus: f64,
        background: BackgroundField,
    ) -> Result<Self> {
        Self::new(RouthMode::Pair { kappa_plus, kappa_minus }, green, background)
    }

    pub fn q_at(&self, p: Point) -> f64 {
        self.background.q_at(p)
    }

    fn strengths(&self) -> Vec<f64> {
        match self.mode {
            RouthMode::Single { kappa }
            | RouthMode::Star { kappa }
            | RouthMode::Rotating { kappa, .. }
            | RouthMode::FreeStream { kappa, .. } => vec![kappa],
            RouthMode::Pair { kappa_plus, kappa_minus } => vec![kappa_plus, kappa_minus],
        }
    }

    fn fd_step(&self) -> f64 {
        let scale = self.green.domain().map(|d| d.scale()).unwrap_or(1.0);
        1e-5 * scale
    }
}

/// W for a general k-vortex configuration:
/// Σ_{i<j} κ_i κ_j G(x_i,x_j) + Σ_i (κ_i²/2 H(x_i,x_i) − κ_i q(x_i)).
/// On the whole plane the self-interaction terms are absent.
pub fn w_system(cfg: &RouthConfig, positions: &[Point], strengths: &[f64]) -> Result<f64> {
    let mut w = 0.0;
    let whole_plane = cfg.green.domain().is_none();
    for i in 0..positions.len() {
        if !whole_plane {
            let h = cfg.green.robin(positions[i])?;
            w += 0.5 * strengths[i] * strengths[i] * h;
        }
        w -= strengths[i] * cfg.q_at(positions[i]);
        for j in i + 1..positions.len() {
            w += strengths[i] * strengths[j] * cfg.green.green(positions[i], positions[j])?;
        }
    }
    Ok(w)
}

/// Evaluates the mode's Kirchhoff–Routh function at one point (single-type
/// modes) or an ordered pair.
pub fn routh_eval(cfg: &RouthConfig, xs: &[Point]) -> Result<f64> {
    let strengths = cfg.strengths();
    if xs.len() != strengths.len() {
        return Err(Error::DimensionMismatch { expected: strengths.len(), got: xs.len() });
    }
    if xs.len() == 2 && xs[0].dist(xs[1]) < 1e-14 {
        return Err(Error::CoincidentPoints);
    }
    if xs.len() == 1 && cfg.green.domain().is_none() {
        // a lone vortex in the whole plane has no self-interaction energy
        return Err(Error::WholePlaneSelfInteraction);
    }
    w_system(cfg, xs, &strengths)
}

/// Result of a Kirchhoff–Routh maximization.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MaximizeResult {
    pub points: Vec<Point>,
    pub value: f64,
    /// Set when the maximizer landed within one coarse cell of the boundary,
    /// where W → −∞; treat the result as unreliable.
    pub near_boundary: bool,
}

/// Coarse grid scan (64×64 per point, masked) followed by Nelder–Mead
/// refinement, multi-started from the best four cells.
pub fn routh_maximize(cfg: &RouthConfig) -> Result<MaximizeResult> {
    let domain = cfg
        .green
        .domain()
        .ok_or(Error::WholePlaneSelfInteraction)?;
    let (lo, hi) = domain.bounding_box();
    let strengths = cfg.strengths();
    let k = strengths.len();
    let barrier = barrier_dist(cfg);

    // The free-stream W is invariant under x2-translation (a ridge of
    // maximizers); canonicalize to the window centerline.
    let centerline = match cfg.mode {
        RouthMode::FreeStream { .. } => Some(0.5 * (lo.x2 + hi.x2)),
        _ => None,
    };

    let objective = |coords: &[f64]| -> f64 {
        let pts: Vec<Point> = match centerline {
            Some(y) => coords.iter().map(|&x| Point::new(x, y)).collect(),
            None => coords.chunks(2).map(|c| Point::new(c[0], c[1])).collect(),
        };
        for p in &pts {
            if !domain.contains(*p) {
                return f64::NEG_INFINITY;
            }
        }
        if k == 2 && pts[0].dist(pts[1]) < barrier {
            return f64::NEG_INFINITY;
        }
        w_system(cfg, &pts, &strengths).unwrap_or(f64::NEG_INFINITY)
    };

    if let Some(y) = centerline {
        let n_cells = 256;
        let step = (hi.x1 - lo.x1) / n_cells as f64;
        let mut seeds: Vec<(f64, Vec<f64>)> = Vec::new();
        for i in 0..n_cells {
            let x = lo.x1 + (i as f64 + 0.5) * step;
            let v = objective(&[x]);
            if v.is_finite() {
                seeds.push((v, vec![x]));
            }
        }
        if seeds.is_empty() {
            return Err(Error::NoInteriorMaximum);
        }
        seeds.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        seeds.truncate(4);
        let scale = domain.scale();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for (_, seed) in &seeds {
            let (x, v) = nelder_mead(&objective, seed, 0.5 * step, 1e-7 * scale, 1e-13);
            if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
                best = Some((v, x));
            }
        }
        let (value, coords) = best.ok_or(Error::NoInteriorMaximum)?;
        if !value.is_finite() {
            return Err(Error::NoInteriorMaximum);
        }
        let point = Point::new(coords[0], y);
        let near_boundary = domain.dist_to_boundary(point) < step.hypot(step);
        return Ok(MaximizeResult { points: vec![point], value, near_boundary });
    }

    // coarse scan
    let n_cells: usize = if k == 1 { 64 } else { 16 };
    let step = Point::new((hi.x1 - lo.x1) / n_cells as f64, (hi.x2 - lo.x2) / n_cells as f64);
    let centers: Vec<Point> = (0..n_cells * n_cells)
        .map(|t| {
            let (i, j) = (t % n_cells, t / n_cells);
            Point::new(lo.x1 + (i as f64 + 0.5) * step.x1, lo.x2 + (j as f64 + 0.5) * step.x2)
        })
        .collect();
    let mut seeds: Vec<(f64, Vec<f64>)> = Vec::new();
    if k == 1 {
        for c in &centers {
            let v = objective(&[c.x1, c.x2]);
            if v.is_finite() {
                seeds.push((v, vec![c.x1, c.x2]));
            }
        }
    } else {
        for a in &centers {
            if !domain.contains(*a) {
                continue;
            }
            for b in &centers {
                let v = objective(&[a.x1, a.x2, b.x1, b.x2]);
                if v.is_finite() {
                    seeds.push((v, vec![a.x1, a.x2, b.x1, b.x2]));
                }
            }
        }
    }
    if seeds.is_empty() {
        return Err(Error::NoInteriorMaximum);
    }
    seeds.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    seeds.truncate(4);

    let scale = domain.scale();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (_, seed) in &seeds {
        let (x, v) = nelder_mead(&objective, seed, 0.5 * step.x1.max(step.x2), 1e-6 * scale, 1e-12);
        if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
            best = Some((v, x));
        }
    }
    let (value, coords) = best.ok_or(Error::NoInteriorMaximum)?;
    if !value.is_finite() {
        return Err(Error::NoInteriorMaximum);
    }
    let points: Vec<Point> = coords.chunks(2).map(|c| Point::new(c[0], c[1])).collect();
    let cell = step.x1.hypot(step.x2);
    let near_boundary = points.iter().any(|p| domain.dist_to_boundary(*p) < cell);
    Ok(MaximizeResult { points, value, near_boundary })
}

fn barrier_dist(cfg: &RouthConfig) -> f64 {
    match cfg.green.grid() {
        Some(g) => g.h,
        None => 1e-3 * cfg.green.domain().map(|d| d.scale()).unwrap_or(1.0),
    }
}

/// Plain Nelder–Mead maximizer (reflection/expansion/contraction/shrink).
pub(crate) fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    init_size: f64,
    size_tol: f64,
    val_tol: f64,
) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..d {
        let mut p = start.to_vec();
        p[i] += init_size;
        let v = f(&p);
        simplex.push((p, v));
    }
    for _ in 0..500 * d {
        simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        // termination: simplex size and value spread
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0f64, f64::max);
        let spread = (simplex[0].1 - simplex[d].1).abs();
        if size < size_tol || (simplex[0].1.is_finite() && spread < val_tol) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|i| simplex[..d].iter().map(|(p, _)| p[i]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let reflect: Vec<f64> =
            (0..d).map(|i| centroid[i] + (centroid[i] - worst.0[i])).collect();
        let fr = f(&reflect);
        if fr > simplex[0].1 {
            let expand: Vec<f64> =
                (0..d).map(|i| centroid[i] + 2.0 * (centroid[i] - worst.0[i])).collect();
            let fe = f(&expand);
            simplex[d] = if fe > fr { (expand, fe) } else { (reflect, fr) };
        } else if fr > simplex[d - 1].1 {
            simplex[d] = (reflect, fr);
        } else {
            let contract: Vec<f64> =
                (0..d).map(|i| centroid[i] + 0.5 * (worst.0[i] - centroid[i])).collect();
            let fc = f(&contract);
            if fc > worst.1 {
                simplex[d] = (contract, fc);
            } else {
                let best = simplex[0].0.clone();
                for e in simplex.iter_mut().skip(1) {
                    for i in 0..d {
                        e.0[i] = best[i] + 0.5 * (e.0[i] - best[i]);
                    }
                    e.1 = f(&e.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    (simplex[0].0.clone(), simplex[0].1)
}

/// Positions and strengths of a k-vortex state.
#[derive(Clone, Debug)]
pub struct VortexState {
    pub positions: Vec<Point>,
    pub strengths: Vec<f64>,
    pub time: f64,
}

impl VortexState {
    pub fn new(positions: Vec<Point>, strengths: Vec<f64>) -> Result<Self> {
        if positions.len() != strengths.len() || positions.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: positions.len(),
                got: strengths.len(),
            });
        }
        for i in 0..positions.len() {
            if strengths[i] == 0.0 {
                return Err(Error::InvalidSpec(format!("vortex {i} has zero strength")));
            }
            for j in i + 1..positions.len() {
                if positions[i].dist(positions[j]) < 1e-12 {
                    return Err(Error::VortexCollision(i, j, positions[i].dist(positions[j])));
                }
            }
        }
        Ok(VortexState { positions, strengths, time: 0.0 })
    }
}

/// Recorded trajectory: times, positions per vortex, and W along the flow.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Point>>,
    pub w_values: Vec<f64>,
}

/// Velocities ẋ_i = (∇_{x_i}W)^⊥ / κ_i, using analytic kernel gradients when
/// available and central finite differences on W otherwise.
pub fn vortex_velocities(
    cfg: &RouthConfig,
    positions: &[Point],
    strengths: &[f64],
) -> Result<Vec<Point>> {
    let whole_plane = cfg.green.domain().is_none();
    let analytic = cfg.green.is_analytic() && cfg.background.has_closed_grad();
    let fd = cfg.fd_step();
    let mut vel = Vec::with_capacity(positions.len());
    for i in 0..positions.len() {
        let grad = if analytic {
            let mut g = Point::new(0.0, 0.0);
            if !whole_plane {
                g = g + cfg.green.grad_robin(positions[i])? * (0.5 * strengths[i] * strengths[i]);
            }
            for j in 0..positions.len() {
                if j != i {
                    g = g
                        + cfg.green.grad_green_x(positions[i], positions[j])?
                            * (strengths[i] * strengths[j]);
                }
            }
            g = g + cfg.background.grad_q(positions[i], fd) * (-strengths[i]);
            g
        } else {
            // central differences of W in the i-th position
            let mut g = Point::new(0.0, 0.0);
            for (axis, e) in [Point::new(fd, 0.0), Point::new(0.0, fd)].iter().enumerate() {
                let mut plus = positions.to_vec();
                plus[i] = plus[i] + *e;
                let mut minus = positions.to_vec();
                minus[i] = minus[i] - *e;
                let wp = w_system(cfg, &plus, strengths)?;
                let wm = w_system(cfg, &minus, strengths)?;
                let der = (wp - wm) / (2.0 * fd);
                if axis == 0 {
                    g.x1 = der;
                } else {
                    g.x2 = der;
                }
            }
            g
        };
        vel.push(grad.perp() * (1.0 / strengths[i]));
    }
    Ok(vel)
}

/// RK4 integration of Kirchhoff's law, recording W each step.
pub fn integrate_dynamics(
    state: &VortexState,
    cfg: &RouthConfig,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::InvalidSpec(format!("dt = {dt}, t_end = {t_end} must be positive")));
    }
    let whole_plane = cfg.green.domain().is_none();
    if whole_plane && state.positions.len() == 1 {
        return Err(Error::WholePlaneSelfInteraction);
    }
    let strengths = state.strengths.clone();
    let n_steps = (t_end / dt).ceil() as usize;
    let mut pos = state.positions.clone();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut w_values = Vec::with_capacity(n_steps + 1);
    let mut t = state.time;
    times.push(t);
    states.push(pos.clone());
    w_values.push(w_system(cfg, &pos, &strengths)?);
    for step in 0..n_steps {
        let h = dt.min(t_end + state.time - t);
        let k1 = vortex_velocities(cfg, &pos, &strengths)?;
        let p2 = advance(&pos, &k1, 0.5 * h);
        let k2 = vortex_velocities(cfg, &p2, &strengths)?;
        let p3 = advance(&pos, &k2, 0.5 * h);
        let k3 = vortex_velocities(cfg, &p3, &strengths)?;
        let p4 = advance(&pos, &k3, h);
        let k4 = vortex_velocities(cfg, &p4, &strengths)?;
        let vmax = k1.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        for i in 0..pos.len() {
            pos[i] = pos[i]
                + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
        t += h;
        // collision and escape guards
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                let d = pos[i].dist(pos[j]);
                if d < 10.0 * h * vmax {
                    return Err(Error::VortexCollision(i, j, d));
                }
            }
            if let Some(dom) = cfg.green.domain() {
                if !dom.contains(pos[i]) {
                    return Err(Error::BoundaryEscape(i, t));
                }
            }
        }
        times.push(t);
        states.push(pos.clone());
        w_values.push(w_system(cfg, &pos, &strengths)?);
        let _ = step;
    }
    Ok(Trajectory { times, states, w_values })
}

fn advance(pos: &[Point], vel: &[Point], dt: f64) -> Vec<Point> {
    pos.iter().zip(vel).map(|(p, v)| *p + *v * dt).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{discretize, make_domain};
    use crate::green::GreenEvaluator;

    const PI: f64 = std::f64::consts::PI;

    fn disc_green() -> Arc<GreenEvaluator> {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        Arc::new(GreenEvaluator::analytic(&d).unwrap())
    }

    #[test]
    fn zero_data_gives_zero_q() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let bg = build_stream_q(&d, None, &FluxSpec::None, &[], 0.0).unwrap();
        for p in [Point::new(0.0, 0.0), Point::new(0.3, -0.4)] {
            assert_eq!(bg.q_at(p), 0.0);
        }
    }

    #[test]
    fn rotation_only_q() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let bg = build_stream_q(&d, None, &FluxSpec::None, &[], 1.0).unwrap();
        let p = Point::new(0.3, 0.4);
        assert!((bg.q_at(p) + p.norm_sq() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn cos_theta_flux_harmonic_extension() {
        // v_n = cos θ on the unit circle: psi0 = -sin θ extends to -x2, q = x2
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let grid = Arc::new(discretize(&d, 0.02).unwrap());
        let bg = build_stream_q(&d, Some(&grid), &FluxSpec::CosTheta { amplitude: 1.0 }, &[], 0.0)
            .unwrap();
        for p in [Point::new(0.0, 0.0), Point::new(0.3, 0.5), Point::new(-0.4, -0.2)] {
            let q = bg.q_at(p);
            assert!((q - p.x2).abs() < 0.02, "q({},{}) = {q}", p.x1, p.x2);
        }
    }

    #[test]
    fn incompatible_flux_rejected() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let grid = Arc::new(discretize(&d, 0.05).unwrap());
        let bad = FluxSpec::Custom(Arc::new(|_p, _c| 1.0));
        assert!(matches!(
            build_stream_q(&d, Some(&grid), &bad, &[], 0.0),
            Err(Error::FluxImbalance { .. })
        ));
    }

    #[test]
    fn single_disc_center_w_zero() {
        let cfg = RouthConfig::single(disc_green(), 1.0, BackgroundField::zero()).unwrap();
        let w = routh_eval(&cfg, &[Point::new(0.0, 0.0)]).unwrap();
        assert!(w.abs() < 1e-14);
    }

    #[test]
    fn rotating_w_matches_closed_form() {
        // 𝒲_α(x) = κ²/4π log((ρ²−|x|²)/ρ) + κα|x|²/2 on the unit disc
        let cfg = RouthConfig::rotating(disc_green(), PI, 1.0).unwrap();
        let x = Point::new(0.5f64.sqrt(), 0.0);
        let w = routh_eval(&cfg, &[x]).unwrap();
        let expected = PI * PI / (4.0 * PI) * (1.0 - x.norm_sq()).ln() + PI * 1.0 * x.norm_sq() / 2.0;
        assert!((w - expected).abs() < 1e-12, "{w} vs {expected}");
    }

    #[test]
    fn rotating_maximizer_on_circle() {
        let cfg = RouthConfig::rotating(disc_green(), PI, 1.0).unwrap();
        let res = routh_maximize(&cfg).unwrap();
        let r = res.points[0].norm();
        assert!((r - 0.5f64.sqrt()).abs() < 1e-3, "radius {r}");
        assert!(!res.near_boundary);
    }

    #[test]
    fn free_stream_maximizer() {
        let d = make_domain(DomainKind::HalfPlaneWindow { a0: 0.0, width: 4.0, height: 4.0 })
            .unwrap();
        let ge = Arc::new(GreenEvaluator::analytic(&d).unwrap());
        let cfg = RouthConfig::free_stream(ge, 2.0 * PI, 1.0).unwrap();
        let res = routh_maximize(&cfg).unwrap();
        assert!((res.points[0].x1 - 0.5).abs() < 1e-3, "x1 = {}", res.points[0].x1);
        assert!(res.points[0].x2.abs() < 1e-3);
    }

    #[test]
    fn single_disc_maximizer_center() {
        let cfg = RouthConfig::single(disc_green(), 1.0, BackgroundField::zero()).unwrap();
        let res = routh_maximize(&cfg).unwrap();
        assert!(res.points[0].norm() < 1e-3);
    }

    #[test]
    fn pair_w_label_swap_invariance() {
        let cfg = RouthConfig::pair(disc_green(), 1.0, -1.0, BackgroundField::zero()).unwrap();
        let a = Point::new(0.3, 0.0);
        let b = Point::new(-0.3, 0.0);
        let w1 = routh_eval(&cfg, &[a, b]).unwrap();
        // swapping labels swaps both positions and strengths
        let cfg2 = RouthConfig::pair(disc_green(), 1.0, -1.0, BackgroundField::zero()).unwrap();
        let w2 = routh_eval(&cfg2, &[b, a]).unwrap();
        assert!((w1 - w2).abs() < 1e-14);
    }

    #[test]
    fn scaling_covariance() {
        // (κ, q) → (λκ, λq) scales W by λ²
        let lambda = 1.7;
        let q = |p: Point| 0.3 * p.x1 + 0.1 * p.norm_sq();
        let cfg1 = RouthConfig::single(
            disc_green(),
            2.0,
            BackgroundField::from_closure(q, None),
        )
        .unwrap();
        let cfg2 = RouthConfig::single(
            disc_green(),
            2.0 * lambda,
            BackgroundField::from_closure(move |p| lambda * q(p), None),
        )
        .unwrap();
        for p in [Point::new(0.2, 0.1), Point::new(-0.4, 0.3)] {
            let w1 = routh_eval(&cfg1, &[p]).unwrap();
            let w2 = routh_eval(&cfg2, &[p]).unwrap();
            assert!((w2 - lambda * lambda * w1).abs() < 1e-12 * (1.0 + w2.abs()));
        }
    }

    #[test]
    fn translating_pair_whole_plane() {
        let ge = Arc::new(GreenEvaluator::whole_plane());
        let cfg = RouthConfig::pair(ge, 2.0 * PI, -2.0 * PI, BackgroundField::zero()).unwrap();
        let state = VortexState::new(
            vec![Point::new(0.0, 0.5), Point::new(0.0, -0.5)],
            vec![2.0 * PI, -2.0 * PI],
        )
        .unwrap();
        let traj = integrate_dynamics(&state, &cfg, 1e-3, 1.0).unwrap();
        let last = traj.states.last().unwrap();
        assert!((last[0].x1 - 1.0).abs() < 1e-6, "x+ = ({}, {})", last[0].x1, last[0].x2);
        assert!((last[0].x2 - 0.5).abs() < 1e-6);
        assert!((last[1].x1 - 1.0).abs() < 1e-6);
        assert!((last[1].x2 + 0.5).abs() < 1e-6);
    }

    #[test]
    fn whole_plane_single_rejected() {
        let ge = Arc::new(GreenEvaluator::whole_plane());
        let cfg = RouthConfig::single(ge, 1.0, BackgroundField::zero());
        // config construction is fine; evaluation and dynamics reject
        let cfg = cfg.unwrap();
        assert!(routh_eval(&cfg, &[Point::new(0.0, 0.0)]).is_err());
        let state = VortexState::new(vec![Point::new(0.0, 0.0)], vec![1.0]).unwrap();
        assert!(matches!(
            integrate_dynamics(&state, &cfg, 0.01, 0.1),
            Err(Error::WholePlaneSelfInteraction)
        ));
    }

    #[test]
    fn disc_vortex_conserves_radius_and_w() {
        let cfg = RouthConfig::single(disc_green(), 1.0, BackgroundField::zero()).unwrap();
        let state = VortexState::new(vec![Point::new(0.5, 0.0)], vec![1.0]).unwrap();
        let traj = integrate_dynamics(&state, &cfg, 1e-3, 10.0).unwrap();
        for (s, w) in traj.states.iter().zip(&traj.w_values) {
            assert!((s[0].norm() - 0.5).abs() < 1e-8);
            assert!((w - traj.w_values[0]).abs() <= 1e-8 * (1.0 + traj.w_values[0].abs()) * 10.0);
        }
    }

    #[test]
    fn disc_angular_speed_matches_fd_oracle() {
        // angular speed from the analytic gradient against an independent
        // finite-difference evaluation of ∇W
        let cfg = RouthConfig::single(disc_green(), 1.0, BackgroundField::zero()).unwrap();
        let x = Point::new(0.5, 0.0);
        let v = vortex_velocities(&cfg, &[x], &[1.0]).unwrap()[0];
        let fd = 1e-6;
        let w = |p: Point| routh_eval(&cfg, &[p]).unwrap();
        let grad = Point::new(
            (w(Point::new(x.x1 + fd, x.x2)) - w(Point::new(x.x1 - fd, x.x2))) / (2.0 * fd),
            (w(Point::new(x.x1, x.x2 + fd)) - w(Point::new(x.x1, x.x2 - fd))) / (2.0 * fd),
        );
        let v_fd = grad.perp();
        assert!((v.x1 - v_fd.x1).abs() < 1e-4 * (1.0 + v_fd.x1.abs()));
        assert!((v.x2 - v_fd.x2).abs() < 1e-4 * (1.0 + v_fd.x2.abs()));
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let cfg = RouthConfig::rotating(disc_green(), PI, 1.0).unwrap();
        let res = routh_maximize(&cfg).unwrap();
        let state = VortexState::new(res.points.clone(), vec![PI]).unwrap();
        let traj = integrate_dynamics(&state, &cfg, 1e-3, 1.0).unwrap();
        let drift = traj.states.last().unwrap()[0].dist(res.points[0]);
        assert!(drift < 1e-4, "drift {drift}");
    }
}
