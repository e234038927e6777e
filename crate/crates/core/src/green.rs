//! Green functions G of −Δ with Dirichlet conditions, their regular parts H,
//! Robin functions H(x,x), the Koebe construction G_* for multiply-connected
//! domains, and the boundary expansion of H near a curved boundary point.
//!
//! Analytic kernels: disc (method of images), half-plane (image kernel),
//! half-plane minus a disc (Turkington's formula). Everything else falls back
//! to cached Poisson solves with a discrete delta source.

use crate::domain::{discretize, BoundaryPiece, Domain, DomainKind, Grid, NodeRef};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::poisson::{energy_form, BoundaryValues, GridField, Poisson};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Evaluates G(x,y), H(x,y) and the Robin function for one domain.
pub struct GreenEvaluator {
    domain: Option<Domain>,
    kernel: Kernel,
}

enum Kernel {
    Disc { radius: f64 },
    HalfPlane { a0: f64 },
    Turkington { r_obs: f64 },
    WholePlane,
    Numeric(NumericGreen),
    Koebe(KoebeGreen),
}

struct NumericGreen {
    grid: Arc<Grid>,
    solver: Poisson,
    cache: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

struct KoebeGreen {
    base: NumericGreen,
    /// Harmonic measures of the obstacle components, with boundary data.
    z: Vec<(GridField, BoundaryValues)>,
    /// Obstacle component ids in the domain's component list.
    obstacle_comps: Vec<usize>,
    omega: Vec<Vec<f64>>,
    omega_inv: Vec<Vec<f64>>,
}

impl NumericGreen {
    fn new(domain: &Domain, h: f64) -> Result<Self> {
        let grid = Arc::new(discretize(domain, h)?);
        let solver = Poisson::new(&grid);
        Ok(NumericGreen { grid, solver, cache: Mutex::new(HashMap::new()) })
    }

    /// Field of G(·, y) over interior nodes, solved once per source node.
    fn field(&self, y: Point) -> Result<(usize, Arc<Vec<f64>>)> {
        let j = self
            .grid
            .nearest_interior(y)
            .ok_or(Error::OutsideDomain(y.x1, y.x2))?;
        if let Some(f) = self.cache.lock().unwrap().get(&j) {
            return Ok((j, f.clone()));
        }
        let (_, rhs) = crate::poisson::delta_rhs(&self.grid, self.grid.interior_pos(j))?;
        let u = self
            .solver
            .solve(&self.grid, &rhs, &BoundaryValues::zeros(&self.grid))?;
        let arc = Arc::new(u.vals);
        self.cache.lock().unwrap().insert(j, arc.clone());
        Ok((j, arc))
    }

    fn eval(&self, x: Point, y: Point) -> Result<f64> {
        let (j, f) = self.field(y)?;
        let i = self
            .grid
            .nearest_interior(x)
            .ok_or(Error::OutsideDomain(x.x1, x.x2))?;
        if i == j {
            return Err(Error::CoincidentPoints);
        }
        Ok(f[i])
    }

    /// Robin function by offset extraction: H_d = G(x, x+d e) + log(d)/2π at
    /// d = 8h and 16h, Richardson-extrapolated. The offsets stay several
    /// lattice steps away from the source to avoid the near-diagonal bias of
    /// the discrete kernel.
    fn robin(&self, x: Point) -> Result<f64> {
        let i = self
            .grid
            .nearest_interior(x)
            .ok_or(Error::OutsideDomain(x.x1, x.x2))?;
        let xi = self.grid.interior_pos(i);
        let (li, lj) = self.grid.interior_latt(i);
        let (_, f) = self.field(xi)?;
        // pick the axis direction with the deepest interior clearance
        let dirs = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)];
        let mut best: Option<(usize, (i64, i64))> = None;
        for d in dirs {
            let mut steps = 0usize;
            for k in 1..=16 {
                match self.grid.node_at(li as i64 + d.0 * k, lj as i64 + d.1 * k) {
                    Some(NodeRef::Interior(_)) => steps = k as usize,
                    _ => break,
                }
            }
            if best.map_or(true, |(s, _)| steps > s) {
                best = Some((steps, d));
            }
        }
        let (steps, d) = best.ok_or(Error::OutsideDomain(x.x1, x.x2))?;
        if steps < 4 {
            return Err(Error::OutsideDomain(x.x1, x.x2));
        }
        let k2 = steps.min(16);
        let k1 = k2 / 2;
        let g_at = |k: usize| -> Result<f64> {
            match self.grid.node_at(li as i64 + d.0 * k as i64, lj as i64 + d.1 * k as i64) {
                Some(NodeRef::Interior(m)) => Ok(f[m]),
                _ => Err(Error::OutsideDomain(x.x1, x.x2)),
            }
        };
        let h = self.grid.h;
        let h1 = g_at(k1)? + (k1 as f64 * h).ln() / TWO_PI;
        let h2 = g_at(k2)? + (k2 as f64 * h).ln() / TWO_PI;
        // H(x, x + d) = H(x,x) + c·d + O(d²); eliminate the linear term
        Ok(2.0 * h1 - h2)
    }
}

impl GreenEvaluator {
    /// Analytic kernel for the domain kind; errors for kinds without one.
    pub fn analytic(domain: &Domain) -> Result<Self> {
        let kernel = match domain.kind {
            DomainKind::Disc { radius } => Kernel::Disc { radius },
            DomainKind::HalfPlaneWindow { a0, .. } => Kernel::HalfPlane { a0 },
            DomainKind::DiscComplementWindow { r_obs, .. } => Kernel::Turkington { r_obs },
            _ => {
                return Err(Error::UnsupportedKind(
                    "no analytic Green kernel for this domain".into(),
                ))
            }
        };
        Ok(GreenEvaluator { domain: Some(domain.clone()), kernel })
    }

    /// Numeric kernel: cached Poisson solves on a grid of width `h`.
    /// Artificial truncation edges are treated as Dirichlet-zero.
    pub fn numeric(domain: &Domain, h: f64) -> Result<Self> {
        Ok(GreenEvaluator {
            domain: Some(domain.clone()),
            kernel: Kernel::Numeric(NumericGreen::new(domain, h)?),
        })
    }

    /// Free-plane kernel G(x,y) = log(1/|x−y|)/2π. It has no Robin function.
    pub fn whole_plane() -> Self {
        GreenEvaluator { domain: None, kernel: Kernel::WholePlane }
    }

    pub fn domain(&self) -> Option<&Domain> {
        self.domain.as_ref()
    }

    pub fn grid(&self) -> Option<&Arc<Grid>> {
        match &self.kernel {
            Kernel::Numeric(n) => Some(&n.grid),
            Kernel::Koebe(k) => Some(&k.base.grid),
            _ => None,
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(
            self.kernel,
            Kernel::Disc { .. } | Kernel::HalfPlane { .. } | Kernel::Turkington { .. } | Kernel::WholePlane
        )
    }

    fn check_inside(&self, p: Point) -> Result<()> {
        match &self.kernel {
            Kernel::WholePlane => Ok(()),
            Kernel::Turkington { r_obs } => {
                // Turkington kernel lives on {x1 > 0} minus the obstacle disc
                if p.x1 <= 0.0 || p.norm() <= *r_obs {
                    Err(Error::OutsideDomain(p.x1, p.x2))
                } else {
                    Ok(())
                }
            }
            _ => {
                let d = self.domain.as_ref().expect("domain present");
                if d.contains(p) {
                    Ok(())
                } else {
                    Err(Error::OutsideDomain(p.x1, p.x2))
                }
            }
        }
    }

    /// G(x, y).
    pub fn green(&self, x: Point, y: Point) -> Result<f64> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        if x.dist(y) < 1e-14 {
            return Err(Error::CoincidentPoints);
        }
        match &self.kernel {
            Kernel::Disc { radius } => Ok(disc_green(*radius, x, y)),
            Kernel::HalfPlane { a0 } => Ok(half_plane_green(*a0, x, y)),
            Kernel::Turkington { r_obs } => Ok(turkington_green(*r_obs, x, y)),
            Kernel::WholePlane => Ok((1.0 / TWO_PI) * (1.0 / x.dist(y)).ln()),
            Kernel::Numeric(n) => n.eval(x, y),
            Kernel::Koebe(k) => {
                let base = k.base.eval(x, y)?;
                let mut corr = 0.0;
                for (a, za) in k.z.iter().enumerate() {
                    let zx = field_at(&k.base.grid, &za.0, x)?;
                    for (b, zb) in k.z.iter().enumerate() {
                        let zy = field_at(&k.base.grid, &zb.0, y)?;
                        corr += zx * k.omega_inv[a][b] * zy;
                    }
                }
                Ok(base + corr)
            }
        }
    }

    /// Regular part H(x, y) = G(x, y) − log(1/|x−y|)/2π; at near-coincident
    /// points it falls back to the Robin function.
    pub fn regular_part(&self, x: Point, y: Point) -> Result<f64> {
        let near = match self.grid() {
            Some(g) => 0.75 * g.h,
            None => 1e-9,
        };
        if x.dist(y) <= near {
            return self.robin(x);
        }
        Ok(self.green(x, y)? + x.dist(y).ln() / TWO_PI)
    }

    /// Robin function H(x, x).
    pub fn robin(&self, x: Point) -> Result<f64> {
        self.check_inside(x)?;
        match &self.kernel {
            Kernel::Disc { radius } => {
                Ok((1.0 / TWO_PI) * ((radius * radius - x.norm_sq()) / radius).ln())
            }
            Kernel::HalfPlane { a0 } => Ok((1.0 / TWO_PI) * (2.0 * (x.x1 - a0)).ln()),
            Kernel::Turkington { r_obs } => {
                let r2 = r_obs * r_obs;
                let d = x.norm_sq() - r2;
                Ok((1.0 / TWO_PI) * (2.0 * x.x1).ln()
                    - (1.0 / FOUR_PI) * (1.0 + 4.0 * r2 * x.x1 * x.x1 / (d * d)).ln())
            }
            Kernel::WholePlane => Err(Error::WholePlaneSelfInteraction),
            Kernel::Numeric(n) => n.robin(x),
            Kernel::Koebe(k) => {
                let base = k.base.robin(x)?;
                let mut corr = 0.0;
                for (a, za) in k.z.iter().enumerate() {
                    let zxa = field_at(&k.base.grid, &za.0, x)?;
                    for (b, zb) in k.z.iter().enumerate() {
                        let zxb = field_at(&k.base.grid, &zb.0, x)?;
                        corr += zxa * k.omega_inv[a][b] * zxb;
                    }
                }
                Ok(base + corr)
            }
        }
    }

    /// Gradient of x ↦ H(x,x) where a closed form exists.
    pub fn grad_robin(&self, x: Point) -> Result<Point> {
        self.check_inside(x)?;
        match &self.kernel {
            Kernel::Disc { radius } => {
                let d = radius * radius - x.norm_sq();
                Ok(x * (-2.0 / (TWO_PI * d)))
            }
            Kernel::HalfPlane { a0 } => Ok(Point::new(1.0 / (TWO_PI * (x.x1 - a0)), 0.0)),
            _ => Err(Error::UnsupportedKind("no analytic Robin gradient".into())),
        }
    }

    /// ∇_x G(x, y) where a closed form exists.
    pub fn grad_green_x(&self, x: Point, y: Point) -> Result<Point> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        if x.dist(y) < 1e-14 {
            return Err(Error::CoincidentPoints);
        }
        match &self.kernel {
            Kernel::WholePlane => {
                let d = x - y;
                Ok(d * (-1.0 / (TWO_PI * d.norm_sq())))
            }
            Kernel::Disc { radius } => {
                let d = x - y;
                let free = d * (-1.0 / (TWO_PI * d.norm_sq()));
                let ys = y.norm_sq();
                if ys < 1e-28 {
                    // G(x, 0) = log(R/|x|)/2π
                    return Ok(x * (-1.0 / (TWO_PI * x.norm_sq())));
                }
                let ystar = y * (radius * radius / ys);
                let di = x - ystar;
                Ok(free + di * (1.0 / (TWO_PI * di.norm_sq())))
            }
            Kernel::HalfPlane { a0 } => {
                let d = x - y;
                let ybar = Point::new(2.0 * a0 - y.x1, y.x2);
                let di = x - ybar;
                Ok(d * (-1.0 / (TWO_PI * d.norm_sq())) + di * (1.0 / (TWO_PI * di.norm_sq())))
            }
            _ => Err(Error::UnsupportedKind("no analytic Green gradient".into())),
        }
    }

    /// Harmonic measure Z_k of obstacle k (Koebe mode only).
    pub fn z_value(&self, k: usize, x: Point) -> Result<f64> {
        match &self.kernel {
            Kernel::Koebe(kb) => field_at(&kb.base.grid, &kb.z[k].0, x),
            _ => Err(Error::UnsupportedKind("not a Koebe evaluator".into())),
        }
    }

    pub fn omega_matrix(&self) -> Result<&Vec<Vec<f64>>> {
        match &self.kernel {
            Kernel::Koebe(kb) => Ok(&kb.omega),
            _ => Err(Error::UnsupportedKind("not a Koebe evaluator".into())),
        }
    }

    /// Discrete flux of G_*(·, y) around obstacle `k`; the Koebe correction
    /// makes it vanish to solver tolerance.
    pub fn obstacle_flux(&self, k: usize, y: Point) -> Result<f64> {
        let kb = match &self.kernel {
            Kernel::Koebe(kb) => kb,
            _ => return Err(Error::UnsupportedKind("not a Koebe evaluator".into())),
        };
        let grid = &kb.base.grid;
        let (_, base) = kb.base.field(y)?;
        // interior values of G_*
        let mut vals = base.as_ref().clone();
        let mut zy = vec![0.0; kb.z.len()];
        for (b, zb) in kb.z.iter().enumerate() {
            zy[b] = field_at(grid, &zb.0, y)?;
        }
        for (a, za) in kb.z.iter().enumerate() {
            let w: f64 = (0..kb.z.len()).map(|b| kb.omega_inv[a][b] * zy[b]).sum();
            for (i, v) in vals.iter_mut().enumerate() {
                *v += w * za.0.vals[i];
            }
        }
        // boundary value of G_* on obstacle comp k
        let comp = kb.obstacle_comps[k];
        let ub: f64 = (0..kb.z.len()).map(|b| kb.omega_inv[k][b] * zy[b]).sum();
        let mut flux = 0.0;
        for &bn in grid.boundary_nodes_of_component(comp) {
            let node = &grid.boundary_nodes()[bn];
            let (bi, bj) = node.latt;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                if let Some(NodeRef::Interior(m)) = grid.node_at(bi as i64 + di, bj as i64 + dj) {
                    flux += vals[m] - ub;
                }
            }
        }
        Ok(flux)
    }
}

fn field_at(grid: &Grid, f: &GridField, x: Point) -> Result<f64> {
    let i = grid.nearest_interior(x).ok_or(Error::OutsideDomain(x.x1, x.x2))?;
    Ok(f.vals[i])
}

fn disc_green(radius: f64, x: Point, y: Point) -> f64 {
    let ys = y.norm_sq();
    if ys < 1e-28 {
        return (radius / x.norm()).ln() / TWO_PI;
    }
    let ystar = y * (radius * radius / ys);
    ((y.norm() * x.dist(ystar)) / (radius * x.dist(y))).ln() / TWO_PI
}

fn half_plane_green(a0: f64, x: Point, y: Point) -> f64 {
    let ybar = Point::new(2.0 * a0 - y.x1, y.x2);
    (x.dist(ybar) / x.dist(y)).ln() / TWO_PI
}

fn turkington_green(r_obs: f64, x: Point, y: Point) -> f64 {
    let r2 = r_obs * r_obs;
    let num = 1.0 + 4.0 * x.x1 * y.x1 / x.dist(y).powi(2);
    let dotm = x.x1 * y.x1 + x.x2 * y.x2 - r2;
    let cross = x.x2 * y.x1 - x.x1 * y.x2;
    let den = 1.0 + 4.0 * r2 * x.x1 * y.x1 / (dotm * dotm + cross * cross);
    (num / den).ln() / FOUR_PI
}

/// Builds the multiply-connected evaluator G_* = G + Σ Z_k ω^{kh} Z_h from the
/// Dirichlet Green function and the harmonic measures of the obstacles.
pub fn koebe_assemble(domain: &Domain, h: f64) -> Result<GreenEvaluator> {
    let obstacle_comps: Vec<usize> = domain
        .components()
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            matches!(
                c.piece,
                BoundaryPiece::Circle { domain_inside: false, .. }
                    | BoundaryPiece::RectRing { domain_inside: false, .. }
            )
        })
        .map(|(i, _)| i)
        .collect();
    if obstacle_comps.is_empty() {
        return Err(Error::UnsupportedKind(
            "Koebe assembly needs a multiply-connected domain".into(),
        ));
    }
    let base = NumericGreen::new(domain, h)?;
    let grid = base.grid.clone();
    let m = obstacle_comps.len();
    let mut z = Vec::with_capacity(m);
    for &comp in &obstacle_comps {
        let bdata =
            BoundaryValues::from_fn(&grid, |n| if n.component == comp { 1.0 } else { 0.0 });
        let zf = base.solver.solve(&grid, &GridField::zeros(&grid), &bdata)?;
        z.push((zf, bdata));
    }
    // omega_{kh} = ∫ ∇Z_k · ∇Z_h in the operator-consistent form so that the
    // discrete obstacle fluxes of G_* cancel exactly
    let mut omega = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in a..m {
            let v = energy_form(&grid, &z[a].0, &z[a].1, &z[b].0, &z[b].1);
            omega[a][b] = v;
            omega[b][a] = v;
        }
    }
    let (omega_inv, cond) = invert_spd(&omega)?;
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::SingularOmegaMatrix(cond));
    }
    Ok(GreenEvaluator {
        domain: Some(domain.clone()),
        kernel: Kernel::Koebe(KoebeGreen { base, z, obstacle_comps, omega, omega_inv }),
    })
}

/// Dense inverse by Gauss–Jordan with partial pivoting; returns the inverse
/// and a 1-norm condition estimate.
fn invert_spd(a: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|r| {
        let mut row = r.clone();
        row.extend(std::iter::repeat(0.0).take(n));
        row
    }).collect();
    for i in 0..n {
        m[i][n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[piv][col].abs() < 1e-300 {
            return Err(Error::SingularOmegaMatrix(f64::INFINITY));
        }
        m.swap(col, piv);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
    }
    let inv: Vec<Vec<f64>> = m.iter().map(|r| r[n..].to_vec()).collect();
    let norm1 = |mat: &[Vec<f64>]| -> f64 {
        (0..n)
            .map(|j| (0..n).map(|i| mat[i][j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let cond = norm1(a) * norm1(&inv);
    Ok((inv, cond))
}

/// Per-ε record of the boundary expansion probe.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BoundaryExpansionReport {
    /// Requested ε values.
    pub eps: Vec<f64>,
    /// Effective ε values (quantized to the lattice in numeric mode).
    pub effective_eps: Vec<f64>,
    /// r(ε) = [H(x̄+εx, x̄+εx) − log(2 ε x₁)/2π] / ε.
    pub r_values: Vec<f64>,
    /// Extrapolated limit of r(ε).
    pub limit_estimate: f64,
    /// −K |x|² / (4π x₁).
    pub expected: f64,
}

/// Probes the Robin function along an inward ray at a physical boundary point
/// and extracts the curvature coefficient of its expansion.
pub fn boundary_h_expansion(
    ge: &GreenEvaluator,
    x_bar: Point,
    x_local: Point,
    eps_list: &[f64],
) -> Result<BoundaryExpansionReport> {
    if !(x_local.x1 > 0.0) {
        return Err(Error::InvalidGeometry(
            "probe point must have positive inward-normal coordinate".into(),
        ));
    }
    let domain = ge
        .domain()
        .ok_or_else(|| Error::UnsupportedKind("whole plane has no boundary".into()))?;
    let curv = domain.curvature_at(x_bar)?;
    let n_hat = domain.inward_normal(x_bar)?;
    let t_hat = n_hat.perp();
    let mut eff = Vec::new();
    let mut r_values = Vec::new();
    for &eps in eps_list {
        let eps_eff = match ge.grid() {
            Some(g) => {
                let d = eps * x_local.norm();
                let steps = (d / g.h).round().max(1.0);
                eps * (steps * g.h) / d
            }
            None => eps,
        };
        let p = x_bar + (n_hat * x_local.x1 + t_hat * x_local.x2) * eps_eff;
        let h_val = ge.robin(p)?;
        let r = (h_val - (2.0 * eps_eff * x_local.x1).ln() / TWO_PI) / eps_eff;
        eff.push(eps_eff);
        r_values.push(r);
    }
    // r(ε) = r0 + cε: eliminate the linear term with the last two probes
    let limit = if r_values.len() >= 2 {
        let n = r_values.len();
        let (e1, e2) = (eff[n - 2], eff[n - 1]);
        let (r1, r2) = (r_values[n - 2], r_values[n - 1]);
        if (e1 - e2).abs() > 1e-30 {
            (e1 * r2 - e2 * r1) / (e1 - e2)
        } else {
            r2
        }
    } else {
        *r_values.last().unwrap_or(&f64::NAN)
    };
    let expected = -curv * x_local.norm_sq() / (FOUR_PI * x_local.x1);
    Ok(BoundaryExpansionReport {
        eps: eps_list.to_vec(),
        effective_eps: eff,
        r_values,
        limit_estimate: limit,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_domain, DomainKind};

    #[test]
    fn half_plane_forced_value() {
        let d = make_domain(DomainKind::HalfPlaneWindow { a0: 0.0, width: 6.0, height: 6.0 })
            .unwrap();
        let ge = GreenEvaluator::analytic(&d).unwrap();
        let g = ge.green(Point::new(1.0, 0.0), Point::new(1.0, 1.0)).unwrap();
        let expected = 5.0f64.ln() / FOUR_PI;
        assert!((g - expected).abs() < 1e-14, "{g} vs {expected}");
    }

    #[test]
    fn turkington_forced_value() {
        let d = make_domain(DomainKind::DiscComplementWindow {
            r_obs: 1.0,
            width: 10.0,
            height: 10.0,
        })
        .unwrap();
        let ge = GreenEvaluator::analytic(&d).unwrap();
        let g = ge.green(Point::new(2.0, 0.0), Point::new(3.0, 0.0)).unwrap();
        let expected = (625.0f64 / 49.0).ln() / FOUR_PI;
        assert!((g - expected).abs() < 1e-14, "{g} vs {expected}");
        // the kernel rejects the obstacle and the left half-plane
        assert!(ge.green(Point::new(0.5, 0.0), Point::new(3.0, 0.0)).is_err());
        assert!(ge.green(Point::new(-2.0, 3.0), Point::new(3.0, 0.0)).is_err());
    }

    #[test]
    fn disc_center_value_and_boundary_vanishing() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let ge = GreenEvaluator::analytic(&d).unwrap();
        let g = ge.green(Point::new(0.0, 0.0), Point::new(0.5, 0.0)).unwrap();
        let expected = 2.0f64.ln() / TWO_PI;
        assert!((g - expected).abs() < 1e-14);
        // image kernel vanishes at the boundary
        let gb = ge.green(Point::new(0.999999, 0.0), Point::new(0.5, 0.0)).unwrap();
        assert!(gb.abs() < 1e-5);
    }

    #[test]
    fn robin_closed_forms() {
        let hp = make_domain(DomainKind::HalfPlaneWindow { a0: 0.0, width: 6.0, height: 6.0 })
            .unwrap();
        let ge = GreenEvaluator::analytic(&hp).unwrap();
        assert!(ge.robin(Point::new(0.5, 0.0)).unwrap().abs() < 1e-14);
        let disc = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let gd = GreenEvaluator::analytic(&disc).unwrap();
        assert!(gd.robin(Point::new(0.0, 0.0)).unwrap().abs() < 1e-14);
    }

    #[test]
    fn coincident_points_rejected() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let ge = GreenEvaluator::analytic(&d).unwrap();
        assert!(matches!(
            ge.green(Point::new(0.1, 0.1), Point::new(0.1, 0.1)),
            Err(Error::CoincidentPoints)
        ));
    }

    #[test]
    fn whole_plane_has_no_robin() {
        let ge = GreenEvaluator::whole_plane();
        assert!(matches!(
            ge.robin(Point::new(0.0, 0.0)),
            Err(Error::WholePlaneSelfInteraction)
        ));
    }

    #[test]
    fn numeric_matches_delta_solve() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let ge = GreenEvaluator::numeric(&d, 0.05).unwrap();
        let grid = ge.grid().unwrap().clone();
        let y = Point::new(0.3, 0.0);
        let (_, rhs) = crate::poisson::delta_rhs(&grid, y).unwrap();
        let u = crate::poisson::solve_dirichlet(&grid, &rhs, &BoundaryValues::zeros(&grid))
            .unwrap();
        let x = Point::new(-0.2, 0.4);
        let k = grid.nearest_interior(x).unwrap();
        let g = ge.green(x, y).unwrap();
        assert!((g - u.vals[k]).abs() < 1e-12);
    }

    #[test]
    fn numeric_green_symmetry() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let ge = GreenEvaluator::numeric(&d, 0.1).unwrap();
        let pairs = [
            (Point::new(0.3, 0.1), Point::new(-0.4, 0.2)),
            (Point::new(0.0, 0.5), Point::new(0.5, -0.3)),
            (Point::new(-0.6, -0.2), Point::new(0.2, 0.6)),
        ];
        for (x, y) in pairs {
            let a = ge.green(x, y).unwrap();
            let b = ge.green(y, x).unwrap();
            assert!((a - b).abs() < 1e-8, "asym {a} vs {b}");
        }
    }

    #[test]
    fn numeric_robin_matches_disc_analytic() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let num = GreenEvaluator::numeric(&d, 0.01).unwrap();
        let ana = GreenEvaluator::analytic(&d).unwrap();
        let x = Point::new(0.3, 0.2);
        let hn = num.robin(x).unwrap();
        let ha = ana.robin(x).unwrap();
        assert!((hn - ha).abs() < 5e-3, "numeric {hn} vs analytic {ha}");
    }

    #[test]
    fn robin_decreases_toward_boundary() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let ge = GreenEvaluator::analytic(&d).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..8 {
            let r = 0.1 + 0.1 * i as f64;
            let h = ge.robin(Point::new(r, 0.0)).unwrap();
            assert!(h < prev);
            prev = h;
        }
    }

    #[test]
    fn boundary_expansion_half_plane_flat() {
        let d = make_domain(DomainKind::HalfPlaneWindow { a0: 0.0, width: 6.0, height: 6.0 })
            .unwrap();
        let ge = GreenEvaluator::analytic(&d).unwrap();
        let rep = boundary_h_expansion(
            &ge,
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            &[1e-2, 1e-3],
        )
        .unwrap();
        for r in &rep.r_values {
            assert!(r.abs() < 1e-10, "flat boundary coefficient {r}");
        }
        assert_eq!(rep.expected, 0.0);
    }

    #[test]
    fn boundary_expansion_disc_curvature() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let ge = GreenEvaluator::analytic(&d).unwrap();
        let rep = boundary_h_expansion(
            &ge,
            Point::new(1.0, 0.0),
            Point::new(1.0, 0.0),
            &[2e-3, 1e-3],
        )
        .unwrap();
        let expected = -1.0 / FOUR_PI;
        assert!((rep.expected - expected).abs() < 1e-14);
        let last = *rep.r_values.last().unwrap();
        assert!((last - expected).abs() < 0.01 * expected.abs(), "r {last} vs {expected}");
        // oblique probe x = (1,1): coefficient −2/(4π)
        let rep2 = boundary_h_expansion(
            &ge,
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            &[2e-3, 1e-3],
        )
        .unwrap();
        let expected2 = -1.0 / TWO_PI;
        assert!((rep2.expected - expected2).abs() < 1e-14);
        assert!(
            (rep2.limit_estimate - expected2).abs() < 0.02 * expected2.abs(),
            "limit {} vs {expected2}",
            rep2.limit_estimate
        );
    }
}
