//! Electrostatic capacity: numeric condenser solves on grids, the
//! segment-vs-ray closed form through complete elliptic integrals, and the
//! capacity inequality suite.

use crate::domain::{discretize, make_domain, Domain, DomainKind, ObstacleShape};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::poisson::{dirichlet_energy, BoundaryValues, GridField, Poisson};

/// Complete elliptic integral of the first kind in the modulus convention,
/// 𝒦(γ) = ∫_0^{π/2} dθ/√(1−γ² sin²θ), evaluated by the arithmetic–geometric
/// mean: 𝒦(γ) = π / (2 AGM(1, √(1−γ²))).
pub fn elliptic_k(gamma: f64) -> Result<f64> {
    elliptic_k_with_tol(gamma, 1e-15)
}

/// AGM evaluation with an explicit convergence threshold (used by the
/// two-tolerance oracle tests).
pub fn elliptic_k_with_tol(gamma: f64, tol: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::ModulusOutOfRange(gamma));
    }
    let mut a = 1.0f64;
    let mut b = (1.0 - gamma * gamma).sqrt();
    for _ in 0..60 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        a = an;
        b = bn;
        if (a - b).abs() <= tol * a {
            break;
        }
    }
    Ok(std::f64::consts::PI / (2.0 * a))
}

/// Closed-form condenser value and the log 16(1+s) bound.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SegmentRayCapacity {
    pub s: f64,
    /// capa([−1,0], R²∖[s,∞)) = 2 𝒦(√(1/(1+s))) / 𝒦(√(s/(1+s))).
    pub capa: f64,
    /// 2π / capa.
    pub two_pi_over_capa: f64,
    /// log 16(1+s).
    pub bound: f64,
    pub bound_holds: bool,
}

/// Capacity of the segment [−1,0] against the complement of the ray [s,∞).
pub fn capacity_segment_ray(s: f64) -> Result<SegmentRayCapacity> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveS(s));
    }
    let k_num = elliptic_k((1.0 / (1.0 + s)).sqrt())?;
    let k_den = elliptic_k((s / (1.0 + s)).sqrt())?;
    let capa = 2.0 * k_num / k_den;
    let two_pi_over = 2.0 * std::f64::consts::PI / capa;
    let bound = (16.0 * (1.0 + s)).ln();
    Ok(SegmentRayCapacity {
        s,
        capa,
        two_pi_over_capa: two_pi_over,
        bound,
        bound_holds: two_pi_over <= bound,
    })
}

/// Numeric condenser: capa(K, Ω) with K realized as an obstacle component
/// held at potential 1 and every other boundary component grounded.
pub fn capacity_numeric(outer: &Domain, k_shape: ObstacleShape, h: f64) -> Result<f64> {
    let domain = outer.clone().with_obstacle(k_shape)?;
    // the gap between K and the rest must carry at least 4 nodes
    let feat = domain.min_feature_size();
    if 4.0 * h > feat {
        return Err(Error::GapUnderResolved(format!(
            "gap {feat:.4} needs h <= {:.4}, got {h}",
            feat / 4.0
        )));
    }
    let grid = discretize(&domain, h)?;
    let k_comp = domain.components().len() - 1;
    let bdata = BoundaryValues::from_fn(&grid, |n| if n.component == k_comp { 1.0 } else { 0.0 });
    let solver = Poisson::new(&grid);
    let u = solver.solve(&grid, &GridField::zeros(&grid), &bdata)?;
    dirichlet_energy(&grid, &u, &bdata)
}

/// Numeric realization of capa([−1,0], R²∖[s,∞)): both the segment and the
/// ray are 2h-thick rectangles inside a grounded frame of half-width `frame`.
/// The frame truncation error decays like 1/frame; callers can Richardson-
/// extrapolate over two frames.
pub fn capacity_segment_ray_numeric(s: f64, h: f64, frame: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveS(s));
    }
    let t = h; // half-thickness of the segment realizations
    let outer = make_domain(DomainKind::Rectangle {
        x_lo: -frame,
        x_hi: frame,
        y_lo: -frame,
        y_hi: frame,
    })?
    .with_obstacle(ObstacleShape::Rect {
        x_lo: s,
        x_hi: frame * 0.75,
        y_lo: -t,
        y_hi: t,
    })?;
    capacity_numeric(
        &outer,
        ObstacleShape::Rect { x_lo: -1.0, x_hi: 0.0, y_lo: -t, y_hi: t },
        h,
    )
}

/// One inequality check of the Appendix-style capacity suite.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub capa: f64,
    /// Left side of the inequality (4π/capa or 2π/capa, slack-adjusted).
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Discretization slack applied on the capacity side of each inequality.
pub const CAPACITY_SLACK: f64 = 0.02;

/// Runs the capacity inequality suite at mesh width `h`:
/// area bound (finite-measure domains), half-plane local-area bound,
/// diameter bound with an obstacle ball, and the finite-complement variant.
pub fn check_capacity_bounds(h: f64) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    let pi = std::f64::consts::PI;

    // area bound, concentric equality case: K = B(0, 1/2), Ω = B(0, 1)
    {
        let outer = make_domain(DomainKind::Disc { radius: 1.0 })?;
        let k = ObstacleShape::Disc { center: Point::new(0.0, 0.0), radius: 0.5 };
        let capa = capacity_numeric(&outer, k, h)?;
        let rhs = 4.0f64.ln(); // log(area ratio)
        push_check(&mut out, "area-bound concentric ratio 4", capa, 4.0 * pi, rhs);
    }

    // area bound, off-center strict case
    {
        let outer = make_domain(DomainKind::Disc { radius: 1.0 })?;
        let k = ObstacleShape::Disc { center: Point::new(0.2, 0.1), radius: 0.3 };
        let capa = capacity_numeric(&outer, k, h)?;
        let rhs = (1.0 / 0.09f64).ln();
        push_check(&mut out, "area-bound off-center", capa, 4.0 * pi, rhs);
    }

    // half-plane local-area bound: K = B((1,0), 0.4) in {x1 > 0}
    {
        let outer = make_domain(DomainKind::HalfPlaneWindow { a0: 0.0, width: 8.0, height: 8.0 })?;
        let k = ObstacleShape::Disc { center: Point::new(1.0, 0.0), radius: 0.4 };
        let capa = capacity_numeric(&outer, k, h)?;
        let sup_sq = (1.0 + 0.4f64) * (1.0 + 0.4);
        let rhs = (8.0 * pi * sup_sq / (pi * 0.16)).ln();
        push_check(&mut out, "half-plane local-area bound", capa, 4.0 * pi, rhs);
    }

    // diameter bound: complement contains a ball of radius 1/2
    {
        let outer =
            make_domain(DomainKind::DiscComplementWindow { r_obs: 0.5, width: 8.0, height: 8.0 })?;
        let tk = h;
        let k = ObstacleShape::Rect { x_lo: 2.0, x_hi: 3.0, y_lo: -tk, y_hi: tk };
        let capa = capacity_numeric(&outer, k.clone(), h)?;
        let dist = dist_rect_to_circle(&k, 0.5);
        let diam = rect_diam(&k);
        let rho = 0.5;
        let rhs = (16.0 * (1.0 + dist / (2.0 * rho)) * (1.0 + 2.0 * dist / diam)).ln();
        push_check(&mut out, "diameter bound (ball complement)", capa, 2.0 * pi, rhs);

        // finite-complement variant on the same condenser: the complement of
        // R² ∖ B(0, 1/2) is the closed ball, connected with finite measure
        let mu = pi * rho * rho;
        let rhs4 =
            (16.0 * (1.0 + pi * dist * (2.0 * rho) / (2.0 * mu)) * (1.0 + 2.0 * dist / diam)).ln();
        push_check(&mut out, "diameter bound (finite complement)", capa, 2.0 * pi, rhs4);
    }

    Ok(out)
}

fn push_check(out: &mut Vec<BoundCheck>, name: &str, capa: f64, numerator: f64, rhs: f64) {
    let lhs = numerator / (capa * (1.0 + CAPACITY_SLACK));
    out.push(BoundCheck {
        name: name.to_string(),
        capa,
        lhs,
        rhs,
        slack: rhs - numerator / capa,
        holds: lhs <= rhs,
    });
}

fn dist_rect_to_circle(k: &ObstacleShape, r: f64) -> f64 {
    match *k {
        ObstacleShape::Rect { x_lo, y_lo, y_hi, .. } => {
            // nearest rect point to the origin-centered circle
            let y = if y_lo <= 0.0 && y_hi >= 0.0 { 0.0 } else { y_lo.abs().min(y_hi.abs()) };
            (x_lo * x_lo + y * y).sqrt() - r
        }
        ObstacleShape::Disc { center, radius } => center.norm() - r - radius,
    }
}

fn rect_diam(k: &ObstacleShape) -> f64 {
    match *k {
        ObstacleShape::Rect { x_lo, x_hi, y_lo, y_hi } => {
            ((x_hi - x_lo).powi(2) + (y_hi - y_lo).powi(2)).sqrt()
        }
        ObstacleShape::Disc { radius, .. } => 2.0 * radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elliptic_k_special_values() {
        assert!((elliptic_k(0.0).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        // K(modulus 1/sqrt(2)) = 1.854074677301372
        let k = elliptic_k(0.5f64.sqrt()).unwrap();
        assert!((k - 1.8540746773013719).abs() < 1e-12, "K = {k}");
        assert!(matches!(elliptic_k(1.0), Err(Error::ModulusOutOfRange(_))));
        assert!(matches!(elliptic_k(-0.1), Err(Error::ModulusOutOfRange(_))));
    }

    #[test]
    fn elliptic_k_monotone() {
        let mut prev = 0.0;
        for i in 0..50 {
            let g = i as f64 / 50.0;
            let k = elliptic_k(g).unwrap();
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn segment_ray_symmetric_case() {
        let r = capacity_segment_ray(1.0).unwrap();
        assert!((r.capa - 2.0).abs() < 1e-14, "capa {}", r.capa);
        // bound check: pi <= log 32
        assert!(r.bound_holds);
        assert!((r.bound - 32.0f64.ln()).abs() < 1e-14);
        assert!((r.two_pi_over_capa - std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn segment_ray_monotone_decreasing_in_s() {
        let mut prev = f64::INFINITY;
        for i in 1..=10 {
            let s = 0.4 * i as f64;
            let c = capacity_segment_ray(s).unwrap().capa;
            assert!(c < prev, "s={s}: {c} !< {prev}");
            prev = c;
        }
    }

    #[test]
    fn segment_ray_rejects_nonpositive() {
        assert!(matches!(capacity_segment_ray(0.0), Err(Error::NonPositiveS(_))));
        assert!(matches!(capacity_segment_ray(-1.0), Err(Error::NonPositiveS(_))));
    }

    #[test]
    fn numeric_annulus_condenser() {
        // K = B(0,1), Ω = B(0,e): capa = 2π/log(e) = 2π
        let outer = make_domain(DomainKind::Disc { radius: std::f64::consts::E }).unwrap();
        let k = ObstacleShape::Disc { center: Point::new(0.0, 0.0), radius: 1.0 };
        let capa = capacity_numeric(&outer, k, 0.02).unwrap();
        let target = 2.0 * std::f64::consts::PI;
        assert!((capa - target).abs() / target < 0.03, "capa {capa}");
    }

    #[test]
    fn szego_bound_equality_case_within_slack() {
        let outer = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let k = ObstacleShape::Disc { center: Point::new(0.0, 0.0), radius: 0.5 };
        let capa = capacity_numeric(&outer, k, 0.02).unwrap();
        let lhs = 4.0 * std::f64::consts::PI / (capa * (1.0 + CAPACITY_SLACK));
        assert!(lhs <= 4.0f64.ln(), "lhs {lhs} vs {}", 4.0f64.ln());
    }

    #[test]
    fn k_touching_outer_rejected() {
        let outer = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let k = ObstacleShape::Disc { center: Point::new(0.6, 0.0), radius: 0.5 };
        assert!(capacity_numeric(&outer, k, 0.02).is_err());
    }

    #[test]
    fn gap_resolution_guard() {
        let outer = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let k = ObstacleShape::Disc { center: Point::new(0.0, 0.0), radius: 0.9 };
        // gap = 0.1 < 4h at h = 0.05
        assert!(matches!(
            capacity_numeric(&outer, k, 0.05),
            Err(Error::GapUnderResolved(_))
        ));
    }

    #[test]
    fn capacity_monotone_in_k_and_domain() {
        let h = 0.025;
        let outer = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let small = ObstacleShape::Disc { center: Point::new(0.0, 0.0), radius: 0.3 };
        let big = ObstacleShape::Disc { center: Point::new(0.0, 0.0), radius: 0.5 };
        let c_small = capacity_numeric(&outer, small.clone(), h).unwrap();
        let c_big = capacity_numeric(&outer, big, h).unwrap();
        assert!(c_big > c_small);
        let bigger_outer = make_domain(DomainKind::Disc { radius: 1.5 }).unwrap();
        let c_bigger_domain = capacity_numeric(&bigger_outer, small, h).unwrap();
        assert!(c_bigger_domain < c_small);
    }
}
