//! Planar computational domains and their uniform-grid discretizations.
//!
//! Domains are analytic shapes (disc, rectangle, annulus, truncation windows
//! for unbounded settings) plus optional interior obstacles. Boundary
//! components are tagged `Physical` or `Artificial`; artificial edges are the
//! truncation frame of an unbounded domain and carry caller-supplied far-field
//! Dirichlet data.

use crate::error::{Error, Result};
use crate::geom::Point;

/// Analytic domain kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    Disc { radius: f64 },
    Rectangle { x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64 },
    Annulus { rho_in: f64, r_out: f64 },
    /// Truncation window [a0, a0+width] x [-height/2, height/2] of the
    /// half-plane {x1 > a0}. The left edge is the physical boundary.
    HalfPlaneWindow { a0: f64, width: f64, height: f64 },
    /// Window [-width/2, width/2] x [-height/2, height/2] minus the obstacle
    /// disc B(0, r_obs). Only the obstacle circle is physical.
    DiscComplementWindow { r_obs: f64, width: f64, height: f64 },
}

/// Interior obstacle shapes for multiply-connected variants.
#[derive(Clone, Debug, PartialEq)]
pub enum ObstacleShape {
    Disc { center: Point, radius: f64 },
    Rect { x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64 },
}

impl ObstacleShape {
    fn contains(&self, p: Point) -> bool {
        match *self {
            ObstacleShape::Disc { center, radius } => p.dist(center) < radius,
            ObstacleShape::Rect { x_lo, x_hi, y_lo, y_hi } => {
                p.x1 > x_lo && p.x1 < x_hi && p.x2 > y_lo && p.x2 < y_hi
            }
        }
    }

    fn area(&self) -> f64 {
        match *self {
            ObstacleShape::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
            ObstacleShape::Rect { x_lo, x_hi, y_lo, y_hi } => (x_hi - x_lo) * (y_hi - y_lo),
        }
    }

    fn min_side(&self) -> f64 {
        match *self {
            ObstacleShape::Disc { radius, .. } => 2.0 * radius,
            ObstacleShape::Rect { x_lo, x_hi, y_lo, y_hi } => (x_hi - x_lo).min(y_hi - y_lo),
        }
    }
}

/// Tag of a boundary component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryTag {
    Physical,
    Artificial,
}

/// Geometric carrier of one boundary component.
#[derive(Clone, Debug)]
pub enum BoundaryPiece {
    /// `domain_inside`: true for an outer circle, false for an obstacle circle.
    Circle { center: Point, radius: f64, domain_inside: bool },
    /// Straight edge from `a` to `b`; `inward` is the unit normal into the domain.
    Segment { a: Point, b: Point, inward: Point },
    /// Closed rectangle ring; `domain_inside`: true for an outer rectangle,
    /// false for a rectangular obstacle.
    RectRing { x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, domain_inside: bool },
}

impl BoundaryPiece {
    /// Nearest point on the piece.
    pub fn project(&self, p: Point) -> Point {
        match *self {
            BoundaryPiece::Circle { center, radius, .. } => {
                let d = p - center;
                let n = d.norm();
                if n < 1e-300 {
                    center + Point::new(radius, 0.0)
                } else {
                    center + d * (radius / n)
                }
            }
            BoundaryPiece::Segment { a, b, .. } => project_segment(p, a, b),
            BoundaryPiece::RectRing { x_lo, x_hi, y_lo, y_hi, .. } => {
                let corners = [
                    Point::new(x_lo, y_lo),
                    Point::new(x_hi, y_lo),
                    Point::new(x_hi, y_hi),
                    Point::new(x_lo, y_hi),
                ];
                let mut best = corners[0];
                let mut best_d = f64::INFINITY;
                for k in 0..4 {
                    let q = project_segment(p, corners[k], corners[(k + 1) % 4]);
                    let d = p.dist(q);
                    if d < best_d {
                        best_d = d;
                        best = q;
                    }
                }
                best
            }
        }
    }

    pub fn distance(&self, p: Point) -> f64 {
        p.dist(self.project(p))
    }

    /// Total arclength.
    pub fn length(&self) -> f64 {
        match *self {
            BoundaryPiece::Circle { radius, .. } => 2.0 * std::f64::consts::PI * radius,
            BoundaryPiece::Segment { a, b, .. } => a.dist(b),
            BoundaryPiece::RectRing { x_lo, x_hi, y_lo, y_hi, .. } => {
                2.0 * ((x_hi - x_lo) + (y_hi - y_lo))
            }
        }
    }

    /// Point at arclength `s` along the traversal that keeps the domain on
    /// the left (counterclockwise outer boundary, clockwise obstacles).
    pub fn point_at(&self, s: f64) -> Point {
        match *self {
            BoundaryPiece::Circle { center, radius, domain_inside } => {
                let th = if domain_inside { s / radius } else { -s / radius };
                center + Point::new(radius * th.cos(), radius * th.sin())
            }
            BoundaryPiece::Segment { a, b, .. } => {
                let t = (s / a.dist(b)).clamp(0.0, 1.0);
                a + (b - a) * t
            }
            BoundaryPiece::RectRing { x_lo, x_hi, y_lo, y_hi, domain_inside } => {
                let w = x_hi - x_lo;
                let hgt = y_hi - y_lo;
                let per = 2.0 * (w + hgt);
                let mut s = if domain_inside { s } else { per - s }.rem_euclid(per);
                // ccw from (x_lo, y_lo): bottom, right, top, left
                if s < w {
                    return Point::new(x_lo + s, y_lo);
                }
                s -= w;
                if s < hgt {
                    return Point::new(x_hi, y_lo + s);
                }
                s -= hgt;
                if s < w {
                    return Point::new(x_hi - s, y_hi);
                }
                s -= w;
                Point::new(x_lo, y_hi - s)
            }
        }
    }

    /// Arclength coordinate of a point assumed to lie on the piece.
    pub fn arclength_of(&self, p: Point) -> f64 {
        match *self {
            BoundaryPiece::Circle { center, radius, domain_inside } => {
                let d = p - center;
                let th = d.x2.atan2(d.x1).rem_euclid(2.0 * std::f64::consts::PI);
                if domain_inside {
                    radius * th
                } else {
                    radius * (2.0 * std::f64::consts::PI - th).rem_euclid(2.0 * std::f64::consts::PI)
                }
            }
            BoundaryPiece::Segment { a, b, .. } => p.dist(a).min(a.dist(b)),
            BoundaryPiece::RectRing { x_lo, x_hi, y_lo, y_hi, domain_inside } => {
                let w = x_hi - x_lo;
                let hgt = y_hi - y_lo;
                let per = 2.0 * (w + hgt);
                // classify by nearest edge
                let d_bot = (p.x2 - y_lo).abs();
                let d_right = (p.x1 - x_hi).abs();
                let d_top = (p.x2 - y_hi).abs();
                let d_left = (p.x1 - x_lo).abs();
                let m = d_bot.min(d_right).min(d_top).min(d_left);
                let s_ccw = if m == d_bot {
                    (p.x1 - x_lo).clamp(0.0, w)
                } else if m == d_right {
                    w + (p.x2 - y_lo).clamp(0.0, hgt)
                } else if m == d_top {
                    w + hgt + (x_hi - p.x1).clamp(0.0, w)
                } else {
                    2.0 * w + hgt + (y_hi - p.x2).clamp(0.0, hgt)
                };
                if domain_inside {
                    s_ccw
                } else {
                    (per - s_ccw).rem_euclid(per)
                }
            }
        }
    }

    /// Signed curvature at a point of the piece, with the convention that a
    /// disc of radius R seen from inside has K = 1/R and a straight edge 0.
    /// Rectangle corners have no curvature.
    pub fn curvature_at(&self, p: Point) -> Result<f64> {
        match *self {
            BoundaryPiece::Circle { radius, domain_inside, .. } => {
                Ok(if domain_inside { 1.0 / radius } else { -1.0 / radius })
            }
            BoundaryPiece::Segment { .. } => Ok(0.0),
            BoundaryPiece::RectRing { x_lo, x_hi, y_lo, y_hi, .. } => {
                let tol = 1e-9 * ((x_hi - x_lo) + (y_hi - y_lo));
                let on_v = (p.x1 - x_lo).abs() < tol || (p.x1 - x_hi).abs() < tol;
                let on_h = (p.x2 - y_lo).abs() < tol || (p.x2 - y_hi).abs() < tol;
                if on_v && on_h {
                    Err(Error::UnsupportedKind("rectangle corner".into()))
                } else {
                    Ok(0.0)
                }
            }
        }
    }

    /// Unit normal pointing into the domain at a point of the piece.
    pub fn inward_normal(&self, p: Point) -> Point {
        match *self {
            BoundaryPiece::Circle { center, radius: _, domain_inside } => {
                let d = p - center;
                let n = d.norm().max(1e-300);
                if domain_inside {
                    d * (-1.0 / n)
                } else {
                    d * (1.0 / n)
                }
            }
            BoundaryPiece::Segment { inward, .. } => inward,
            BoundaryPiece::RectRing { x_lo, x_hi, y_lo, y_hi, domain_inside } => {
                let d_bot = (p.x2 - y_lo).abs();
                let d_right = (p.x1 - x_hi).abs();
                let d_top = (p.x2 - y_hi).abs();
                let d_left = (p.x1 - x_lo).abs();
                let m = d_bot.min(d_right).min(d_top).min(d_left);
                let sign = if domain_inside { 1.0 } else { -1.0 };
                if m == d_bot {
                    Point::new(0.0, sign)
                } else if m == d_right {
                    Point::new(-sign, 0.0)
                } else if m == d_top {
                    Point::new(0.0, -sign)
                } else {
                    Point::new(sign, 0.0)
                }
            }
        }
    }
}

fn project_segment(p: Point, a: Point, b: Point) -> Point {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// One tagged boundary component.
#[derive(Clone, Debug)]
pub struct BoundaryComponent {
    pub piece: BoundaryPiece,
    pub tag: BoundaryTag,
}

/// A validated planar domain: analytic kind plus optional obstacles.
#[derive(Clone, Debug)]
pub struct Domain {
    pub kind: DomainKind,
    /// Extra obstacles added on top of the kind's implicit hole (if any).
    pub obstacles: Vec<ObstacleShape>,
    components: Vec<BoundaryComponent>,
}

/// Validates parameters and builds a domain.
pub fn make_domain(kind: DomainKind) -> Result<Domain> {
    Domain::new(kind)
}

impl Domain {
    pub fn new(kind: DomainKind) -> Result<Self> {
        use DomainKind::*;
        let mut components = Vec::new();
        match kind {
            Disc { radius } => {
                if radius <= 0.0 {
                    return Err(Error::InvalidGeometry(format!("disc radius {radius} <= 0")));
                }
                components.push(BoundaryComponent {
                    piece: BoundaryPiece::Circle {
                        center: Point::new(0.0, 0.0),
                        radius,
                        domain_inside: true,
                    },
                    tag: BoundaryTag::Physical,
                });
            }
            Rectangle { x_lo, x_hi, y_lo, y_hi } => {
                if x_hi <= x_lo || y_hi <= y_lo {
                    return Err(Error::InvalidGeometry("rectangle sides must be positive".into()));
                }
                components.push(BoundaryComponent {
                    piece: BoundaryPiece::RectRing { x_lo, x_hi, y_lo, y_hi, domain_inside: true },
                    tag: BoundaryTag::Physical,
                });
            }
            Annulus { rho_in, r_out } => {
                if rho_in <= 0.0 || r_out <= 0.0 {
                    return Err(Error::InvalidGeometry("annulus radii must be positive".into()));
                }
                if rho_in >= r_out {
                    return Err(Error::InvalidGeometry(format!(
                        "annulus requires rho_in < r_out, got {rho_in} >= {r_out}"
                    )));
                }
                components.push(BoundaryComponent {
                    piece: BoundaryPiece::Circle {
                        center: Point::new(0.0, 0.0),
                        radius: r_out,
                        domain_inside: true,
                    },
                    tag: BoundaryTag::Physical,
                });
                components.push(BoundaryComponent {
                    piece: BoundaryPiece::Circle {
                        center: Point::new(0.0, 0.0),
                        radius: rho_in,
                        domain_inside: false,
                    },
                    tag: BoundaryTag::Physical,
                });
            }
            HalfPlaneWindow { a0, width, height } => {
                if width <= 0.0 || height <= 0.0 {
                    return Err(Error::InvalidGeometry("window sides must be positive".into()));
                }
                let (y_lo, y_hi) = (-height / 2.0, height / 2.0);
                let x_hi = a0 + width;
                // physical half-plane boundary
                components.push(BoundaryComponent {
                    piece: BoundaryPiece::Segment {
                        a: Point::new(a0, y_lo),
                        b: Point::new(a0, y_hi),
                        inward: Point::new(1.0, 0.0),
                    },
                    tag: BoundaryTag::Physical,
                });
                // truncation frame
                components.push(BoundaryComponent {
                    piece: BoundaryPiece::Segment {
                        a: Point::new(x_hi, y_lo),
                        b: Point::new(x_hi, y_hi),
                        inward: Point::new(-1.0, 0.0),
                    },
                    tag: BoundaryTag::Artificial,
                });
                components.push(BoundaryComponent {
                    piece: BoundaryPiece::Segment {
                        a: Point::new(a0, y_lo),
                        b: Point::new(x_hi, y_lo),
                        inward: Point::new(0.0, 1.0),
                    },
                    tag: BoundaryTag::Artificial,
                });
                components.push(BoundaryComponent {
                    piece: BoundaryPiece::Segment {
                        a: Point::new(a0, y_hi),
                        b: Point::new(x_hi, y_hi),
                        inward: Point::new(0.0, -1.0),
                    },
                    tag: BoundaryTag::Artificial,
                });
            }
            DiscComplementWindow { r_obs, width, height } => {
                if r_obs <= 0.0 || width <= 0.0 || height <= 0.0 {
                    return Err(Error::InvalidGeometry("lengths must be positive".into()));
                }
                if 2.0 * r_obs >= width || 2.0 * r_obs >= height {
                    return Err(Error::InvalidGeometry(
                        "obstacle disc must fit strictly inside the window".into(),
                    ));
                }
                let (x_lo, x_hi) = (-width / 2.0, width / 2.0);
                let (y_lo, y_hi) = (-height / 2.0, height / 2.0);
                for (a, b, inward) in [
                    (Point::new(x_lo, y_lo), Point::new(x_hi, y_lo), Point::new(0.0, 1.0)),
                    (Point::new(x_hi, y_lo), Point::new(x_hi, y_hi), Point::new(-1.0, 0.0)),
                    (Point::new(x_lo, y_hi), Point::new(x_hi, y_hi), Point::new(0.0, -1.0)),
                    (Point::new(x_lo, y_lo), Point::new(x_lo, y_hi), Point::new(1.0, 0.0)),
                ] {
                    components.push(BoundaryComponent {
                        piece: BoundaryPiece::Segment { a, b, inward },
                        tag: BoundaryTag::Artificial,
                    });
                }
                components.push(BoundaryComponent {
                    piece: BoundaryPiece::Circle {
                        center: Point::new(0.0, 0.0),
                        radius: r_obs,
                        domain_inside: false,
                    },
                    tag: BoundaryTag::Physical,
                });
            }
        }
        Ok(Domain { kind, obstacles: Vec::new(), components })
    }

    /// Adds an obstacle; it must sit strictly inside the outer region and
    /// stay clear of existing holes.
    pub fn with_obstacle(mut self, shape: ObstacleShape) -> Result<Self> {
        if shape.min_side() <= 0.0 {
            return Err(Error::InvalidGeometry("obstacle has non-positive size".into()));
        }
        // sampled containment check against the current domain
        let n = 256;
        let piece = obstacle_piece(&shape);
        let len = piece.length();
        for k in 0..n {
            let p = piece.point_at(len * k as f64 / n as f64);
            if !self.in_outer_region(p) {
                return Err(Error::InvalidGeometry(
                    "obstacle not strictly contained in the domain".into(),
                ));
            }
            for hole in self.holes() {
                if hole.contains(p) {
                    return Err(Error::InvalidGeometry("obstacles overlap".into()));
                }
            }
        }
        self.components.push(BoundaryComponent { piece, tag: BoundaryTag::Physical });
        self.obstacles.push(shape);
        Ok(self)
    }

    fn in_outer_region(&self, p: Point) -> bool {
        use DomainKind::*;
        match self.kind {
            Disc { radius } => p.norm() < radius,
            Rectangle { x_lo, x_hi, y_lo, y_hi } => {
                p.x1 > x_lo && p.x1 < x_hi && p.x2 > y_lo && p.x2 < y_hi
            }
            Annulus { r_out, .. } => p.norm() < r_out,
            HalfPlaneWindow { a0, width, height } => {
                p.x1 > a0 && p.x1 < a0 + width && p.x2.abs() < height / 2.0
            }
            DiscComplementWindow { width, height, .. } => {
                p.x1.abs() < width / 2.0 && p.x2.abs() < height / 2.0
            }
        }
    }

    fn implicit_holes(&self) -> Vec<ObstacleShape> {
        use DomainKind::*;
        match self.kind {
            Annulus { rho_in, .. } => {
                vec![ObstacleShape::Disc { center: Point::new(0.0, 0.0), radius: rho_in }]
            }
            DiscComplementWindow { r_obs, .. } => {
                vec![ObstacleShape::Disc { center: Point::new(0.0, 0.0), radius: r_obs }]
            }
            _ => Vec::new(),
        }
    }

    fn holes(&self) -> Vec<ObstacleShape> {
        let mut v = self.implicit_holes();
        v.extend(self.obstacles.iter().cloned());
        v
    }

    /// Strict interior test.
    pub fn contains(&self, p: Point) -> bool {
        self.in_outer_region(p) && !self.holes().iter().any(|h| h.contains(p))
    }

    /// Analytic area.
    pub fn area(&self) -> f64 {
        use DomainKind::*;
        let outer = match self.kind {
            Disc { radius } => std::f64::consts::PI * radius * radius,
            Rectangle { x_lo, x_hi, y_lo, y_hi } => (x_hi - x_lo) * (y_hi - y_lo),
            Annulus { rho_in, r_out } => std::f64::consts::PI * (r_out * r_out - rho_in * rho_in),
            HalfPlaneWindow { width, height, .. } => width * height,
            DiscComplementWindow { r_obs, width, height } => {
                width * height - std::f64::consts::PI * r_obs * r_obs
            }
        };
        outer - self.obstacles.iter().map(|o| o.area()).sum::<f64>()
    }

    /// Total boundary length.
    pub fn boundary_length(&self) -> f64 {
        self.components.iter().map(|c| c.piece.length()).sum()
    }

    pub fn components(&self) -> &[BoundaryComponent] {
        &self.components
    }

    /// Axis-aligned bounding box (lo, hi).
    pub fn bounding_box(&self) -> (Point, Point) {
        use DomainKind::*;
        match self.kind {
            Disc { radius } => (Point::new(-radius, -radius), Point::new(radius, radius)),
            Rectangle { x_lo, x_hi, y_lo, y_hi } => (Point::new(x_lo, y_lo), Point::new(x_hi, y_hi)),
            Annulus { r_out, .. } => (Point::new(-r_out, -r_out), Point::new(r_out, r_out)),
            HalfPlaneWindow { a0, width, height } => {
                (Point::new(a0, -height / 2.0), Point::new(a0 + width, height / 2.0))
            }
            DiscComplementWindow { width, height, .. } => {
                (Point::new(-width / 2.0, -height / 2.0), Point::new(width / 2.0, height / 2.0))
            }
        }
    }

    /// Diameter of the bounding box; the length scale used for optimizer and
    /// finite-difference steps.
    pub fn scale(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    /// Smallest geometric feature the mesh must resolve.
    pub fn min_feature_size(&self) -> f64 {
        use DomainKind::*;
        let mut f = match self.kind {
            Disc { radius } => 2.0 * radius,
            Rectangle { x_lo, x_hi, y_lo, y_hi } => (x_hi - x_lo).min(y_hi - y_lo),
            Annulus { rho_in, r_out } => (r_out - rho_in).min(2.0 * rho_in),
            HalfPlaneWindow { width, height, .. } => width.min(height),
            DiscComplementWindow { r_obs, width, height } => (2.0 * r_obs)
                .min(width / 2.0 - r_obs)
                .min(height / 2.0 - r_obs),
        };
        // explicit obstacles: own size and clearance to the rest
        let base = self.components.len() - self.obstacles.len();
        for (i, obs) in self.obstacles.iter().enumerate() {
            f = f.min(obs.min_side());
            let piece = obstacle_piece(obs);
            let len = piece.length();
            for k in 0..128 {
                let p = piece.point_at(len * k as f64 / 128.0);
                for (j, comp) in self.components.iter().enumerate() {
                    if j == base + i {
                        continue; // the obstacle's own component
                    }
                    let d = comp.piece.distance(p);
                    if d > 1e-12 {
                        f = f.min(d);
                    }
                }
            }
        }
        f
    }

    /// Distance from an interior point to the boundary.
    pub fn dist_to_boundary(&self, p: Point) -> f64 {
        self.components
            .iter()
            .map(|c| c.piece.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Component index owning the nearest boundary point to `p`.
    pub fn nearest_component(&self, p: Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, c) in self.components.iter().enumerate() {
            let d = c.piece.distance(p);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// Signed curvature at a boundary point `x̄` of a physical component.
    pub fn curvature_at(&self, x_bar: Point) -> Result<f64> {
        let tol = 1e-8 * self.scale().max(1.0);
        let k = self.nearest_component(x_bar);
        let comp = &self.components[k];
        if comp.piece.distance(x_bar) > tol {
            return Err(Error::NotOnBoundary(x_bar.x1, x_bar.x2));
        }
        if comp.tag != BoundaryTag::Physical {
            return Err(Error::NotOnBoundary(x_bar.x1, x_bar.x2));
        }
        comp.piece.curvature_at(x_bar)
    }

    /// Unit inward normal at a boundary point.
    pub fn inward_normal(&self, x_bar: Point) -> Result<Point> {
        let tol = 1e-8 * self.scale().max(1.0);
        let k = self.nearest_component(x_bar);
        let comp = &self.components[k];
        if comp.piece.distance(x_bar) > tol {
            return Err(Error::NotOnBoundary(x_bar.x1, x_bar.x2));
        }
        Ok(comp.piece.inward_normal(x_bar))
    }
}

fn obstacle_piece(shape: &ObstacleShape) -> BoundaryPiece {
    match *shape {
        ObstacleShape::Disc { center, radius } => {
            BoundaryPiece::Circle { center, radius, domain_inside: false }
        }
        ObstacleShape::Rect { x_lo, x_hi, y_lo, y_hi } => {
            BoundaryPiece::RectRing { x_lo, x_hi, y_lo, y_hi, domain_inside: false }
        }
    }
}

/// Reference to a grid node: interior unknown or boundary value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRef {
    Interior(usize),
    Boundary(usize),
}

/// A boundary node: lattice position of an exterior neighbor of some interior
/// node, together with its projection onto the analytic boundary.
#[derive(Clone, Debug)]
pub struct BoundaryNode {
    pub latt: (u32, u32),
    /// Raw lattice position (used by the 5-point stencil).
    pub lattice_pos: Point,
    /// Nearest point on the analytic boundary (used to evaluate boundary data).
    pub pos: Point,
    pub component: usize,
    pub tag: BoundaryTag,
}

/// Uniform node-centered grid over a domain.
#[derive(Clone, Debug)]
pub struct Grid {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: Point,
    /// nx*ny lattice codes: >= 0 interior index, -1 outside, <= -2 boundary
    /// node index b encoded as -(b as i64) - 2.
    code: Vec<i64>,
    interior_latt: Vec<(u32, u32)>,
    boundary: Vec<BoundaryNode>,
    comp_nodes: Vec<Vec<usize>>,
}

/// Fraction of h below which a node hugging the boundary is demoted to a
/// boundary carrier (see `discretize`).
pub const CLIP_BAND: f64 = 0.4;

/// Discretizes a domain with mesh width `h`.
pub fn discretize(domain: &Domain, h: f64) -> Result<Grid> {
    if !(h > 0.0) {
        return Err(Error::MeshTooCoarse(format!("mesh width {h} must be positive")));
    }
    let feat = domain.min_feature_size();
    if h >= feat {
        return Err(Error::MeshTooCoarse(format!(
            "h = {h} does not resolve the smallest feature {feat:.6}"
        )));
    }
    let (lo, hi) = domain.bounding_box();
    let cx = 0.5 * (lo.x1 + hi.x1);
    let cy = 0.5 * (lo.x2 + hi.x2);
    let half_w = 0.5 * (hi.x1 - lo.x1);
    let half_h = 0.5 * (hi.x2 - lo.x2);
    // symmetric lattice about the box center, covering the closed box
    let mx = (half_w / h - 1e-12).ceil().max(0.0) as usize;
    let my = (half_h / h - 1e-12).ceil().max(0.0) as usize;
    let nx = 2 * mx + 1;
    let ny = 2 * my + 1;
    let origin = Point::new(cx - mx as f64 * h, cy - my as f64 * h);

    let pos = |i: usize, j: usize| Point::new(origin.x1 + i as f64 * h, origin.x2 + j as f64 * h);

    // Clipping band: lattice nodes closer than CLIP_BAND·h to the boundary
    // are demoted to boundary carriers, so the staircase straddles the true
    // boundary instead of bulging outward. The band is chosen so the
    // first-order boundary displacement roughly centers on zero.
    let band = CLIP_BAND * h;
    let mut code = vec![-1i64; nx * ny];
    let mut interior_latt = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let p = pos(i, j);
            if domain.contains(p) && domain.dist_to_boundary(p) >= band {
                code[j * nx + i] = interior_latt.len() as i64;
                interior_latt.push((i as u32, j as u32));
            }
        }
    }
    if interior_latt.is_empty() {
        return Err(Error::MeshTooCoarse("no interior nodes".into()));
    }

    // boundary nodes: non-interior 4- and diagonal neighbors of interior
    // nodes (diagonals complete the corner cells of the energy quadrature)
    let mut boundary: Vec<BoundaryNode> = Vec::new();
    let n_latt = interior_latt.len();
    for k in 0..n_latt {
        let (i, j) = interior_latt[k];
        let (i, j) = (i as i64, j as i64);
        for (di, dj) in
            [(-1i64, 0i64), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)]
        {
            let (ni, nj) = (i + di, j + dj);
            let outside_latt = ni < 0 || nj < 0 || ni >= nx as i64 || nj >= ny as i64;
            let c = if outside_latt { -1 } else { code[(nj as usize) * nx + ni as usize] };
            if c >= 0 || c <= -2 {
                continue; // interior or already a boundary node
            }
            let lp = Point::new(origin.x1 + ni as f64 * h, origin.x2 + nj as f64 * h);
            let comp = domain.nearest_component(lp);
            let proj = domain.components()[comp].piece.project(lp);
            let b = boundary.len();
            boundary.push(BoundaryNode {
                latt: (ni.max(0) as u32, nj.max(0) as u32),
                lattice_pos: lp,
                pos: proj,
                component: comp,
                tag: domain.components()[comp].tag,
            });
            if !outside_latt {
                code[(nj as usize) * nx + ni as usize] = -(b as i64) - 2;
            }
        }
    }
    let mut comp_nodes = vec![Vec::new(); domain.components().len()];
    for (b, node) in boundary.iter().enumerate() {
        comp_nodes[node.component].push(b);
    }
    for (c, nodes) in comp_nodes.iter().enumerate() {
        if nodes.is_empty() {
            return Err(Error::MeshTooCoarse(format!(
                "boundary component {c} captured no nodes"
            )));
        }
    }

    Ok(Grid { h, nx, ny, origin, code, interior_latt, boundary, comp_nodes })
}

impl Grid {
    pub fn n_interior(&self) -> usize {
        self.interior_latt.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn boundary_nodes_of_component(&self, comp: usize) -> &[usize] {
        &self.comp_nodes[comp]
    }

    pub fn interior_pos(&self, k: usize) -> Point {
        let (i, j) = self.interior_latt[k];
        Point::new(self.origin.x1 + i as f64 * self.h, self.origin.x2 + j as f64 * self.h)
    }

    pub fn interior_latt(&self, k: usize) -> (u32, u32) {
        self.interior_latt[k]
    }

    /// Lattice code lookup; `None` when off-lattice or outside.
    pub fn node_at(&self, i: i64, j: i64) -> Option<NodeRef> {
        if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
            return None;
        }
        let c = self.code[(j as usize) * self.nx + (i as usize)];
        if c >= 0 {
            Some(NodeRef::Interior(c as usize))
        } else if c <= -2 {
            Some(NodeRef::Boundary((-c - 2) as usize))
        } else {
            None
        }
    }

    /// The four stencil neighbors of an interior node. By construction each
    /// is either interior or a boundary node.
    pub fn neighbors(&self, k: usize) -> [NodeRef; 4] {
        let (i, j) = self.interior_latt[k];
        let (i, j) = (i as i64, j as i64);
        let mut out = [NodeRef::Interior(usize::MAX); 4];
        for (t, (di, dj)) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].iter().enumerate() {
            out[t] = self
                .node_at(i + di, j + dj)
                .expect("interior node neighbor must be resolved");
        }
        out
    }

    /// Interior node nearest to `p`, if any within one cell.
    pub fn nearest_interior(&self, p: Point) -> Option<usize> {
        let fi = (p.x1 - self.origin.x1) / self.h;
        let fj = (p.x2 - self.origin.x2) / self.h;
        let mut best: Option<(f64, usize)> = None;
        for dj in -1..=2i64 {
            for di in -1..=2i64 {
                let (i, j) = (fi.floor() as i64 + di, fj.floor() as i64 + dj);
                if let Some(NodeRef::Interior(k)) = self.node_at(i, j) {
                    let d = self.interior_pos(k).dist(p);
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, k));
                    }
                }
            }
        }
        best.map(|(_, k)| k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disc_area() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        assert!((d.area() - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn annulus_containment_violation() {
        let e = make_domain(DomainKind::Annulus { rho_in: 2.0, r_out: 1.0 });
        assert!(matches!(e, Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn disc_complement_window_mask_and_tags() {
        let d = make_domain(DomainKind::DiscComplementWindow {
            r_obs: 1.0,
            width: 6.0,
            height: 6.0,
        })
        .unwrap();
        assert!(!d.contains(Point::new(0.5, 0.0)));
        assert!(!d.contains(Point::new(0.0, 0.9)));
        assert!(d.contains(Point::new(2.0, 0.0)));
        let artificial: Vec<_> = d
            .components()
            .iter()
            .filter(|c| c.tag == BoundaryTag::Artificial)
            .collect();
        assert_eq!(artificial.len(), 4);
        for c in artificial {
            assert!(matches!(c.piece, BoundaryPiece::Segment { .. }));
        }
        let physical: Vec<_> = d
            .components()
            .iter()
            .filter(|c| c.tag == BoundaryTag::Physical)
            .collect();
        assert_eq!(physical.len(), 1);
    }

    #[test]
    fn negative_lengths_rejected() {
        assert!(make_domain(DomainKind::Disc { radius: -1.0 }).is_err());
        assert!(make_domain(DomainKind::Rectangle {
            x_lo: 0.0,
            x_hi: 0.0,
            y_lo: 0.0,
            y_hi: 1.0
        })
        .is_err());
    }

    #[test]
    fn rectangle_interior_count_hand() {
        let d = make_domain(DomainKind::Rectangle { x_lo: 0.0, x_hi: 1.0, y_lo: 0.0, y_hi: 1.0 })
            .unwrap();
        let g = discretize(&d, 0.25).unwrap();
        assert_eq!(g.n_interior(), 9);
    }

    #[test]
    fn disc_mesh_too_coarse() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        assert!(matches!(discretize(&d, 3.0), Err(Error::MeshTooCoarse(_))));
    }

    #[test]
    fn disc_interior_count_matches_area() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let g = discretize(&d, 0.05).unwrap();
        let target = std::f64::consts::PI / (0.05 * 0.05);
        let n = g.n_interior() as f64;
        assert!((n - target).abs() / target < 0.05, "count {n} vs {target}");
        // exact enumeration oracle on the same lattice with the same
        // clipping-band rule
        let mut count = 0usize;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let p = Point::new(g.origin.x1 + i as f64 * g.h, g.origin.x2 + j as f64 * g.h);
                if p.norm() < 1.0 && 1.0 - p.norm() >= CLIP_BAND * g.h {
                    count += 1;
                }
            }
        }
        assert_eq!(g.n_interior(), count);
    }

    #[test]
    fn area_convergence_rate() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        // |N h^2 - pi| <= C h with C fit once; C = 4.0 covers the frozen runs
        for h in [0.1, 0.05, 0.025] {
            let g = discretize(&d, h).unwrap();
            let err = (g.n_interior() as f64 * h * h - std::f64::consts::PI).abs();
            assert!(err <= 4.0 * h, "h={h}: err={err}");
        }
    }

    #[test]
    fn mask_reflection_symmetry() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let g = discretize(&d, 0.07).unwrap();
        // x2 -> -x2 maps lattice row j to ny-1-j; interior mask must be invariant
        for k in 0..g.n_interior() {
            let (i, j) = g.interior_latt(k);
            let mirrored = g.node_at(i as i64, (g.ny - 1 - j as usize) as i64);
            assert!(matches!(mirrored, Some(NodeRef::Interior(_))));
        }
    }

    #[test]
    fn every_boundary_node_has_one_tag_and_component() {
        let d = make_domain(DomainKind::Annulus { rho_in: 0.5, r_out: 1.0 }).unwrap();
        let g = discretize(&d, 0.04).unwrap();
        let mut per_comp = vec![0usize; d.components().len()];
        for n in g.boundary_nodes() {
            per_comp[n.component] += 1;
        }
        assert!(per_comp.iter().all(|&c| c > 0));
        assert_eq!(per_comp.iter().sum::<usize>(), g.n_boundary());
    }

    #[test]
    fn curvature_conventions() {
        let d1 = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        assert!((d1.curvature_at(Point::new(1.0, 0.0)).unwrap() - 1.0).abs() < 1e-12);
        let d2 = make_domain(DomainKind::Disc { radius: 2.0 }).unwrap();
        assert!((d2.curvature_at(Point::new(0.0, 2.0)).unwrap() - 0.5).abs() < 1e-12);
        let hp = make_domain(DomainKind::HalfPlaneWindow { a0: 0.0, width: 4.0, height: 4.0 })
            .unwrap();
        assert_eq!(hp.curvature_at(Point::new(0.0, 0.5)).unwrap(), 0.0);
        // interior point is not on the boundary
        assert!(d1.curvature_at(Point::new(0.2, 0.0)).is_err());
    }

    #[test]
    fn obstacle_containment() {
        let d = make_domain(DomainKind::Disc { radius: 1.0 }).unwrap();
        let bad = d.clone().with_obstacle(ObstacleShape::Disc {
            center: Point::new(0.9, 0.0),
            radius: 0.3,
        });
        assert!(bad.is_err());
        let ok = d.with_obstacle(ObstacleShape::Disc {
            center: Point::new(0.0, 0.0),
            radius: 0.3,
        });
        assert!(ok.is_ok());
    }
}
