//! Limiting radial profile: the solution V of -ΔV = V^p on the unit ball with
//! V(1) = 0, its mass constant γ = ∫_B V^p, the core radius ρ_κ, the entire
//! profile U_κ (core plus logarithmic tail), and the energy constant 𝒞.
//!
//! The ODE v'' + v'/r + v_+^p = 0, v'(0) = 0 is integrated by fixed-step RK4
//! with a series start near r = 0, shooting on the central value v(0).

use crate::error::{Error, Result};
use std::sync::Arc;

/// Radial solution V of -ΔV = V^p on B(0,1), sampled uniformly on [0,1].
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub p: f64,
    /// Sample step in r.
    pub dr: f64,
    /// V at r = i·dr.
    pub v: Vec<f64>,
    /// V' at r = i·dr.
    pub dv: Vec<f64>,
    /// Central value V(0).
    pub v0: f64,
    /// Boundary slope V'(1) (negative).
    pub slope_at_1: f64,
    /// γ = ∫_{B(0,1)} V^p = 2π ∫ v^p r dr.
    pub gamma: f64,
    /// ∫_{B(0,1)} |∇V|².
    pub grad_sq_ball: f64,
    /// ∫_{B(0,1)} V^{p+1}.
    pub mass_p1_ball: f64,
}

/// Default integration step.
pub const DEFAULT_DR: f64 = 1e-4;

/// Solves the unit-ball profile for exponent `p` with the default step.
pub fn solve_unit_profile(p: f64) -> Result<RadialProfile> {
    solve_unit_profile_with_step(p, DEFAULT_DR)
}

/// Same with an explicit step (used by two-resolution oracles).
pub fn solve_unit_profile_with_step(p: f64, dr: f64) -> Result<RadialProfile> {
    if !(p > 1.0) {
        return Err(Error::UnsupportedExponent(p));
    }
    if !(dr > 0.0 && dr < 0.5) {
        return Err(Error::NoConvergence(format!("bad step {dr}")));
    }
    let n = (1.0 / dr).round() as usize;
    let dr = 1.0 / n as f64;

    let value_at_1 = |s: f64| integrate(p, s, n, dr).0;

    // geometric bracket growth on the shooting value
    let mut lo = 0.1;
    let mut hi = 10.0;
    let mut grow = 0;
    while value_at_1(lo) < 0.0 {
        lo *= 0.5;
        grow += 1;
        if grow > 60 {
            return Err(Error::NoConvergence("shooting bracket (low) failed".into()));
        }
    }
    while value_at_1(hi) > 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 120 {
            return Err(Error::NoConvergence("shooting bracket (high) failed".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value_at_1(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    let (_v1, mut v, dv) = integrate_full(p, s, n, dr);
    // the shooting residual at r=1 is below bisection tolerance; pin the
    // boundary sample so downstream interpolation sees an exact zero
    v[n] = 0.0;

    // radial quadratures (Simpson; n is even for the steps used here)
    let gamma = 2.0 * std::f64::consts::PI * simpson(dr, |i| pos(v[i]).powf(p) * (i as f64 * dr));
    let grad_sq =
        2.0 * std::f64::consts::PI * simpson(dr, |i| dv[i] * dv[i] * (i as f64 * dr), );
    let mass_p1 =
        2.0 * std::f64::consts::PI * simpson(dr, |i| pos(v[i]).powf(p + 1.0) * (i as f64 * dr));

    Ok(RadialProfile {
        p,
        dr,
        v0: s,
        slope_at_1: dv[n],
        gamma,
        grad_sq_ball: grad_sq,
        mass_p1_ball: mass_p1,
        v,
        dv,
    })
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// RK4 integration of v'' + v'/r + v_+^p = 0, returning v(1).
fn integrate(p: f64, s: f64, n: usize, dr: f64) -> (f64, ()) {
    let (v1, _, _) = integrate_full(p, s, n, dr);
    (v1, ())
}

fn integrate_full(p: f64, s: f64, n: usize, dr: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n + 1];
    let mut dv = vec![0.0; n + 1];
    v[0] = s;
    dv[0] = 0.0;
    // series start: v(r) = s - s^p r²/4 + p s^{2p-1} r⁴/64 + O(r⁶)
    let sp = s.powf(p);
    let s2p1 = p * s.powf(2.0 * p - 1.0);
    let r1 = dr;
    let mut vv = s - sp * r1 * r1 / 4.0 + s2p1 * r1.powi(4) / 64.0;
    let mut ww = -sp * r1 / 2.0 + s2p1 * r1.powi(3) / 16.0;
    v[1] = vv;
    dv[1] = ww;
    let f = |r: f64, v: f64, w: f64| -w / r - pos(v).powf(p);
    for i in 1..n {
        let r = i as f64 * dr;
        let (k1v, k1w) = (ww, f(r, vv, ww));
        let (k2v, k2w) = (ww + 0.5 * dr * k1w, f(r + 0.5 * dr, vv + 0.5 * dr * k1v, ww + 0.5 * dr * k1w));
        let (k3v, k3w) = (ww + 0.5 * dr * k2w, f(r + 0.5 * dr, vv + 0.5 * dr * k2v, ww + 0.5 * dr * k2w));
        let (k4v, k4w) = (ww + dr * k3w, f(r + dr, vv + dr * k3v, ww + dr * k3w));
        vv += dr / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        ww += dr / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        v[i + 1] = vv;
        dv[i + 1] = ww;
    }
    (vv, v, dv)
}

fn simpson(dr: f64, f: impl Fn(usize) -> f64) -> f64 {
    let n = (1.0 / dr).round() as usize;
    debug_assert!(n % 2 == 0);
    let mut s = f(0) + f(n);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i);
    }
    s * dr / 3.0
}

impl RadialProfile {
    /// V(r) for r ∈ [0, 1] by linear interpolation of the stored samples.
    pub fn v_at(&self, r: f64) -> f64 {
        sample_linear(&self.v, self.dr, r)
    }

    /// V'(r) for r ∈ [0, 1].
    pub fn dv_at(&self, r: f64) -> f64 {
        sample_linear(&self.dv, self.dr, r)
    }
}

fn sample_linear(vals: &[f64], dr: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return vals[0];
    }
    let n = vals.len() - 1;
    let x = r / dr;
    let i = (x.floor() as usize).min(n - 1);
    let t = x - i as f64;
    vals[i] * (1.0 - t) + vals[i + 1] * t
}

/// The entire-plane profile U_κ: scaled core V_ρ on B(0, ρ_κ) matched to the
/// logarithmic tail (κ/2π) log(ρ_κ/|y|).
#[derive(Clone, Debug)]
pub struct ProfileForKappa {
    pub profile: Arc<RadialProfile>,
    pub kappa: f64,
    /// Core radius ρ_κ = (γ/κ)^{(p-1)/2}.
    pub rho: f64,
    scale: f64, // ρ^{-2/(p-1)}
}

/// Builds the κ-profile from a unit profile. Requires κ > 0.
pub fn profile_for_kappa(profile: &Arc<RadialProfile>, kappa: f64) -> Result<ProfileForKappa> {
    if !(kappa > 0.0) {
        return Err(Error::NonPositiveKappa(kappa));
    }
    let p = profile.p;
    let rho = (profile.gamma / kappa).powf((p - 1.0) / 2.0);
    let scale = rho.powf(-2.0 / (p - 1.0));
    Ok(ProfileForKappa { profile: profile.clone(), kappa, rho, scale })
}

impl ProfileForKappa {
    /// U_κ at radius r = |y|.
    pub fn u(&self, r: f64) -> f64 {
        if r < self.rho {
            self.scale * self.profile.v_at(r / self.rho)
        } else {
            self.kappa / (2.0 * std::f64::consts::PI) * (self.rho / r).ln()
        }
    }

    /// dU_κ/dr at radius r.
    pub fn du(&self, r: f64) -> f64 {
        if r < self.rho {
            self.scale * self.profile.dv_at(r / self.rho) / self.rho
        } else {
            -self.kappa / (2.0 * std::f64::consts::PI * r)
        }
    }

    /// Central value U_κ(0).
    pub fn center_value(&self) -> f64 {
        self.scale * self.profile.v0
    }
}

/// The energy constant
/// 𝒞 = κ²/(4π) log ρ_κ + ∫_{B(0,ρ_κ)} (|∇U|²/2 − U^{p+1}/(p+1)),
/// evaluated by the exact scaling of the unit-ball quadratures.
pub fn limit_constant(pk: &ProfileForKappa) -> f64 {
    let p = pk.profile.p;
    let ball = pk.rho.powf(-4.0 / (p - 1.0))
        * (0.5 * pk.profile.grad_sq_ball - pk.profile.mass_p1_ball / (p + 1.0));
    pk.kappa * pk.kappa / (4.0 * std::f64::consts::PI) * pk.rho.ln() + ball
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_p_at_most_one() {
        assert!(matches!(solve_unit_profile(1.0), Err(Error::UnsupportedExponent(_))));
        assert!(matches!(solve_unit_profile(0.5), Err(Error::UnsupportedExponent(_))));
    }

    #[test]
    fn divergence_identity_p3() {
        // total flux equals total mass: 2π|V'(1)| = γ
        let prof = solve_unit_profile(3.0).unwrap();
        let flux = 2.0 * std::f64::consts::PI * prof.slope_at_1.abs();
        assert!(
            (flux - prof.gamma).abs() < 1e-8 * prof.gamma,
            "flux {flux} vs gamma {}",
            prof.gamma
        );
    }

    #[test]
    fn profile_shape() {
        let prof = solve_unit_profile(3.0).unwrap();
        assert!(prof.v0 > 0.0);
        assert_eq!(*prof.v.last().unwrap(), 0.0);
        // strictly decreasing
        for w in prof.v.windows(2) {
            assert!(w[1] < w[0] + 1e-14, "not decreasing: {} -> {}", w[0], w[1]);
        }
        // Pohozaev-type identity ∫|∇V|² = ∫V^{p+1}
        assert!(
            (prof.grad_sq_ball - prof.mass_p1_ball).abs() < 1e-6 * prof.mass_p1_ball,
            "{} vs {}",
            prof.grad_sq_ball,
            prof.mass_p1_ball
        );
    }

    #[test]
    fn rho_scaling_identities() {
        let prof = Arc::new(solve_unit_profile(3.0).unwrap());
        let g = prof.gamma;
        // p = 3: exponent (p-1)/2 = 1, so rho = gamma/kappa
        let pk1 = profile_for_kappa(&prof, g).unwrap();
        assert!((pk1.rho - 1.0).abs() < 1e-12);
        let pk4 = profile_for_kappa(&prof, 4.0 * g).unwrap();
        assert!((pk4.rho - 0.25).abs() < 1e-12);
        // tail vanishes at the matching radius
        assert!(pk1.u(pk1.rho).abs() < 1e-12);
        assert!(pk4.u(pk4.rho).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_kappa() {
        let prof = Arc::new(solve_unit_profile(2.5).unwrap());
        assert!(matches!(profile_for_kappa(&prof, 0.0), Err(Error::NonPositiveKappa(_))));
        assert!(matches!(profile_for_kappa(&prof, -2.0), Err(Error::NonPositiveKappa(_))));
    }

    #[test]
    fn c1_matching_and_mass() {
        let prof = Arc::new(solve_unit_profile(3.0).unwrap());
        for kappa in [1.0, std::f64::consts::PI, 2.0 * std::f64::consts::PI] {
            let pk = profile_for_kappa(&prof, kappa).unwrap();
            // C¹ matching: 2π ρ U'(ρ⁻) = -κ
            let inner_flux = 2.0 * std::f64::consts::PI * pk.rho * pk.du(pk.rho * (1.0 - 1e-9));
            assert!(
                (inner_flux + kappa).abs() < 1e-6 * kappa,
                "kappa {kappa}: inner flux {inner_flux}"
            );
            // mass identity ∫ (U_κ)_+^p = κ by quadrature over the core
            let n = 4000;
            let dr = pk.rho / n as f64;
            let mut mass = 0.0;
            for i in 0..n {
                let r = (i as f64 + 0.5) * dr;
                mass += pk.u(r).max(0.0).powf(prof.p) * r * dr;
            }
            mass *= 2.0 * std::f64::consts::PI;
            assert!((mass - kappa).abs() < 1e-6 * kappa, "kappa {kappa}: mass {mass}");
        }
    }

    #[test]
    fn u_kappa_monotone_decreasing() {
        let prof = Arc::new(solve_unit_profile(2.0).unwrap());
        let pk = profile_for_kappa(&prof, 3.0).unwrap();
        let mut prev = pk.u(0.0);
        for i in 1..500 {
            let r = i as f64 * (3.0 * pk.rho) / 500.0;
            let cur = pk.u(r);
            assert!(cur < prev + 1e-13, "not decreasing at r={r}");
            prev = cur;
        }
    }

    #[test]
    fn ball_energy_term_positive() {
        // (1/2 − 1/(p+1)) ∫ V^{p+1} > 0
        let prof = Arc::new(solve_unit_profile(3.0).unwrap());
        let pk = profile_for_kappa(&prof, prof.gamma).unwrap();
        let c = limit_constant(&pk);
        // rho = 1: log term vanishes, the remainder is the positive ball term
        let expected = (0.5 - 0.25) * prof.mass_p1_ball;
        assert!((c - expected).abs() < 1e-9 * expected.abs());
        assert!(c > 0.0);
    }
}
