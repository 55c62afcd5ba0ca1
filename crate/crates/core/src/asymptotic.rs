//! The twisted-saddle trial family
//!
//! ```text
//! x = r (1 + t²) cos φ,   y = r (1 − t²) sin φ,   z = t (r²/R) sin 2φ
//! ```
//!
//! with its closed-form metric, boundary curvature and small-t series, and the
//! quadratures that check them. `t = 0` is the flat disk of radius `R`;
//! `t = ±1` is a flat figure-eight bounded by a lemniscate of Gerono.
//!
//! Closed forms are kept separate from the quadratures on the exact embedding
//! so that each can be tested against the other.

use std::f64::consts::PI;
use std::io::Write;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{round_disk, Configuration, TriMesh, Vec3};

/// One member of the trial family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleFamily {
    /// Radial scale `R`.
    pub radius: f64,
    pub t: f64,
}

impl SaddleFamily {
    pub fn new(radius: f64, t: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if !(t.abs() <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "family parameter must lie in [-1, 1], got {t}"
            )));
        }
        Ok(Self { radius, t })
    }

    /// `(∂x/∂r, ∂x/∂φ)`.
    pub fn tangents(&self, r: f64, phi: f64) -> (Vec3, Vec3) {
        let (t, rr) = (self.t, self.radius);
        let (s, c) = phi.sin_cos();
        let (s2, c2) = (2.0 * phi).sin_cos();
        (
            Vec3::new((1.0 + t * t) * c, (1.0 - t * t) * s, 2.0 * t * r / rr * s2),
            Vec3::new(-r * (1.0 + t * t) * s, r * (1.0 - t * t) * c, 2.0 * t * r * r / rr * c2),
        )
    }

    /// `(x_rr, x_rφ, x_φφ)`.
    fn second_derivatives(&self, r: f64, phi: f64) -> (Vec3, Vec3, Vec3) {
        let (t, rr) = (self.t, self.radius);
        let (s, c) = phi.sin_cos();
        let (s2, c2) = (2.0 * phi).sin_cos();
        (
            Vec3::new(0.0, 0.0, 2.0 * t / rr * s2),
            Vec3::new(-(1.0 + t * t) * s, (1.0 - t * t) * c, 4.0 * t * r / rr * c2),
            Vec3::new(
                -r * (1.0 + t * t) * c,
                -r * (1.0 - t * t) * s,
                -4.0 * t * r * r / rr * s2,
            ),
        )
    }

    /// Unit normal `x_r × x_φ / |x_r × x_φ|` (the +z side for t = 0).
    pub fn normal(&self, r: f64, phi: f64) -> Vec3 {
        let (xr, xp) = self.tangents(r, phi);
        xr.cross(&xp).normalize()
    }

    /// Gaussian curvature from the exact first and second fundamental forms.
    pub fn gaussian_curvature_at(&self, r: f64, phi: f64) -> f64 {
        let (xr, xp) = self.tangents(r, phi);
        let (xrr, xrp, xpp) = self.second_derivatives(r, phi);
        let n = xr.cross(&xp).normalize();
        let (l, m, nn) = (xrr.dot(&n), xrp.dot(&n), xpp.dot(&n));
        let det = xr.norm_squared() * xp.norm_squared() - xr.dot(&xp).powi(2);
        (l * nn - m * m) / det
    }

    /// Exact boundary quantities at polar angle `φ` on `r = R`.
    pub fn boundary_at(&self, phi: f64) -> BoundaryPoint {
        let rr = self.radius;
        let (_, d1) = self.tangents(rr, phi);
        let (_, _, d2) = self.second_derivatives(rr, phi);
        let speed = d1.norm();
        let tangent = d1 / speed;
        let n = self.normal(rr, phi);
        let conormal = n.cross(&tangent);
        BoundaryPoint {
            speed,
            curvature: d1.cross(&d2).norm() / speed.powi(3),
            normal_curvature: d2.dot(&n) / (speed * speed),
            geodesic_curvature: d2.dot(&conormal) / (speed * speed),
        }
    }
}

/// Boundary geometry of a family member at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    /// `ds/dφ`.
    pub speed: f64,
    pub curvature: f64,
    /// Against the surface normal [`SaddleFamily::normal`].
    pub normal_curvature: f64,
    /// Against the inward conormal `N × T`; `1/R` on the flat disk.
    pub geodesic_curvature: f64,
}

/// First fundamental form in polar parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub g_rr: f64,
    pub g_rphi: f64,
    pub g_phiphi: f64,
}

impl Metric {
    pub fn det(&self) -> f64 {
        self.g_rr * self.g_phiphi - self.g_rphi * self.g_rphi
    }
}

pub fn family_point(fam: &SaddleFamily, r: f64, phi: f64) -> Vec3 {
    let t = fam.t;
    Vec3::new(
        r * (1.0 + t * t) * phi.cos(),
        r * (1.0 - t * t) * phi.sin(),
        t * r * r / fam.radius * (2.0 * phi).sin(),
    )
}

/// Closed-form metric of the family.
pub fn family_metric(fam: &SaddleFamily, r: f64, phi: f64) -> Metric {
    let t2 = fam.t * fam.t;
    let q = (r / fam.radius).powi(2);
    let (c2, c4) = ((2.0 * phi).cos(), (4.0 * phi).cos());
    Metric {
        g_rr: t2 * t2 + 2.0 * t2 * (q + c2 - q * c4) + 1.0,
        g_rphi: 2.0 * r * t2 * (q * (4.0 * phi).sin() - (2.0 * phi).sin()),
        g_phiphi: r * r * (t2 * t2 + 2.0 * t2 * (q - c2 + q * c4) + 1.0),
    }
}

/// Leading-order Gaussian curvature `−(2t/R)²`.
pub fn family_gaussian_k(fam: &SaddleFamily) -> f64 {
    -(2.0 * fam.t / fam.radius).powi(2)
}

/// Closed-form boundary speed `ds/dφ`.
pub fn boundary_speed(fam: &SaddleFamily, phi: f64) -> f64 {
    let t2 = fam.t * fam.t;
    fam.radius * ((1.0 + t2).powi(2) - 2.0 * t2 * ((2.0 * phi).cos() - (4.0 * phi).cos())).sqrt()
}

/// Closed-form squared boundary curvature.
pub fn boundary_kappa_squared(fam: &SaddleFamily, phi: f64) -> f64 {
    let t2 = fam.t * fam.t;
    let (c2, c4, c6) = ((2.0 * phi).cos(), (4.0 * phi).cos(), (6.0 * phi).cos());
    let num = 1.0 + t2 * (10.0 - 6.0 * c4) - t2 * t2 * (2.0 - 6.0 * c2 - 2.0 * c6)
        + t2.powi(3) * (10.0 - 6.0 * c4)
        + t2.powi(4);
    let base = (1.0 + t2).powi(2) - 2.0 * t2 * (c2 - c4);
    num / (fam.radius.powi(2) * base.powi(3))
}

/// Series `(κ_n, κ_g)` on the boundary, valid for small `t`.
pub fn family_boundary_curvatures(fam: &SaddleFamily, phi: f64) -> (f64, f64) {
    let (t, r) = (fam.t, fam.radius);
    let s = |k: f64| (k * phi).sin();
    let c = |k: f64| (k * phi).cos();
    let kn = -2.0 * t / r * s(2.0) + t.powi(3) / r * (3.0 * s(2.0) - s(4.0) + s(6.0));
    let kg = 1.0 / r + t * t * (1.0 + 3.0 * c(2.0) - 5.0 * c(4.0)) / (2.0 * r);
    (kn, kg)
}

/// Boundary length series `πR(2 + 2t² − t⁴)`.
pub fn series_length(fam: &SaddleFamily) -> f64 {
    let t2 = fam.t * fam.t;
    PI * fam.radius * (2.0 + 2.0 * t2 - t2 * t2)
}

/// Energy series `σ·area + α∮κ²ds` through order t⁴.
pub fn series_energy(fam: &SaddleFamily, sigma: f64, alpha: f64) -> f64 {
    let r = fam.radius;
    let t2 = fam.t * fam.t;
    let g = sigma * r.powi(3) / alpha;
    PI * alpha / r * (2.0 + g + t2 * (10.0 + g) - t2 * t2 * (9.0 + 5.0 / 3.0 * g))
}

/// Leading-order `∮|κ_n| ds = 8t`.
pub fn series_integrated_abs_normal_curvature(t: f64) -> f64 {
    8.0 * t.abs()
}

/// Leading-order `∮κ_g ds = 2π(1 + 2t²)`.
pub fn series_integrated_geodesic_curvature(t: f64) -> f64 {
    2.0 * PI * (1.0 + 2.0 * t * t)
}

/// Leading-order `∫K dA = −4πt²`.
pub fn series_integrated_gaussian_curvature(t: f64) -> f64 {
    -4.0 * PI * t * t
}

/// Resolution and acceptance rule for the adaptive quadratures: Gauss-Legendre
/// in `r` (and on the quarter arcs between zeros of `κ_n`), periodic trapezoid
/// in `φ`. Both resolutions double until successive estimates agree to
/// `tolerance` (relative above magnitude 1, absolute below).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub radial_nodes: usize,
    pub angular_panels: usize,
    pub tolerance: f64,
    pub max_refinements: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            radial_nodes: 16,
            angular_panels: 64,
            tolerance: 1e-13,
            max_refinements: 6,
        }
    }
}

/// A quadrature on the exact embedding next to the corresponding series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesCheck {
    pub quadrature: f64,
    pub series: f64,
}

impl SeriesCheck {
    pub fn residual(&self) -> f64 {
        self.quadrature - self.series
    }
}

impl Quadrature {
    fn validate(&self) -> Result<()> {
        if self.angular_panels < 64 || self.radial_nodes == 0 {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least 64 angular panels and one radial node, got {} and {}",
                self.angular_panels, self.radial_nodes
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("quadrature tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Runs `eval(radial_nodes, angular_panels)` at doubling resolutions.
    fn refine(&self, mut eval: impl FnMut(usize, usize) -> f64) -> Result<f64> {
        self.validate()?;
        let (mut n, mut m) = (self.radial_nodes, self.angular_panels);
        let mut prev = eval(n, m);
        let mut estimate = f64::INFINITY;
        for _ in 0..self.max_refinements {
            n *= 2;
            m *= 2;
            let next = eval(n, m);
            estimate = (next - prev).abs();
            if !next.is_finite() {
                return Err(Error::NonFinite("quadrature"));
            }
            if estimate <= self.tolerance * next.abs().max(1.0) {
                return Ok(next);
            }
            prev = next;
        }
        Err(Error::Quadrature {
            estimate,
            tolerance: self.tolerance,
        })
    }
}

fn trapezoid(panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = 2.0 * PI / panels as f64;
    (0..panels).map(|j| f(j as f64 * h)).sum::<f64>() * h
}

fn legendre(nodes: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(nodes).expect("node count is positive"))
}

fn surface_integral(fam: &SaddleFamily, q: &Quadrature, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    q.refine(|n, m| {
        let rule = legendre(n);
        rule.integrate(0.0, fam.radius, |r| trapezoid(m, |phi| f(r, phi)))
    })
}

fn boundary_integral(q: &Quadrature, f: impl Fn(f64) -> f64) -> Result<f64> {
    q.refine(|_, m| trapezoid(m, &f))
}

/// Boundary length by quadrature of the exact speed, against the series.
pub fn family_length(fam: &SaddleFamily, q: &Quadrature) -> Result<SeriesCheck> {
    Ok(SeriesCheck {
        quadrature: boundary_integral(q, |phi| fam.boundary_at(phi).speed)?,
        series: series_length(fam),
    })
}

pub fn family_area(fam: &SaddleFamily, q: &Quadrature) -> Result<f64> {
    surface_integral(fam, q, |r, phi| family_metric(fam, r, phi).det().max(0.0).sqrt())
}

/// `∮κ² ds` with the closed-form speed and squared curvature.
pub fn family_bending(fam: &SaddleFamily, q: &Quadrature) -> Result<f64> {
    boundary_integral(q, |phi| boundary_kappa_squared(fam, phi) * boundary_speed(fam, phi))
}

/// `σ·area + α∮κ²ds` by quadrature, against the series.
pub fn family_energy(fam: &SaddleFamily, sigma: f64, alpha: f64, q: &Quadrature) -> Result<SeriesCheck> {
    Ok(SeriesCheck {
        quadrature: sigma * family_area(fam, q)? + alpha * family_bending(fam, q)?,
        series: series_energy(fam, sigma, alpha),
    })
}

/// `∫K dA` from the exact second fundamental form.
pub fn integrated_gaussian_curvature(fam: &SaddleFamily, q: &Quadrature) -> Result<f64> {
    surface_integral(fam, q, |r, phi| {
        let area = family_metric(fam, r, phi).det().max(0.0).sqrt();
        fam.gaussian_curvature_at(r, phi) * area
    })
}

/// `∮κ_g ds` from the exact boundary curve.
pub fn integrated_geodesic_curvature(fam: &SaddleFamily, q: &Quadrature) -> Result<f64> {
    boundary_integral(q, |phi| {
        let b = fam.boundary_at(phi);
        b.geodesic_curvature * b.speed
    })
}

/// `∫K dA` by Gauss-Bonnet, `2π − ∮κ_g ds`.
pub fn gauss_bonnet_gaussian_curvature(fam: &SaddleFamily, q: &Quadrature) -> Result<f64> {
    Ok(2.0 * PI - integrated_geodesic_curvature(fam, q)?)
}

/// `∮|κ_n| ds`. The family's symmetry puts the zeros of `κ_n` at multiples of
/// π/2, so each quarter arc is integrated separately.
pub fn integrated_abs_normal_curvature(fam: &SaddleFamily, q: &Quadrature) -> Result<f64> {
    q.refine(|n, _| {
        let rule = legendre(n);
        (0..4)
            .map(|k| {
                let a = k as f64 * PI / 2.0;
                rule.integrate(a, a + PI / 2.0, |phi| {
                    let b = fam.boundary_at(phi);
                    b.normal_curvature.abs() * b.speed
                })
            })
            .sum()
    })
}

pub fn gamma_star() -> f64 {
    96.0 * PI.powi(3)
}

/// Stable amplitude of the pitchfork `t(γ* − γ) + (2/3)γt³ = 0`: zero up to
/// `γ*`, then `√(3(γ − γ*)/(2γ))`.
pub fn pitchfork_amplitude(gamma: f64) -> f64 {
    let gs = gamma_star();
    if gamma <= gs {
        0.0
    } else {
        (3.0 * (gamma - gs) / (2.0 * gamma)).sqrt()
    }
}

/// `R` for which the length series equals `length`. The series is linear in
/// `R`, so the inversion is exact.
pub fn radius_for_length(length: f64, t: f64) -> f64 {
    let t2 = t * t;
    length / (PI * (2.0 + 2.0 * t2 - t2 * t2))
}

/// Power series in `u` truncated after `u^(N-1)`.
type Truncated = [f64; 3];

fn mul(a: &Truncated, b: &Truncated) -> Truncated {
    let mut out = [0.0; 3];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate().take(3 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn reciprocal(a: &Truncated) -> Truncated {
    let mut out = [0.0; 3];
    out[0] = 1.0 / a[0];
    for k in 1..3 {
        let s: f64 = (1..=k).map(|j| a[j] * out[k - j]).sum();
        out[k] = -s / a[0];
    }
    out
}

/// Coefficients in `u = t²` (through `u²`) of the series energy with `R`
/// eliminated by the length constraint, in units of `α/L`.
///
/// With `1/R = π ℓ(u)/L`, `ℓ = 2 + 2u − u²`, the energy becomes
/// `π²[ℓ·b(u) + (γ/π³)·a(u)/ℓ²]` where `b` and `a` are the bending and area
/// brackets of [`series_energy`].
pub fn constrained_energy_coefficients(gamma: f64) -> [f64; 3] {
    let ell = [2.0, 2.0, -1.0];
    let bending = [2.0, 10.0, -9.0];
    let area = [1.0, 1.0, -5.0 / 3.0];
    let first = mul(&ell, &bending);
    let second = mul(&area, &reciprocal(&mul(&ell, &ell)));
    let g = gamma / PI.powi(3);
    [0, 1, 2].map(|k| PI * PI * (first[k] + g * second[k]))
}

/// Truncated length-constrained series energy (units of `α/L`).
pub fn constrained_series_energy(t: f64, gamma: f64) -> f64 {
    let c = constrained_energy_coefficients(gamma);
    let u = t * t;
    c[0] + c[1] * u + c[2] * u * u
}

/// `d/dt` of [`constrained_series_energy`].
pub fn constrained_series_slope(t: f64, gamma: f64) -> f64 {
    let c = constrained_energy_coefficients(gamma);
    2.0 * t * (c[1] + 2.0 * c[2] * t * t)
}

/// Family member at resolution `rings` of a hex disk, mapped radially onto
/// the parameter disk.
pub fn family_mesh(fam: &SaddleFamily, rings: usize) -> Result<(TriMesh, Configuration)> {
    let (mesh, disk) = round_disk(rings, fam.radius)?;
    let positions = disk
        .positions
        .iter()
        .map(|p| family_point(fam, p.xy().norm(), p.y.atan2(p.x)))
        .collect();
    Ok((mesh, Configuration::new(positions)))
}

/// One row of the asymptotic table, in the dimensionless units α = L = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub gamma: f64,
    pub t: f64,
    /// `R` that makes the exact boundary length 1.
    pub radius: f64,
    pub series_energy: f64,
    pub quadrature_energy: f64,
    pub mean_abs_kappa_n: f64,
    pub integrated_abs_kappa_n: f64,
    pub integrated_gaussian_curvature: f64,
}

/// Pitchfork amplitude and family observables at each `γ`. Requires
/// `γ < 3γ*` so that `t < 1`.
pub fn asymptotic_row(gamma: f64, q: &Quadrature) -> Result<AsymptoticRow> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let t = pitchfork_amplitude(gamma);
    let unit = SaddleFamily::new(1.0, t)?;
    let radius = 1.0 / family_length(&unit, q)?.quadrature;
    let fam = SaddleFamily::new(radius, t)?;
    let integrated_abs_kappa_n = integrated_abs_normal_curvature(&fam, q)?;
    Ok(AsymptoticRow {
        gamma,
        t,
        radius,
        series_energy: constrained_series_energy(t, gamma),
        quadrature_energy: family_energy(&fam, gamma, 1.0, q)?.quadrature,
        mean_abs_kappa_n: integrated_abs_kappa_n / family_length(&fam, q)?.quadrature,
        integrated_abs_kappa_n,
        integrated_gaussian_curvature: integrated_gaussian_curvature(&fam, q)?,
    })
}

pub fn write_table(rows: &[AsymptoticRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    out.flush()?;
    Ok(())
}
