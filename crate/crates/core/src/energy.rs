//! Discrete film-plus-filament energy.
//!
//! ```text
//! E = α Σ_{v ∈ ∂M} ⟨s_v⟩ κ_v²  +  k Σ_{e interior} |e|²  +  P(boundary lengths)
//! ```
//!
//! with `κ_v = |t_v − t_{v−1}| / ⟨s_v⟩`, `t` the unit tangents of consecutive
//! boundary edges and `⟨s_v⟩` the mean length of the two edges meeting at `v`.
//! The interior edges are zero-rest-length springs standing in for surface
//! tension. `P` holds the boundary length near its target; the scheme is a
//! [`LengthConstraint`] picked by name.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix3;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Configuration, TriMesh, Vec3};
use crate::registry::{Named, Registry};

/// Boundary edges shorter than this fraction of the target length are collapsed.
pub const DEGENERATE_EDGE_FRACTION: f64 = 1e-12;

/// Penalty on boundary edge lengths that stands in for inextensibility.
pub trait LengthConstraint: Named + Send + Sync {
    /// Returns the penalty energy and adds its derivative with respect to each
    /// boundary edge length into `d_lengths`.
    fn penalty(&self, lengths: &[f64], target: f64, stiffness: f64, d_lengths: &mut [f64]) -> f64;

    /// Diagonal of the penalty's Hessian in edge-length coordinates, for
    /// preconditioning. Rank-one stiffness (a single stiff mode) is left out.
    fn edge_stiffness(&self, _stiffness: f64) -> f64 {
        0.0
    }
}

/// `k_L (Σ s_j − L)²`: only the total length is held, vertices may slide along the loop.
pub struct GlobalLength;

/// `k_L Σ (s_j − L/n)²`: every boundary edge is held at its share of the target.
pub struct PerEdgeLength;

/// `k_L (Σ s_j − L)² + k_L Σ (s_j − S/n)²` with `S = Σ s_j`: the total is
/// held as in [`GlobalLength`] and the second term keeps the edges equal
/// without resisting a uniform stretch, which removes the sliding freedom at
/// the cost of no extra stiffness against the film's tension.
pub struct UniformLength;

impl Named for GlobalLength {
    fn name(&self) -> &'static str {
        "global"
    }
}

impl LengthConstraint for GlobalLength {
    fn penalty(&self, lengths: &[f64], target: f64, stiffness: f64, d: &mut [f64]) -> f64 {
        let excess = lengths.iter().sum::<f64>() - target;
        let slope = 2.0 * stiffness * excess;
        d.iter_mut().for_each(|g| *g += slope);
        stiffness * excess * excess
    }
}

impl Named for PerEdgeLength {
    fn name(&self) -> &'static str {
        "per-edge"
    }
}

impl LengthConstraint for PerEdgeLength {
    fn penalty(&self, lengths: &[f64], target: f64, stiffness: f64, d: &mut [f64]) -> f64 {
        let share = target / lengths.len() as f64;
        let mut e = 0.0;
        for (s, g) in lengths.iter().zip(d.iter_mut()) {
            let excess = s - share;
            e += stiffness * excess * excess;
            *g += 2.0 * stiffness * excess;
        }
        e
    }

    fn edge_stiffness(&self, stiffness: f64) -> f64 {
        2.0 * stiffness
    }
}

impl Named for UniformLength {
    fn name(&self) -> &'static str {
        "uniform"
    }
}

impl LengthConstraint for UniformLength {
    fn penalty(&self, lengths: &[f64], target: f64, stiffness: f64, d: &mut [f64]) -> f64 {
        let e = GlobalLength.penalty(lengths, target, stiffness, d);
        let n = lengths.len() as f64;
        let mean = lengths.iter().sum::<f64>() / n;
        let k = stiffness;
        let mut spread = 0.0;
        // deviations from the mean sum to zero, so the mean's own derivative drops out
        for (s, g) in lengths.iter().zip(d.iter_mut()) {
            spread += (s - mean).powi(2);
            *g += 2.0 * k * (s - mean);
        }
        e + k * spread
    }

    fn edge_stiffness(&self, stiffness: f64) -> f64 {
        2.0 * stiffness
    }
}

pub static LENGTH_CONSTRAINTS: Lazy<Registry<dyn LengthConstraint>> = Lazy::new(|| {
    let mut reg: Registry<dyn LengthConstraint> = Registry::new("length constraint");
    reg.register(Arc::new(GlobalLength));
    reg.register(Arc::new(PerEdgeLength));
    reg.register(Arc::new(UniformLength));
    reg
});

/// Constraint used unless the parameters name another.
pub const DEFAULT_LENGTH_CONSTRAINT: &str = "uniform";

fn default_constraint() -> String {
    DEFAULT_LENGTH_CONSTRAINT.to_string()
}

/// Material and constraint parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Bending modulus α of the boundary filament.
    pub alpha: f64,
    /// Interior spring stiffness k.
    pub spring_k: f64,
    /// Target boundary length L.
    pub target_length: f64,
    /// Stiffness of the boundary-length penalty.
    pub length_penalty_k: f64,
    #[serde(default = "default_constraint")]
    pub length_constraint: String,
}

impl EnergyParams {
    /// Units with α = 1 and L = 1, so `spring_k` equals kL³/α.
    pub fn dimensionless(k_l3_over_alpha: f64) -> Self {
        Self {
            alpha: 1.0,
            spring_k: k_l3_over_alpha,
            target_length: 1.0,
            length_penalty_k: default_length_penalty(1.0, k_l3_over_alpha, 1.0),
            length_constraint: default_constraint(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v} is out of range")));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", self.alpha);
        }
        if !(self.spring_k >= 0.0 && self.spring_k.is_finite()) {
            return bad("spring_k", self.spring_k);
        }
        if !(self.target_length > 0.0 && self.target_length.is_finite()) {
            return bad("target_length", self.target_length);
        }
        if !(self.length_penalty_k >= 0.0 && self.length_penalty_k.is_finite()) {
            return bad("length_penalty_k", self.length_penalty_k);
        }
        LENGTH_CONSTRAINTS.get(&self.length_constraint)?;
        Ok(())
    }

    /// kL³/α.
    pub fn k_l3_over_alpha(&self) -> f64 {
        self.spring_k * self.target_length.powi(3) / self.alpha
    }

    /// γ = σL³/α with σ from [`sigma_from_spring_k`].
    pub fn gamma(&self) -> f64 {
        gamma_numeric(self.spring_k, self.target_length, self.alpha).1
    }

    /// Natural scale of per-vertex forces, used for the relative gradient tolerance.
    pub fn force_scale(&self) -> f64 {
        self.spring_k * self.target_length + self.alpha / self.target_length.powi(2)
    }
}

/// Initial penalty stiffness before any escalation: large against both the
/// film tension and the elastica ring compression at length `target_length`.
pub fn default_length_penalty(alpha: f64, spring_k: f64, target_length: f64) -> f64 {
    1e3 * (spring_k + 4.0 * PI * PI * alpha / target_length.powi(3))
}

/// Surface tension equivalent of the spring stiffness, `σ = 4k/√3`.
pub fn sigma_from_spring_k(spring_k: f64) -> f64 {
    4.0 * spring_k / 3f64.sqrt()
}

/// Returns `(kL³/α, γ)` with `γ = σL³/α`.
pub fn gamma_numeric(spring_k: f64, target_length: f64, alpha: f64) -> (f64, f64) {
    let kl3 = spring_k * target_length.powi(3) / alpha;
    (kl3, sigma_from_spring_k(kl3))
}

/// Inverse of [`gamma_numeric`]: kL³/α for a given γ.
pub fn k_l3_from_gamma(gamma: f64) -> f64 {
    gamma * 3f64.sqrt() / 4.0
}

/// Energy terms. `total = bending + springs + length_penalty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub bending: f64,
    pub springs: f64,
    pub length_penalty: f64,
    pub total: f64,
    pub boundary_length: f64,
}

/// Evaluates the energy terms.
pub fn energy(mesh: &TriMesh, x: &Configuration, p: &EnergyParams) -> Result<EnergyBreakdown> {
    x.check(mesh)?;
    evaluate(mesh, &x.positions, p, None)
}

/// Exact gradient of [`energy`]`.total` with respect to every coordinate.
pub fn gradient(mesh: &TriMesh, x: &Configuration, p: &EnergyParams) -> Result<Vec<Vec3>> {
    x.check(mesh)?;
    let mut g = vec![Vec3::zeros(); x.len()];
    evaluate(mesh, &x.positions, p, Some(&mut g))?;
    Ok(g)
}

/// Evaluates the energy and, if `grad` is given, overwrites it with the gradient.
///
/// This is the allocation-light entry point used inside the minimizer.
pub fn evaluate(
    mesh: &TriMesh,
    x: &[Vec3],
    p: &EnergyParams,
    mut grad: Option<&mut [Vec3]>,
) -> Result<EnergyBreakdown> {
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = Vec3::zeros());
    }

    let mut springs = 0.0;
    for &[a, b] in &mesh.interior_edges {
        let d = x[a] - x[b];
        springs += d.norm_squared();
        if let Some(g) = grad.as_deref_mut() {
            let f = d * (2.0 * p.spring_k);
            g[a] += f;
            g[b] -= f;
        }
    }
    springs *= p.spring_k;

    let n = mesh.boundary_edges.len();
    let min_len = DEGENERATE_EDGE_FRACTION * p.target_length;
    let mut lengths = Vec::with_capacity(n);
    let mut tangents = Vec::with_capacity(n);
    for (j, &[a, b]) in mesh.boundary_edges.iter().enumerate() {
        let e = x[b] - x[a];
        let s = e.norm();
        if !(s >= min_len) {
            if !s.is_finite() {
                return Err(Error::NonFinite("boundary edge"));
            }
            return Err(Error::DegenerateBoundary { edge: j, length: s });
        }
        lengths.push(s);
        tangents.push(e / s);
    }

    // Bending at the vertex between edges j-1 and j:
    //   ⟨s⟩κ² = |t_j − t_{j−1}|² / ⟨s⟩ = 4 (1 − t_j·t_{j−1}) / (s_j + s_{j−1}).
    let mut bending = 0.0;
    let mut d_t = vec![Vec3::zeros(); n];
    let mut d_s = vec![0.0; n];
    for j in 0..n {
        let i = (j + n - 1) % n;
        let c = tangents[j].dot(&tangents[i]);
        let w = lengths[j] + lengths[i];
        let e = 4.0 * (1.0 - c) / w;
        bending += e;
        if grad.is_some() {
            d_t[j] -= tangents[i] * (4.0 / w);
            d_t[i] -= tangents[j] * (4.0 / w);
            let ds = -e / w;
            d_s[j] += ds;
            d_s[i] += ds;
        }
    }
    bending *= p.alpha;
    d_t.iter_mut().for_each(|v| *v *= p.alpha);
    d_s.iter_mut().for_each(|v| *v *= p.alpha);

    let constraint = LENGTH_CONSTRAINTS.get(&p.length_constraint)?;
    let length_penalty = constraint.penalty(&lengths, p.target_length, p.length_penalty_k, &mut d_s);

    if let Some(g) = grad {
        for (j, &[a, b]) in mesh.boundary_edges.iter().enumerate() {
            let t = tangents[j];
            // ∂t/∂e = (I − t tᵀ)/s and ∂s/∂e = t
            let de = (d_t[j] - t * t.dot(&d_t[j])) / lengths[j] + t * d_s[j];
            g[b] += de;
            g[a] -= de;
        }
    }

    let boundary_length = lengths.iter().sum();
    let total = bending + springs + length_penalty;
    if !total.is_finite() {
        return Err(Error::NonFinite("energy"));
    }
    Ok(EnergyBreakdown {
        bending,
        springs,
        length_penalty,
        total,
        boundary_length,
    })
}

/// Gauss-Newton approximation of the 3×3 diagonal blocks of the energy
/// Hessian, one per vertex: springs, bending through the tangent Jacobians
/// `(I − t tᵀ)/s`, and the penalty's [`LengthConstraint::edge_stiffness`].
/// Every block is positive semidefinite.
pub fn hessian_blocks(mesh: &TriMesh, x: &[Vec3], p: &EnergyParams, blocks: &mut [Matrix3<f64>]) -> Result<()> {
    blocks.iter_mut().for_each(|b| *b = Matrix3::zeros());
    for &[a, b] in &mesh.interior_edges {
        for v in [a, b] {
            for k in 0..3 {
                blocks[v][(k, k)] += 2.0 * p.spring_k;
            }
        }
    }
    let n = mesh.boundary_edges.len();
    let edge_k = LENGTH_CONSTRAINTS
        .get(&p.length_constraint)?
        .edge_stiffness(p.length_penalty_k);
    let mut lengths = Vec::with_capacity(n);
    let mut jac = Vec::with_capacity(n);
    let mut outer = Vec::with_capacity(n);
    for &[a, b] in &mesh.boundary_edges {
        let e = x[b] - x[a];
        let s = e.norm();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonFinite("boundary edge"));
        }
        let t = e / s;
        let tt = t * t.transpose();
        lengths.push(s);
        jac.push((Matrix3::identity() - tt) / s);
        outer.push(tt);
    }
    // the bending term at the vertex between edges i and j is 2α|t_j − t_i|²/(s_i + s_j)
    for j in 0..n {
        let i = (j + n - 1) % n;
        let w = 4.0 * p.alpha / (lengths[j] + lengths[i]);
        let [before, vertex] = mesh.boundary_edges[i];
        let after = mesh.boundary_edges[j][1];
        let centre = jac[i] + jac[j];
        blocks[vertex] += centre * centre * w + (outer[i] + outer[j]) * edge_k;
        blocks[before] += jac[i] * jac[i] * w;
        blocks[after] += jac[j] * jac[j] * w;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk_mesh;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hexagon_only() -> (TriMesh, Configuration) {
        // one ring: the six boundary edges are unit length, the hub only carries springs
        generate_disk_mesh(1, 1.0).unwrap()
    }

    fn params(alpha: f64, k: f64, l: f64, pen: f64) -> EnergyParams {
        EnergyParams {
            alpha,
            spring_k: k,
            target_length: l,
            length_penalty_k: pen,
            length_constraint: "global".into(),
        }
    }

    #[test]
    fn regular_hexagon_bending_is_six() {
        let (mesh, x) = hexagon_only();
        let e = energy(&mesh, &x, &params(1.0, 0.0, 6.0, 0.0)).unwrap();
        assert!((e.bending - 6.0).abs() < 1e-12, "{}", e.bending);
        assert_eq!(e.springs, 0.0);
        assert!((e.boundary_length - 6.0).abs() < 1e-12);
    }

    #[test]
    fn circle_bending_tends_to_ring_energy() {
        // polygon of n sides inscribed in radius R: α Σ⟨s⟩κ² → 2πα/R
        let r = 0.7;
        let mut errs = Vec::new();
        for rings in [8usize, 16, 32] {
            let (mesh, mut x) = generate_disk_mesh(rings, 1.0).unwrap();
            let n = mesh.boundary_len();
            for (i, &v) in mesh.boundary_loop.iter().enumerate() {
                let th = 2.0 * PI * i as f64 / n as f64;
                x.positions[v] = Vec3::new(r * th.cos(), r * th.sin(), 0.0);
            }
            let e = energy(&mesh, &x, &params(1.0, 0.0, 2.0 * PI * r, 0.0)).unwrap();
            errs.push((e.bending - 2.0 * PI / r).abs());
        }
        assert!(errs[2] < 1e-3 && errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn collapsed_boundary_is_an_error() {
        let (mesh, x) = hexagon_only();
        let collapsed = Configuration::new(vec![Vec3::new(0.1, 0.2, 0.3); x.len()]);
        let err = energy(&mesh, &collapsed, &params(1.0, 1.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateBoundary { .. }), "{err}");
    }

    #[test]
    fn harmonic_equilibrium_has_zero_interior_gradient() {
        // flat hex lattice: every interior vertex is the mean of its neighbours
        let (mesh, x) = generate_disk_mesh(4, 1.0).unwrap();
        let g = gradient(&mesh, &x, &params(1e-30, 3.0, 24.0, 0.0)).unwrap();
        let on_boundary = mesh.boundary_mask();
        for (v, gv) in g.iter().enumerate() {
            if !on_boundary[v] {
                assert!(gv.norm() < 1e-12, "vertex {v}: {gv}");
            }
        }
    }

    #[test]
    fn sigma_and_gamma_conversions() {
        assert!((sigma_from_spring_k(3f64.sqrt() / 4.0) - 1.0).abs() < 1e-15);
        let (kl3, gamma) = gamma_numeric(643.0, 1.0, 1.0);
        assert_eq!(kl3, 643.0);
        assert!((gamma - 643.0 * 4.0 / 3f64.sqrt()).abs() < 1e-9);
        assert!((gamma - 1484.9).abs() < 0.05, "{gamma}");
        assert_eq!(gamma_numeric(0.0, 1.0, 1.0), (0.0, 0.0));
        assert!((k_l3_from_gamma(gamma) - 643.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_constraint_is_rejected() {
        let mut p = EnergyParams::dimensionless(10.0);
        p.length_constraint = "rubber".into();
        assert!(p.validate().is_err());
        assert!(EnergyParams::dimensionless(10.0).validate().is_ok());
    }

    fn random_configuration(rings: usize, seed: u64) -> (TriMesh, Configuration) {
        let (mesh, x) = generate_disk_mesh(rings, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Configuration::new(
            x.positions
                .iter()
                .map(|p| {
                    p + Vec3::new(
                        rng.gen_range(-0.3..0.3),
                        rng.gen_range(-0.3..0.3),
                        rng.gen_range(-0.5..0.5),
                    )
                })
                .collect(),
        );
        (mesh, x)
    }

    fn total(mesh: &TriMesh, x: &Configuration, p: &EnergyParams) -> f64 {
        energy(mesh, x, p).unwrap().total
    }

    #[test]
    fn every_constraint_gradient_matches_finite_differences() {
        let (mesh, x) = random_configuration(3, 11);
        for name in LENGTH_CONSTRAINTS.names() {
            let mut p = params(1.3, 0.7, 15.0, 5.0);
            p.length_constraint = name.into();
            let g = gradient(&mesh, &x, &p).unwrap();
            let h = 1e-6;
            for (v, gv) in g.iter().enumerate() {
                for (c, &gc) in gv.iter().enumerate() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp.positions[v][c] += h;
                    xm.positions[v][c] -= h;
                    let fd = (total(&mesh, &xp, &p) - total(&mesh, &xm, &p)) / (2.0 * h);
                    assert!(
                        (fd - gc).abs() <= 1e-6 * (1.0 + gc.abs()),
                        "{name} {v},{c}: {fd} vs {gc}"
                    );
                }
            }
        }
    }

    #[test]
    fn uniform_constraint_ignores_equal_stretch() {
        // equal edges: only the total-length term is left
        let (mesh, x) = hexagon_only();
        let mut p = params(0.0, 0.0, 5.0, 2.0);
        p.length_constraint = "uniform".into();
        let e = energy(&mesh, &x, &p).unwrap();
        assert!((e.length_penalty - 2.0).abs() < 1e-12, "{}", e.length_penalty);
    }

    /// Hessian by central differences of the analytic gradient.
    fn fd_block(mesh: &TriMesh, x: &Configuration, p: &EnergyParams, v: usize) -> Matrix3<f64> {
        let h = 1e-6;
        let mut m = Matrix3::zeros();
        for c in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.positions[v][c] += h;
            xm.positions[v][c] -= h;
            let d = (gradient(mesh, &xp, p).unwrap()[v] - gradient(mesh, &xm, p).unwrap()[v]) / (2.0 * h);
            m.set_column(c, &d);
        }
        m
    }

    #[test]
    fn spring_blocks_are_exact() {
        let (mesh, x) = random_configuration(3, 5);
        let p = params(0.0, 2.5, 15.0, 0.0);
        let mut blocks = vec![Matrix3::zeros(); x.len()];
        hessian_blocks(&mesh, &x.positions, &p, &mut blocks).unwrap();
        for (v, b) in blocks.iter().enumerate() {
            assert!((b - fd_block(&mesh, &x, &p, v)).norm() < 1e-6, "{v}");
        }
    }

    #[test]
    fn hessian_blocks_are_positive_semidefinite() {
        let (mesh, x) = random_configuration(4, 9);
        for name in LENGTH_CONSTRAINTS.names() {
            let mut p = params(1.3, 0.7, 15.0, 50.0);
            p.length_constraint = name.into();
            let mut blocks = vec![Matrix3::zeros(); x.len()];
            hessian_blocks(&mesh, &x.positions, &p, &mut blocks).unwrap();
            for b in &blocks {
                assert!((b - b.transpose()).norm() <= 1e-12 * b.norm());
                assert!(b.symmetric_eigenvalues().min() >= -1e-9 * b.norm(), "{name}: {b}");
            }
        }
    }

    #[test]
    fn bending_blocks_match_the_hessian_at_a_circle() {
        // Gauss-Newton drops the residual term, which is small on a fine
        // polygon; the in-plane radial stiffness is what the blocks must get right
        let (mesh, mut x) = generate_disk_mesh(8, 1.0).unwrap();
        let n = mesh.boundary_len();
        for (i, &v) in mesh.boundary_loop.iter().enumerate() {
            let th = 2.0 * PI * i as f64 / n as f64;
            x.positions[v] = Vec3::new(th.cos(), th.sin(), 0.0);
        }
        let p = params(1.0, 0.0, 2.0 * PI, 0.0);
        let mut blocks = vec![Matrix3::zeros(); x.len()];
        hessian_blocks(&mesh, &x.positions, &p, &mut blocks).unwrap();
        let v = mesh.boundary_loop[0];
        let exact = fd_block(&mesh, &x, &p, v);
        let z = Vec3::z();
        let rel = (blocks[v] * z - exact * z).norm() / (exact * z).norm();
        assert!(rel < 0.05, "{rel}: {} vs {exact}", blocks[v]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn invariant_under_rigid_motion(seed in 0u64..1000, angle in 0.0..std::f64::consts::TAU, shift in -3.0..3.0f64) {
            let (mesh, x) = random_configuration(3, seed);
            let p = params(0.8, 1.7, 18.0, 4.0);
            let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Vector3::y_axis(), angle)
                * nalgebra::Rotation3::from_axis_angle(&nalgebra::Vector3::z_axis(), 0.3 * angle);
            let moved = Configuration::new(x.positions.iter().map(|q| rot * q + Vec3::new(shift, -shift, 0.5)).collect());
            let (e0, e1) = (energy(&mesh, &x, &p).unwrap(), energy(&mesh, &moved, &p).unwrap());
            prop_assert!((e0.total - e1.total).abs() < 1e-10 * e0.total);
            let (g0, g1) = (gradient(&mesh, &x, &p).unwrap(), gradient(&mesh, &moved, &p).unwrap());
            for (a, b) in g0.iter().zip(&g1) {
                prop_assert!((rot * a - b).norm() < 1e-9 * (1.0 + a.norm()));
            }
            let net: Vec3 = g0.iter().sum();
            prop_assert!(net.norm() < 1e-9);
        }

        #[test]
        fn scale_covariance(seed in 0u64..1000, lambda in 0.3..3.0f64) {
            let (mesh, x) = random_configuration(2, seed);
            let p = params(1.0, 1.0, 10.0, 0.0);
            let e0 = energy(&mesh, &x, &p).unwrap();
            let e1 = energy(&mesh, &x.scaled(lambda), &p).unwrap();
            prop_assert!((e1.springs - lambda * lambda * e0.springs).abs() < 1e-9 * e1.springs);
            prop_assert!((e1.bending - e0.bending / lambda).abs() < 1e-9 * e1.bending);
            prop_assert!((e1.boundary_length - lambda * e0.boundary_length).abs() < 1e-9 * e1.boundary_length);
        }

        #[test]
        fn breakdown_sums_and_is_nonnegative(seed in 0u64..1000) {
            let (mesh, x) = random_configuration(2, seed);
            let e = energy(&mesh, &x, &params(1.0, 2.0, 5.0, 3.0)).unwrap();
            prop_assert!(e.bending >= 0.0 && e.springs >= 0.0 && e.length_penalty >= 0.0);
            prop_assert!((e.total - (e.bending + e.springs + e.length_penalty)).abs() < 1e-12 * e.total);
        }
    }
}
