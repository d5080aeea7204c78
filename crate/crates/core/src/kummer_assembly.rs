//! The grafted metric `ω₀` on the Kummer surface: flat `T⁴/±1` with sixteen
//! Eguchi-Hanson patches scaled by `R⁻¹` glued in at the fixed points.
//!
//! With the unit lattice all sixteen necks are isometric, so numerical work
//! happens on the quotient cell `ℝ⁴/(½ℤ⁴)`, which contains one fixed point.
//! Integrals over the Kummer surface are eight times integrals over that cell.

use crate::charts::cartesian::CartesianGrid;
use crate::charts::composite::{Composite, CompositeField, CompositeLayout};
use crate::charts::polar::{InnerEdge, RadialCoefficients};
use crate::charts::{capped_radius, smoothed_radius};
use crate::conformal_frame::neck_half_length;
use crate::cross_section::Symmetry;
use crate::eguchi_hanson::{CutoffMetric, ProfileKind, RadialProfile};
use crate::error::{Error, Result};
use crate::hermitian::Herm2;
use crate::quadrature::{composite_gl, ChebyshevGrid};
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Smallest gluing parameter for which the cut-off metric is built.
pub const MIN_GLUING: f64 = 16.0;
/// Radii (torus units) of the composite chart layout.
pub const R_IN: f64 = 0.18;
pub const R_BLEND: f64 = 0.235;
pub const R_OUT: f64 = 0.245;
/// Polar directions merge the ±1 quotient twice over, and the cell is a
/// sixteenth of the torus: integrals over the surface are 8× cell integrals.
pub const CELL_MULTIPLICITY: f64 = 8.0;

/// Lattice `Λ ⊂ ℂ² = ℝ⁴`, generators as columns of `generators`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub generators: [[f64; 4]; 4],
}

impl Lattice {
    pub fn new(generators: [[f64; 4]; 4]) -> Result<Self> {
        let l = Self { generators };
        if !(l.covolume() > 1e-12) {
            return Err(Error::Config("lattice generators are linearly dependent".into()));
        }
        Ok(l)
    }

    pub fn unit() -> Self {
        let mut g = [[0.0; 4]; 4];
        for (k, col) in g.iter_mut().enumerate() {
            col[k] = 1.0;
        }
        Self { generators: g }
    }

    fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.generators[j][i])
    }

    pub fn covolume(&self) -> f64 {
        self.matrix().determinant().abs()
    }

    pub fn is_unit(&self) -> bool {
        *self == Self::unit()
    }

    pub fn point(&self, c: [f64; 4]) -> [f64; 4] {
        let v = self.matrix() * Vector4::from(c);
        [v[0], v[1], v[2], v[3]]
    }

    /// Coordinates of `x` in the generator basis.
    pub fn coordinates(&self, x: [f64; 4]) -> [f64; 4] {
        let c = self.matrix().lu().solve(&Vector4::from(x)).expect("generators are independent");
        [c[0], c[1], c[2], c[3]]
    }

    /// Whether `−p ≡ p (mod Λ)`.
    pub fn is_fixed(&self, p: [f64; 4]) -> bool {
        self.coordinates(p).iter().all(|c| (2.0 * c - (2.0 * c).round()).abs() < 1e-12)
    }

    /// Nearest half-lattice point to `x` in the generator coordinates, and
    /// the offset from it. For the unit lattice this is the nearest fixed
    /// point in Euclidean distance.
    pub fn nearest_fixed_point(&self, x: [f64; 4]) -> ([f64; 4], [f64; 4]) {
        let c = self.coordinates(x).map(|v| 0.5 * (2.0 * v).round());
        let p = self.point(c);
        (p, [x[0] - p[0], x[1] - p[1], x[2] - p[2], x[3] - p[3]])
    }
}

/// The sixteen points fixed by `z ↦ −z`, as half-lattice classes in the
/// fundamental domain spanned by the generators.
pub fn fixed_points(lattice: &Lattice) -> Vec<[f64; 4]> {
    (0..16u32)
        .map(|mask| lattice.point([0, 1, 2, 3].map(|k| 0.5 * ((mask >> k) & 1) as f64)))
        .collect()
}

/// Discretisation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Resolutions {
    /// Cartesian samples per direction on the quotient cell (period ½).
    pub grid_n: usize,
    /// Log-radial spacing of the polar chart.
    pub ds: f64,
    /// Innermost polar radius, Eguchi-Hanson units.
    pub r_min: f64,
    pub max_degree: usize,
    pub cg_tol: f64,
    /// Chebyshev intervals across the neck band.
    pub band_nodes: usize,
}

impl Default for Resolutions {
    fn default() -> Self {
        Self {
            grid_n: 16,
            ds: 0.02,
            r_min: 0.25,
            max_degree: 8,
            cg_tol: 1e-12,
            band_nodes: 48,
        }
    }
}

/// The grafted geometry at one gluing parameter.
pub struct GluedGeometry {
    pub lattice: Lattice,
    pub r: f64,
    /// `T = ½ log R`.
    pub half_length: f64,
    pub fixed_points: Vec<[f64; 4]>,
    pub metric: CutoffMetric,
    pub resolutions: Resolutions,
    composite: Option<Composite>,
    /// Conformal factor and `η` on the composite, when it is built.
    pub h: Option<CompositeField>,
    pub eta: Option<CompositeField>,
}

fn check_inputs(lattice: &Lattice, r: f64, res: &Resolutions, metric: &CutoffMetric) -> Result<()> {
    if !(r >= MIN_GLUING) {
        return Err(Error::RTooSmall {
            r,
            reason: format!("the cut-off annulus needs R ≥ {MIN_GLUING}"),
        });
    }
    if !lattice.is_unit() {
        return Err(Error::Config("assembly supports the unit lattice ℤ⁴ only".into()));
    }
    if !(res.ds > 0.0 && res.ds <= 0.1) || res.grid_n < 8 || res.band_nodes < 8 {
        return Err(Error::Resolution(format!(
            "need Δs ≤ 0.1, grid_n ≥ 8 and band_nodes ≥ 8 (got {}, {}, {})",
            res.ds, res.grid_n, res.band_nodes
        )));
    }
    let (lo, hi) = (0.25 * r, r);
    for i in 0..=2000 {
        let rho = lo + (hi - lo) * i as f64 / 2000.0;
        if let Err(Error::Positivity(msg)) = metric.eta(rho) {
            return Err(Error::RTooSmall { r, reason: msg });
        }
    }
    Ok(())
}

impl GluedGeometry {
    /// Radial data only: enough for `η`, volumes and sweeps at any `R ≥ 16`.
    pub fn radial(lattice: &Lattice, r: f64, res: &Resolutions, profile: RadialProfile) -> Result<Self> {
        let metric = CutoffMetric::with_profile(r, profile)?;
        check_inputs(lattice, r, res, &metric)?;
        Ok(Self {
            lattice: lattice.clone(),
            r,
            half_length: neck_half_length(r),
            fixed_points: fixed_points(lattice),
            metric,
            resolutions: res.clone(),
            composite: None,
            h: None,
            eta: None,
        })
    }

    /// Radius of the glued-in balls in torus units.
    pub fn ball_radius(&self) -> f64 {
        self.r.powf(-0.5)
    }

    /// `ψ′, ψ″` coefficients of `ω_{R,Y}` at `ρ = r_Y²`.
    pub fn coefficients(&self, rho: f64) -> RadialCoefficients {
        let d = self.metric.derivs(rho);
        RadialCoefficients {
            a: d.radial_coefficient(rho),
            b: d.d1,
            h: self.conformal_factor_y(rho),
        }
    }

    /// `Rh` as a function of `ρ = r_Y²`. Only the resolved profile needs the
    /// radius smoothed near the bolt; the flat cone keeps `h = r` so that
    /// `h` stays an exact kernel element of the cylinder inner edge.
    pub fn conformal_factor_y(&self, rho: f64) -> f64 {
        let radius = match self.metric.profile.kind {
            ProfileKind::Euclidean => rho.sqrt(),
            ProfileKind::EguchiHanson => smoothed_radius(rho),
        };
        self.r * capped_radius(radius / self.r)
    }

    /// `det ω_{R,Y}` relative to the flat form.
    pub fn det_y(&self, rho: f64) -> f64 {
        self.metric.derivs(rho).det(rho)
    }

    /// `η` at Eguchi-Hanson radius `r_Y`; zero away from the annulus.
    pub fn eta_y(&self, r_y: f64) -> f64 {
        let rho = r_y * r_y;
        if rho < 0.25 * self.r || rho > self.r {
            return 0.0;
        }
        1.0 / self.det_y(rho) - 1.0
    }

    /// `η` at a point of the torus, in torus coordinates.
    pub fn eta_at(&self, x: [f64; 4]) -> f64 {
        let (_, d) = self.lattice.nearest_fixed_point(x);
        let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.eta_y(self.r * r)
    }

    /// `ω₀` at a point of the torus: flat outside the balls, the pullback of
    /// `R⁻²ω_{R,Y}` inside (which has the same components at `z_Y = Rz`).
    pub fn omega0_at(&self, x: [f64; 4]) -> Result<Herm2> {
        let (_, d) = self.lattice.nearest_fixed_point(x);
        let z = [Complex64::new(d[0], d[1]) * self.r, Complex64::new(d[2], d[3]) * self.r];
        let rho = z[0].norm_sqr() + z[1].norm_sqr();
        if rho >= self.r {
            return Ok(Herm2::IDENTITY);
        }
        self.metric.kahler_matrix(z)
    }

    pub fn composite(&self) -> Result<&Composite> {
        self.composite.as_ref().ok_or_else(|| Error::RTooSmall {
            r: self.r,
            reason: format!(
                "the ball radius {:.3} exceeds the polar chart ({R_IN}); solves need R ≥ {:.0}",
                self.ball_radius(),
                (1.0 / (R_IN * R_IN)).ceil()
            ),
        })
    }

    /// Chebyshev samples of the radial data across the band where `η` lives.
    pub fn neck_band(&self) -> NeckBand {
        // Neck coordinate t = log(r_Y/√R), band [−log 2, 0].
        let grid = ChebyshevGrid::new(self.resolutions.band_nodes, -(2f64.ln()), 0.0);
        let sq = self.r.sqrt();
        let mut eta = Vec::new();
        let mut density = Vec::new();
        let mut weighted = Vec::new();
        for t in &grid.nodes {
            let r_y = sq * t.exp();
            let rho = r_y * r_y;
            let h = self.conformal_factor_y(rho);
            let e = 1.0 / self.det_y(rho) - 1.0;
            eta.push(e);
            // dμ_Θ = det · (r/h)⁴ dt dΩ; sixteen necks, each over S³/±1.
            density.push(16.0 * 0.5 * PI * PI * self.det_y(rho) * (r_y / h).powi(4));
            weighted.push(h.powi(3) * e);
        }
        NeckBand {
            grid,
            eta,
            density,
            weighted,
        }
    }
}

/// Radial data on the neck band.
pub struct NeckBand {
    pub grid: ChebyshevGrid,
    pub eta: Vec<f64>,
    /// Volume density of `Θ` in `dt`, summed over the sixteen necks.
    pub density: Vec<f64>,
    /// `(Rh)³η`.
    pub weighted: Vec<f64>,
}

impl NeckBand {
    /// `(Σ_{j≤k} ∫|∂_t^j η|² dμ_Θ)^{1/2}`.
    pub fn sobolev(&self, k: usize) -> f64 {
        let mut d = self.eta.clone();
        let mut total = 0.0;
        for j in 0..=k {
            if j > 0 {
                d = self.grid.differentiate(&d);
            }
            let f: Vec<f64> = d.iter().zip(&self.density).map(|(v, w)| v * v * w).collect();
            total += self.grid.integrate(&f);
        }
        total.sqrt()
    }
}

/// Norms of `η` on the assembled geometry.
#[derive(Clone, Debug, Serialize)]
pub struct EtaReport {
    pub r: f64,
    pub sup: f64,
    /// `L²_k` norms for `k = 0..=3`.
    pub sobolev: [f64; 4],
    /// `sup |(Rh)³η|`.
    pub weighted_sup: f64,
    /// `sup |η|` sampled separately around each fixed point.
    pub per_neck_sup: Vec<f64>,
}

/// `L²_k` norm of `η` over the neck bands, with `t`-derivatives in the
/// cylindrical metric.
pub fn eta_norms(geometry: &GluedGeometry, k: usize) -> Result<f64> {
    if k > 3 {
        return Err(Error::UnsupportedIndex(k));
    }
    Ok(geometry.neck_band().sobolev(k))
}

/// `L²` norm of `η` by Gauss-Legendre panels in `ρ`, independent of the band grid.
pub fn eta_l2_by_quadrature(geometry: &GluedGeometry) -> f64 {
    let r = geometry.r;
    let f = |rho: f64| {
        let e = 1.0 / geometry.det_y(rho) - 1.0;
        let h = geometry.conformal_factor_y(rho);
        // dt = dρ/(2ρ), r⁴ = ρ².
        16.0 * 0.5 * PI * PI * e * e * geometry.det_y(rho) * rho * rho / h.powi(4) / (2.0 * rho)
    };
    composite_gl(f, 0.25 * r, r, 32).sqrt()
}

pub fn eta_report(geometry: &GluedGeometry) -> Result<EtaReport> {
    let band = geometry.neck_band();
    let mut sobolev = [0.0; 4];
    for (k, s) in sobolev.iter_mut().enumerate() {
        *s = band.sobolev(k);
    }
    let samples = 2000;
    let sq = geometry.r.sqrt();
    let mut sup = band.eta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..=samples {
        let r_y = sq * (0.5 + 0.5 * i as f64 / samples as f64);
        sup = sup.max(geometry.eta_y(r_y).abs());
    }
    let weighted_sup = band.weighted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Around each fixed point, sample directions on a small sphere through
    // the annulus and evaluate through the lattice reduction.
    let dirs = [[1.0, 0.0, 0.0, 0.0], [0.5, 0.5, 0.5, 0.5], [0.0, 0.6, 0.0, -0.8], [-0.48, 0.6, 0.64, 0.0]];
    let per_neck_sup = geometry
        .fixed_points
        .iter()
        .map(|p| {
            let mut m = 0.0f64;
            for d in &dirs {
                for i in 0..=200 {
                    let rx = geometry.ball_radius() * (0.5 + 0.5 * i as f64 / 200.0);
                    let x = [0, 1, 2, 3].map(|k| p[k] + rx * d[k]);
                    m = m.max(geometry.eta_at(x).abs());
                }
            }
            m
        })
        .collect();
    Ok(EtaReport {
        r: geometry.r,
        sup,
        sobolev,
        weighted_sup,
        per_neck_sup,
    })
}

/// Volumes `∫ω₀²` of the Kummer surface (flat normalisation `det = 1`).
#[derive(Clone, Debug, Serialize)]
pub struct VolumeReport {
    pub flat: f64,
    /// Flat volume minus `π²/4` per neck in Eguchi-Hanson units.
    pub analytic: f64,
    /// Flat volume plus a radial quadrature of `det − 1` over the annuli.
    pub quadrature: f64,
    /// Sum over the composite charts with the core ball added analytically.
    pub composite: Option<f64>,
}

impl VolumeReport {
    /// `λ = Vol(ω₀)/Vol(flat)` from the radial quadrature.
    pub fn lambda(&self) -> f64 {
        self.quadrature / self.flat
    }
}

pub fn volume(geometry: &GluedGeometry) -> Result<VolumeReport> {
    let r = geometry.r;
    let flat = 0.5 * geometry.lattice.covolume();
    let scale = r.powi(-4);
    // Without the cut, (ρψ′)² = ρ² + c with c = 1 for Eguchi-Hanson; the cut
    // restores (ρψ′)² = ρ², removing π²c/4 from each neck.
    let c = match geometry.metric.profile.kind {
        ProfileKind::EguchiHanson => 1.0,
        ProfileKind::Euclidean => 0.0,
    };
    let analytic = flat - 16.0 * 0.25 * PI * PI * c * scale;
    // Volume element of ℂ²/±1 in ρ: (π²/2)ρ dρ.
    let annulus = composite_gl(|rho| (geometry.det_y(rho) - 1.0) * rho, 0.25 * r, r, 64);
    let quadrature = flat + 16.0 * 0.5 * PI * PI * annulus * scale;
    let composite = match (&geometry.composite, &geometry.h) {
        (Some(model), Some(h)) => {
            let unit = model.from_radial(|_| 1.0);
            let zm = model.zero_mode();
            let c0 = unit.polar[zm][0];
            let mut hsq = h.clone();
            for v in hsq.polar[zm].iter_mut() {
                *v = *v * *v / c0;
            }
            for v in hsq.cart.iter_mut() {
                *v *= *v;
            }
            // Core ball below the first polar cell: det = 1 there.
            let r_core = (model.polar.s0 - 0.5 * model.polar.ds).exp() / r;
            let core = 0.5 * PI * PI * r_core.powi(4);
            Some(CELL_MULTIPLICITY * (model.inner(&hsq, &hsq) + core))
        }
        _ => None,
    };
    Ok(VolumeReport {
        flat,
        analytic,
        quadrature,
        composite,
    })
}

/// Full assembly: radial data plus, once the balls fit inside the polar
/// chart (`R ≥ 31`), the composite discretisation carrying `h` and `η`.
pub fn assemble(lattice: &Lattice, r: f64, res: &Resolutions) -> Result<GluedGeometry> {
    assemble_with_profile(lattice, r, res, RadialProfile::eguchi_hanson())
}

pub fn assemble_with_profile(lattice: &Lattice, r: f64, res: &Resolutions, profile: RadialProfile) -> Result<GluedGeometry> {
    let mut g = GluedGeometry::radial(lattice, r, res, profile)?;
    if g.ball_radius() >= R_IN {
        return Ok(g);
    }
    let inner = match g.metric.profile.kind {
        ProfileKind::EguchiHanson => InnerEdge::Bolt,
        ProfileKind::Euclidean => InnerEdge::Cylinder,
    };
    let layout = CompositeLayout {
        scale: r,
        ds: res.ds,
        r_min: res.r_min,
        inner,
        r_in: R_IN,
        r_blend: R_BLEND,
        r_out: R_OUT,
        grid: CartesianGrid { n: res.grid_n, period: 0.5 },
        max_degree: res.max_degree,
        symmetry: Symmetry::CubicLattice,
        cg_tol: res.cg_tol,
    };
    let model = Composite::new(layout, |r_y| g.coefficients(r_y * r_y), capped_radius)?;
    let h = model.conformal_factor();
    let mut eta = model.zeros();
    let unit = model.from_radial(|_| 1.0);
    let zm = model.zero_mode();
    let c0 = unit.polar[zm][0];
    for i in 0..model.polar.n {
        eta.polar[zm][i] = c0 * g.eta_y(model.polar.r(i));
    }
    for (idx, v) in eta.cart.iter_mut().enumerate() {
        *v = g.eta_y(r * model.layout.grid.radius(idx));
    }
    g.composite = Some(model);
    g.h = Some(h);
    g.eta = Some(eta);
    Ok(g)
}

/// A flat array with its shape.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArrayField {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// JSON snapshot of an assembled geometry.
#[derive(Clone, Debug, Serialize)]
pub struct GeometrySnapshot {
    pub schema: &'static str,
    pub r: f64,
    pub half_length: f64,
    pub lattice: Lattice,
    pub fixed_points: Vec<[f64; 4]>,
    pub resolutions: Resolutions,
    pub eta: EtaReport,
    pub volume: VolumeReport,
    /// Neck band: `t`, `η`, `Θ` density.
    pub band: Vec<ArrayField>,
    /// Polar chart (zero-mode radial profiles) and Cartesian cell fields.
    pub polar: Vec<ArrayField>,
    pub cartesian: Vec<ArrayField>,
}

pub const SNAPSHOT_SCHEMA: &str = "kummer-geometry/1";

pub fn snapshot(geometry: &GluedGeometry) -> Result<GeometrySnapshot> {
    let band = geometry.neck_band();
    let nb = band.eta.len();
    let arr = |name: &str, shape: Vec<usize>, data: Vec<f64>| ArrayField {
        name: name.into(),
        shape,
        data,
    };
    let mut polar = Vec::new();
    let mut cartesian = Vec::new();
    if let (Some(model), Some(h)) = (&geometry.composite, &geometry.h) {
        let n = model.polar.n;
        let zm = model.zero_mode();
        let c0 = model.from_radial(|_| 1.0).polar[zm][0];
        polar.push(arr("r_y", vec![n], (0..n).map(|i| model.polar.r(i)).collect()));
        polar.push(arr("h", vec![n], (0..n).map(|i| h.polar[zm][i] / c0).collect()));
        polar.push(arr("det", vec![n], (0..n).map(|i| geometry.det_y(model.polar.r(i).powi(2))).collect()));
        polar.push(arr("eta", vec![n], (0..n).map(|i| geometry.eta_y(model.polar.r(i))).collect()));
        let m = model.layout.grid.n;
        cartesian.push(arr("h", vec![m; 4], h.cart.clone()));
        if let Some(eta) = &geometry.eta {
            cartesian.push(arr("eta", vec![m; 4], eta.cart.clone()));
        }
    }
    Ok(GeometrySnapshot {
        schema: SNAPSHOT_SCHEMA,
        r: geometry.r,
        half_length: geometry.half_length,
        lattice: geometry.lattice.clone(),
        fixed_points: geometry.fixed_points.clone(),
        resolutions: geometry.resolutions.clone(),
        eta: eta_report(geometry)?,
        volume: volume(geometry)?,
        band: vec![
            arr("t", vec![nb], band.grid.nodes.clone()),
            arr("eta", vec![nb], band.eta.clone()),
            arr("density", vec![nb], band.density.clone()),
        ],
        polar,
        cartesian,
    })
}

/// One row of the `R` sweep table.
#[derive(Clone, Debug, Serialize)]
pub struct AssemblyRow {
    pub r: f64,
    pub sup_eta: f64,
    pub l2k_eta: f64,
    pub t: f64,
    pub lambda: f64,
}

/// `η` norms, neck length and `λ` over a set of gluing parameters.
pub fn sweep(rs: &[f64], res: &Resolutions, k: usize) -> Result<Vec<AssemblyRow>> {
    rs.iter()
        .map(|&r| {
            let g = GluedGeometry::radial(&Lattice::unit(), r, res, RadialProfile::eguchi_hanson())?;
            let rep = eta_report(&g)?;
            Ok(AssemblyRow {
                r,
                sup_eta: rep.sup,
                l2k_eta: eta_norms(&g, k)?,
                t: g.half_length,
                lambda: volume(&g)?.lambda(),
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[AssemblyRow], mut out: W) -> Result<()> {
    writeln!(out, "R,sup_eta,l2k_eta,T,lambda")?;
    for r in rows {
        writeln!(out, "{},{:.12e},{:.12e},{:.12},{:.15}", r.r, r.sup_eta, r.l2k_eta, r.t, r.lambda)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::log_log_slope;

    #[test]
    fn unit_lattice_fixed_points() {
        let l = Lattice::unit();
        let pts = fixed_points(&l);
        assert_eq!(pts.len(), 16);
        for p in &pts {
            assert!(p.iter().all(|c| *c == 0.0 || *c == 0.5));
            assert!(l.is_fixed(*p));
        }
        let skew = Lattice::new([[1.0, 0.0, 0.0, 0.0], [0.3, 1.0, 0.0, 0.0], [0.0, 0.2, 1.1, 0.0], [0.1, 0.0, 0.4, 0.9]]).unwrap();
        let pts = fixed_points(&skew);
        assert_eq!(pts.len(), 16);
        assert!(pts.iter().all(|p| skew.is_fixed(*p)));
        assert!(!skew.is_fixed([0.25, 0.0, 0.0, 0.0]));
        assert!(Lattice::new([[1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]).is_err());
    }

    #[test]
    fn small_gluing_parameter_is_rejected() {
        let e = GluedGeometry::radial(&Lattice::unit(), 8.0, &Resolutions::default(), RadialProfile::eguchi_hanson());
        assert!(matches!(e, Err(Error::RTooSmall { .. })));
        let g = GluedGeometry::radial(&Lattice::unit(), 16.0, &Resolutions::default(), RadialProfile::eguchi_hanson()).unwrap();
        assert!(matches!(g.composite(), Err(Error::RTooSmall { .. })));
        assert!((g.half_length - 0.5 * 16f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn euclidean_profile_gives_flat_metric() {
        let g = GluedGeometry::radial(&Lattice::unit(), 32.0, &Resolutions::default(), RadialProfile::euclidean()).unwrap();
        assert_eq!(eta_norms(&g, 3).unwrap(), 0.0);
        for r in [0.01, 0.1, 0.15, 0.2] {
            let m = g.omega0_at([r, 0.3 * r, 0.0, -0.2 * r]).unwrap();
            assert!(m.sub(&Herm2::IDENTITY).norm() < 1e-14);
        }
        let v = volume(&g).unwrap();
        assert_eq!(v.analytic, 0.5);
        assert!((v.quadrature - 0.5).abs() < 1e-15);
    }

    #[test]
    fn omega0_is_flat_outside_balls_and_positive_inside() {
        let g = GluedGeometry::radial(&Lattice::unit(), 64.0, &Resolutions::default(), RadialProfile::eguchi_hanson()).unwrap();
        assert_eq!(g.omega0_at([0.25, 0.25, 0.1, 0.0]).unwrap(), Herm2::IDENTITY);
        assert_eq!(g.omega0_at([0.5 + 0.13, 0.5, 0.0, 0.0]).unwrap(), Herm2::IDENTITY);
        for i in 1..200 {
            let x = 0.13 * i as f64 / 200.0;
            let m = g.omega0_at([0.5 + x, 0.5 - 0.5 * x, 1.0, 0.2 * x]).unwrap();
            assert!(m.is_positive());
        }
    }

    #[test]
    fn eta_band_norm_matches_quadrature() {
        for r in [16.0, 64.0] {
            let g = GluedGeometry::radial(&Lattice::unit(), r, &Resolutions::default(), RadialProfile::eguchi_hanson()).unwrap();
            let band = eta_norms(&g, 0).unwrap();
            let quad = eta_l2_by_quadrature(&g);
            assert!((band - quad).abs() < 1e-8 * quad, "{band} vs {quad}");
        }
    }

    #[test]
    fn necks_are_isometric() {
        let g = GluedGeometry::radial(&Lattice::unit(), 32.0, &Resolutions::default(), RadialProfile::eguchi_hanson()).unwrap();
        let rep = eta_report(&g).unwrap();
        let first = rep.per_neck_sup[0];
        assert!(first > 0.0);
        assert!(rep.per_neck_sup.iter().all(|v| (v - first).abs() < 1e-10));
    }

    #[test]
    fn eta_decays_like_inverse_square() {
        let rows = sweep(&[16.0, 32.0, 64.0, 128.0], &Resolutions::default(), 3).unwrap();
        let rs: Vec<f64> = rows.iter().map(|r| r.r).collect();
        let sup = log_log_slope(&rs, &rows.iter().map(|r| r.sup_eta).collect::<Vec<_>>()).unwrap();
        let l2 = log_log_slope(&rs, &rows.iter().map(|r| r.l2k_eta).collect::<Vec<_>>()).unwrap();
        assert!((sup.slope + 2.0).abs() < 0.15, "{}", sup.slope);
        assert!((l2.slope + 2.0).abs() < 0.15, "{}", l2.slope);
    }

    #[test]
    fn volume_deficit_matches_core_formula() {
        for r in [16.0, 32.0, 128.0] {
            let g = GluedGeometry::radial(&Lattice::unit(), r, &Resolutions::default(), RadialProfile::eguchi_hanson()).unwrap();
            let v = volume(&g).unwrap();
            let deficit = 0.5 - v.quadrature;
            let expected = 4.0 * PI * PI / r.powi(4);
            assert!((deficit - expected).abs() < 1e-6 * expected, "{deficit} vs {expected}");
            assert!((v.lambda() - (1.0 - 8.0 * PI * PI / r.powi(4))).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_eta_scales_like_inverse_root() {
        let rs = [64.0, 128.0, 256.0, 512.0];
        let vals: Vec<f64> = rs
            .iter()
            .map(|&r| {
                let g = GluedGeometry::radial(&Lattice::unit(), r, &Resolutions::default(), RadialProfile::eguchi_hanson()).unwrap();
                eta_report(&g).unwrap().weighted_sup
            })
            .collect();
        let fit = log_log_slope(&rs, &vals).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn assembled_composite_is_consistent() {
        let g = assemble(&Lattice::unit(), 64.0, &Resolutions::default()).unwrap();
        let model = g.composite().unwrap();
        let h = g.h.as_ref().unwrap();
        // h is continuous across the overlap: transfers reproduce it.
        assert!(model.transfer_mismatch(h) < 1e-12);
        // The composite volume is a cruder quadrature than the radial one.
        let v = volume(&g).unwrap();
        assert!((v.composite.unwrap() - v.analytic).abs() < 1e-5);
        let (summary, _) = crate::ends_gluing::kernel_basis(model).unwrap();
        assert_eq!(summary.dimension, 1);
        assert!(summary.alignment.unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let rows = sweep(&[16.0, 32.0], &Resolutions::default(), 1).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "R,sup_eta,l2k_eta,T,lambda");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("16,"));
    }
}
