//! Per-sphere field evaluation, softmax view blending and cone-wise volume
//! rendering.

use crate::camera::{view_direction_delta, Camera, Vec3};
use crate::error::{Error, Result};
use crate::pyramid::SphereEncoding;
use crate::sampler::{Cone, Sphere};

/// Norm and unit direction of `d_i - d_C` for one source view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewDelta {
    pub norm: f64,
    pub dir: Vec3,
}

/// Direction deltas for every view; `None` where the view does not see the
/// sphere center.
pub fn view_deltas(
    sphere: &Sphere,
    cone_axis: &Vec3,
    cams: &[&Camera],
    enc: &SphereEncoding,
) -> Vec<Option<ViewDelta>> {
    cams.iter()
        .zip(&enc.visible)
        .map(|(cam, &vis)| {
            if !vis {
                return None;
            }
            view_direction_delta(&sphere.center, cone_axis, cam).ok().map(|(norm, dir)| ViewDelta { norm, dir })
        })
        .collect()
}

/// Everything a field provider may look at for one sphere.
pub struct FieldQuery<'a> {
    pub sphere: &'a Sphere,
    pub apex: Vec3,
    pub axis: Vec3,
    pub focal: f64,
    pub encoding: &'a SphereEncoding,
    pub deltas: &'a [Option<ViewDelta>],
}

impl<'a> FieldQuery<'a> {
    pub fn new(sphere: &'a Sphere, cone: &Cone, encoding: &'a SphereEncoding, deltas: &'a [Option<ViewDelta>]) -> Self {
        Self { sphere, apex: cone.apex, axis: cone.axis, focal: cone.focal, encoding, deltas }
    }
}

/// Density and per-view blend logits for one sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub sigma: f64,
    /// One logit per view; `f64::NEG_INFINITY` marks an excluded view.
    pub weights: Vec<f64>,
}

/// Predicts density and blend weights for sampled spheres.
///
/// Implementations must be pure: the renderer calls them concurrently from
/// several bundles and relies on identical answers for identical queries.
pub trait FieldProvider: Send + Sync {
    fn evaluate(&self, query: &FieldQuery<'_>) -> FieldSample;
}

/// Nearest surface along a ray, as a parameter on the (unnormalized) ray.
pub trait SurfaceQuery: Send + Sync {
    fn hit_parameter(&self, origin: &Vec3, direction: &Vec3) -> Option<f64>;
}

/// Analytic density: a Gaussian shell around the true surface hit by the
/// cone axis, with view logits `-λ‖d_i - d_C‖`.
pub struct AnalyticField<'a> {
    surface: &'a dyn SurfaceQuery,
    pub sigma_peak: f64,
    pub lambda: f64,
    pub delta_s: f64,
}

impl<'a> AnalyticField<'a> {
    pub fn new(surface: &'a dyn SurfaceQuery, sigma_peak: f64, lambda: f64, delta_s: f64) -> Self {
        Self { surface, sigma_peak, lambda, delta_s }
    }

    /// Shell width for a sphere: the largest of its radius, half the minimum
    /// sample spacing and half its own depth interval.
    pub fn shell_width(&self, sphere: &Sphere) -> f64 {
        sphere.radius.max(0.5 * self.delta_s).max(0.5 * sphere.interval)
    }

    /// Density at a sphere given the camera depth of the true surface.
    pub fn density(&self, sphere: &Sphere, surface_depth: Option<f64>) -> f64 {
        match surface_depth {
            Some(z) => {
                let s = self.shell_width(sphere);
                let d = sphere.depth - z;
                self.sigma_peak * (-(d * d) / (2.0 * s * s)).exp()
            }
            None => 0.0,
        }
    }

    pub fn view_logit(&self, delta: &Option<ViewDelta>) -> f64 {
        match delta {
            Some(d) => -self.lambda * d.norm,
            None => f64::NEG_INFINITY,
        }
    }
}

impl FieldProvider for AnalyticField<'_> {
    fn evaluate(&self, q: &FieldQuery<'_>) -> FieldSample {
        let surface = self.surface.hit_parameter(&q.apex, &q.axis).map(|t| t * q.focal);
        FieldSample {
            sigma: self.density(q.sphere, surface),
            weights: q.deltas.iter().map(|d| self.view_logit(d)).collect(),
        }
    }
}

/// Constant density with uniform weights over visible views.
#[derive(Clone, Copy, Debug)]
pub struct ConstantField {
    pub sigma: f64,
}

impl FieldProvider for ConstantField {
    fn evaluate(&self, q: &FieldQuery<'_>) -> FieldSample {
        FieldSample {
            sigma: self.sigma,
            weights: q.deltas.iter().map(|d| if d.is_some() { 0.0 } else { f64::NEG_INFINITY }).collect(),
        }
    }
}

/// Softmax-blended features of one sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct Blended {
    pub joint: Vec<f64>,
    pub rays: Vec<f64>,
    /// No view contributed.
    pub masked: bool,
}

/// Softmax over the visible views' logits, applied to both feature streams.
/// Invisible views and `-∞` logits are excluded from numerator and
/// denominator. Each ray slot is additionally restricted to the views its own
/// ray point projects into, so a ray never blends in the zero feature of a
/// view that cannot see it.
pub fn blend_features(weights: &[f64], enc: &SphereEncoding) -> Result<Blended> {
    if weights.len() != enc.views() {
        return Err(Error::mismatch(enc.views(), weights.len()));
    }
    let mut joint = vec![0.0; enc.channels];
    let mut rays = vec![0.0; enc.ray_len()];
    let active = |i: usize| enc.visible[i] && weights[i] > f64::NEG_INFINITY;
    let views: Vec<usize> = (0..weights.len()).filter(|&i| active(i)).collect();
    if views.is_empty() {
        return Ok(Blended { joint, rays, masked: true });
    }
    softmax_into(weights, &views, &mut joint, |i| enc.joint_of(i));
    for slot in 0..enc.k * enc.k {
        let seen: Vec<usize> = views.iter().copied().filter(|&i| enc.ray_visible_of(i)[slot]).collect();
        if !seen.is_empty() {
            softmax_into(weights, &seen, &mut rays[slot * 3..slot * 3 + 3], |i| {
                &enc.rays_of(i)[slot * 3..slot * 3 + 3]
            });
        }
    }
    Ok(Blended { joint, rays, masked: false })
}

/// Adds the softmax (over `views`) weighted features to `out`.
fn softmax_into<'a>(weights: &[f64], views: &[usize], out: &mut [f64], feature: impl Fn(usize) -> &'a [f64]) {
    let top = views.iter().map(|&i| weights[i]).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = views.iter().map(|&i| (weights[i] - top).exp()).collect();
    let total: f64 = exps.iter().sum();
    for (&i, e) in views.iter().zip(&exps) {
        let p = e / total;
        for (o, v) in out.iter_mut().zip(feature(i)) {
            *o += p * v;
        }
    }
}

/// `τ_n = exp(-Σ_{j<n} σ_j)`, with no inter-sample spacing factor.
pub fn transmittance(sigmas: &[f64]) -> Result<Vec<f64>> {
    let mut acc = 0.0_f64;
    let mut out = Vec::with_capacity(sigmas.len());
    for &s in sigmas {
        if !(s >= 0.0) {
            return Err(Error::domain(format!("density must be non-negative, got {s}")));
        }
        out.push((-acc).exp());
        acc += s;
    }
    Ok(out)
}

/// A sphere after field evaluation and blending.
#[derive(Clone, Debug, PartialEq)]
pub struct RadianceSample {
    pub t: f64,
    pub sigma: f64,
    pub weights: Vec<f64>,
    pub joint: Vec<f64>,
    pub rays: Vec<f64>,
    /// Filled by [`accumulate`].
    pub transmittance: f64,
    pub masked: bool,
}

impl RadianceSample {
    /// Builds a sample; fully masked spheres are empty space.
    pub fn new(t: f64, field: FieldSample, blended: Blended) -> Self {
        let sigma = if blended.masked { 0.0 } else { field.sigma };
        Self {
            t,
            sigma,
            weights: field.weights,
            joint: blended.joint,
            rays: blended.rays,
            transmittance: 1.0,
            masked: blended.masked,
        }
    }
}

/// Volume-rendered features of one bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleFeatures {
    pub joint: Vec<f64>,
    pub rays: Vec<f64>,
    /// `Σ τ_n (1 - exp(-σ_n))`.
    pub opacity: f64,
}

/// Front-to-back accumulation of the samples' features. Fills each sample's
/// transmittance. Samples must be ordered by non-decreasing `t`.
pub fn accumulate(samples: &mut [RadianceSample]) -> Result<BundleFeatures> {
    if samples.is_empty() {
        return Err(Error::domain("cannot accumulate zero samples"));
    }
    if samples.windows(2).any(|w| !(w[1].t >= w[0].t)) {
        return Err(Error::domain("samples must be sorted by increasing t"));
    }
    let sigmas: Vec<f64> = samples.iter().map(|s| if s.masked { 0.0 } else { s.sigma }).collect();
    let taus = transmittance(&sigmas)?;
    let mut joint = vec![0.0; samples[0].joint.len()];
    let mut rays = vec![0.0; samples[0].rays.len()];
    let mut opacity = 0.0;
    for ((s, &tau), &sigma) in samples.iter_mut().zip(&taus).zip(&sigmas) {
        s.transmittance = tau;
        if s.joint.len() != joint.len() || s.rays.len() != rays.len() {
            return Err(Error::mismatch(joint.len(), s.joint.len()));
        }
        let w = tau * (1.0 - (-sigma).exp());
        if w == 0.0 {
            continue;
        }
        opacity += w;
        for (o, v) in joint.iter_mut().zip(&s.joint) {
            *o += w * v;
        }
        for (o, v) in rays.iter_mut().zip(&s.rays) {
            *o += w * v;
        }
    }
    Ok(BundleFeatures { joint, rays, opacity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn enc(views: &[(bool, Vec<f64>, Vec<f64>)]) -> SphereEncoding {
        SphereEncoding {
            channels: views[0].1.len(),
            k: 1,
            visible: views.iter().map(|v| v.0).collect(),
            levels: vec![0.0; views.len()],
            joint: views.iter().flat_map(|v| v.1.clone()).collect(),
            rays: views.iter().flat_map(|v| v.2.clone()).collect(),
            ray_visible: views.iter().flat_map(|v| vec![v.0; v.2.len() / 3]).collect(),
        }
    }

    fn sample(t: f64, sigma: f64, joint: Vec<f64>, rays: Vec<f64>) -> RadianceSample {
        RadianceSample { t, sigma, weights: vec![], joint, rays, transmittance: 1.0, masked: false }
    }

    struct Plane(f64);
    impl SurfaceQuery for Plane {
        fn hit_parameter(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
            let t = (self.0 - origin.z) / dir.z;
            (t > 0.0).then_some(t)
        }
    }

    fn sphere(depth: f64, radius: f64, interval: f64) -> Sphere {
        Sphere { center: Vec3::new(0.0, 0.0, depth), radius, depth, t: depth, interval, k: 1, rays: vec![] }
    }

    #[test]
    fn gaussian_peak_and_tail() {
        let plane = Plane(3.0);
        let field = AnalyticField::new(&plane, 20.0, 1.0, 0.1);
        let at = sphere(3.0, 0.01, 0.02);
        assert_eq!(field.density(&at, Some(3.0)), 20.0);
        let s = field.shell_width(&at);
        assert_eq!(s, 0.05);
        let off = sphere(3.0 + 5.0 * s, 0.01, 0.02);
        assert!(field.density(&off, Some(3.0)) < 1e-4 * 20.0);
        assert_eq!(field.density(&at, None), 0.0);
        // wide intervals widen the shell
        assert_eq!(field.shell_width(&sphere(3.0, 0.01, 0.4)), 0.2);
        assert_eq!(field.shell_width(&sphere(3.0, 0.3, 0.4)), 0.3);
    }

    #[test]
    fn analytic_provider_uses_axis_hit_and_deltas() {
        let plane = Plane(3.0);
        let field = AnalyticField::new(&plane, 20.0, 1.0, 0.1);
        let sp = sphere(3.0, 0.01, 0.02);
        let e =
            enc(&[(true, vec![0.0], vec![0.0; 3]), (true, vec![0.0], vec![0.0; 3]), (false, vec![0.0], vec![0.0; 3])]);
        let d = Some(ViewDelta { norm: 0.2, dir: Vec3::x() });
        let deltas = [d, Some(ViewDelta { norm: 0.2, dir: -Vec3::x() }), None];
        let q = FieldQuery {
            sphere: &sp,
            apex: Vec3::zeros(),
            axis: Vec3::new(0.0, 0.0, 1.0),
            focal: 1.0,
            encoding: &e,
            deltas: &deltas,
        };
        let out = field.evaluate(&q);
        assert_eq!(out.sigma, 20.0);
        assert_eq!(out.weights, vec![-0.2, -0.2, f64::NEG_INFINITY]);
        let e2 =
            enc(&[(true, vec![1.0], vec![1.0; 3]), (true, vec![0.0], vec![0.0; 3]), (false, vec![9.0], vec![9.0; 3])]);
        let b = blend_features(&out.weights, &e2).unwrap();
        assert_eq!(b.joint, vec![0.5]);
    }

    #[test]
    fn softmax_cases() {
        let one = enc(&[(true, vec![0.3, 0.6], vec![0.1, 0.2, 0.3])]);
        let b = blend_features(&[-7.0], &one).unwrap();
        assert_eq!(b.joint, vec![0.3, 0.6]);
        assert_eq!(b.rays, vec![0.1, 0.2, 0.3]);

        let three = enc(&[
            (true, vec![0.0], vec![0.0, 0.3, 0.9]),
            (true, vec![0.6], vec![0.3, 0.3, 0.0]),
            (true, vec![0.9], vec![0.9, 0.3, 0.6]),
        ]);
        let b = blend_features(&[0.25, 0.25, 0.25], &three).unwrap();
        assert_relative_eq!(b.joint[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(b.rays[0], 0.4, epsilon = 1e-15);
        assert_relative_eq!(b.rays[1], 0.3, epsilon = 1e-15);
        assert_relative_eq!(b.rays[2], 0.5, epsilon = 1e-15);

        // logits (ln 3, 0): 3/(3+1) and 1/(3+1)
        let two = enc(&[(true, vec![1.0], vec![0.0, 1.0, 0.5]), (true, vec![0.0], vec![1.0, 0.0, 0.5])]);
        let b = blend_features(&[3f64.ln(), 0.0], &two).unwrap();
        assert_relative_eq!(b.joint[0], 0.75, epsilon = 1e-15);
        assert_relative_eq!(b.rays[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(b.rays[1], 0.75, epsilon = 1e-15);
        assert_relative_eq!(b.rays[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rays_blend_only_views_that_see_them() {
        // K = 2; view 1 cannot see slot 3
        let mut e = SphereEncoding {
            channels: 1,
            k: 2,
            visible: vec![true, true],
            levels: vec![0.0; 2],
            joint: vec![0.2, 0.6],
            rays: [[0.2; 12], [0.6; 12]].concat(),
            ray_visible: vec![true, true, true, true, true, true, true, false],
        };
        e.rays[12 + 9..].fill(0.0);
        let b = blend_features(&[0.0, 0.0], &e).unwrap();
        assert_relative_eq!(b.joint[0], 0.4, epsilon = 1e-15);
        assert_relative_eq!(b.rays[0], 0.4, epsilon = 1e-15);
        assert_eq!(&b.rays[9..], &[0.2; 3]);

        // no view sees the slot: it stays zero without masking the sphere
        e.ray_visible[3] = false;
        let b = blend_features(&[0.0, 0.0], &e).unwrap();
        assert!(!b.masked);
        assert_eq!(&b.rays[9..], &[0.0; 3]);
    }

    #[test]
    fn masked_views_excluded() {
        let e = enc(&[(false, vec![5.0], vec![5.0; 3]), (true, vec![1.0], vec![2.0; 3])]);
        let b = blend_features(&[100.0, 0.0], &e).unwrap();
        assert_eq!(b.joint, vec![1.0]);
        let none = enc(&[(false, vec![5.0], vec![5.0; 3])]);
        let b = blend_features(&[0.0], &none).unwrap();
        assert!(b.masked);
        assert_eq!(b.joint, vec![0.0]);
        let neg = enc(&[(true, vec![5.0], vec![5.0; 3])]);
        assert!(blend_features(&[f64::NEG_INFINITY], &neg).unwrap().masked);
        assert!(blend_features(&[0.0, 0.0], &neg).is_err());
    }

    #[test]
    fn transmittance_cases() {
        assert_eq!(transmittance(&[0.0, 0.0, 0.0]).unwrap(), vec![1.0; 3]);
        let t = transmittance(&[2f64.ln(), 123.0]).unwrap();
        assert_relative_eq!(t[1], 0.5, epsilon = 1e-15);
        let t = transmittance(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(t[0], 1.0);
        assert_relative_eq!(t[1], 0.36787944117144233, epsilon = 1e-15);
        assert_relative_eq!(t[2], 0.1353352832366127, epsilon = 1e-15);
        assert!(transmittance(&[0.5, -0.1]).is_err());
    }

    #[test]
    fn accumulation_cases() {
        let mut opaque = vec![sample(1.0, 1e3, vec![0.7], vec![0.1, 0.2, 0.3])];
        let f = accumulate(&mut opaque).unwrap();
        assert_relative_eq!(f.joint[0], 0.7, epsilon = 1e-12);
        assert_relative_eq!(f.opacity, 1.0, epsilon = 1e-12);

        let mut empty = vec![sample(1.0, 0.0, vec![0.7], vec![0.4; 3]), sample(2.0, 0.0, vec![0.2], vec![0.4; 3])];
        let f = accumulate(&mut empty).unwrap();
        assert_eq!(f.joint, vec![0.0]);
        assert_eq!(f.rays, vec![0.0; 3]);
        assert_eq!(f.opacity, 0.0);

        // σ = (ln 2, ln 2), f = (1, 0) and (0, 1): weights 0.5 and 0.5 * 0.5
        let ln2 = 2f64.ln();
        let mut two =
            vec![sample(1.0, ln2, vec![1.0, 0.0], vec![0.0; 3]), sample(2.0, ln2, vec![0.0, 1.0], vec![0.0; 3])];
        let f = accumulate(&mut two).unwrap();
        assert_relative_eq!(f.joint[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(f.joint[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(f.opacity, 0.75, epsilon = 1e-15);
        assert_relative_eq!(two[1].transmittance, 0.5, epsilon = 1e-15);

        let mut unsorted = vec![sample(2.0, 1.0, vec![0.0], vec![0.0; 3]), sample(1.0, 1.0, vec![0.0], vec![0.0; 3])];
        assert!(accumulate(&mut unsorted).is_err());
    }

    #[test]
    fn masked_samples_are_transparent() {
        let mut s = vec![sample(1.0, 50.0, vec![1.0], vec![1.0; 3]), sample(2.0, 50.0, vec![0.5], vec![0.5; 3])];
        s[0].masked = true;
        let f = accumulate(&mut s).unwrap();
        assert_relative_eq!(f.joint[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn order_matters() {
        let a = sample(1.0, 1.0, vec![1.0], vec![0.0; 3]);
        let b = sample(2.0, 2.0, vec![0.0], vec![0.0; 3]);
        let f1 = accumulate(&mut [a.clone(), b.clone()]).unwrap();
        let (mut b2, mut a2) = (b, a);
        std::mem::swap(&mut a2.t, &mut b2.t);
        let f2 = accumulate(&mut [b2, a2]).unwrap();
        assert!((f1.joint[0] - f2.joint[0]).abs() > 1e-3);
    }

    fn arb_samples() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((0.0..10.0f64, 0.0..1.0f64, 0.0..1.0f64), 1..12)
    }

    proptest! {
        #[test]
        fn accumulation_invariants(raw in arb_samples(), constant in any::<bool>()) {
            let mut samples: Vec<RadianceSample> = raw
                .iter()
                .enumerate()
                .map(|(i, &(s, a, b))| sample(i as f64, if constant { 0.7 } else { s }, vec![a], vec![b, a, b]))
                .collect();
            let sigmas: Vec<f64> = samples.iter().map(|s| s.sigma).collect();
            let f = accumulate(&mut samples).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&f.opacity));
            let tail = (-sigmas.iter().sum::<f64>()).exp();
            prop_assert!((f.opacity - (1.0 - tail)).abs() < 1e-12);
            let taus: Vec<f64> = samples.iter().map(|s| s.transmittance).collect();
            prop_assert!(taus.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(taus.iter().all(|t| (0.0..=1.0).contains(t)));
            // features are an opacity-weighted average of values in [0, 1]
            prop_assert!(f.joint[0] >= -1e-12 && f.joint[0] <= f.opacity + 1e-12);
        }

        #[test]
        fn blending_is_convex(vals in prop::collection::vec((any::<bool>(), -3.0..3.0f64, 0.0..1.0f64, 0.0..1.0f64), 1..6)) {
            let views: Vec<(bool, Vec<f64>, Vec<f64>)> = vals.iter().map(|v| (v.0, vec![v.2], vec![v.3, v.2, v.3])).collect();
            let e = enc(&views);
            let w: Vec<f64> = vals.iter().map(|v| v.1).collect();
            let b = blend_features(&w, &e).unwrap();
            let vis: Vec<&(bool, f64, f64, f64)> = vals.iter().filter(|v| v.0).collect();
            if vis.is_empty() {
                prop_assert!(b.masked);
            } else {
                let lo = vis.iter().map(|v| v.2).fold(f64::INFINITY, f64::min);
                let hi = vis.iter().map(|v| v.2).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(b.joint[0] >= lo - 1e-12 && b.joint[0] <= hi + 1e-12);
                let lo = vis.iter().map(|v| v.3).fold(f64::INFINITY, f64::min);
                let hi = vis.iter().map(|v| v.3).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(b.rays[0] >= lo - 1e-12 && b.rays[0] <= hi + 1e-12);
            }
        }
    }
}
