//! Inversion plans: construction, verification, rescaling, local-to-global extension and stability under ε-isometries.

mod builders;
mod extend;
mod isometry;
mod plan;

pub use builders::{
    build_plan_cone_apex, build_plan_convex_body, build_plan_heisenberg, build_plan_sphere, convex_inversion_point,
    BuildContext, BuilderRegistry, ExclusionConfig, PlanBuilder,
};
pub use extend::extend_local_plan;
pub use isometry::{
    check_eps_isometry, push_plan, EpsIsometry, EpsIsometrySpec, IsometryReport, MapRegistry, PointMap, PushReport,
    TableMap,
};
pub use plan::{
    hz_defect, rescale_plan, uniformity_constant, verify_plan, InversionPlan, PlanDiagnostics, PlanRecord, RescaleReport,
    VerifyConfig,
};

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::euclid::{sample_body, ConvexBody, EuclideanSpace};
    use crate::heisenberg::{sample_haar_box, HeisPoint, HeisenbergSpace};
    use crate::measure::{Coupling, DiscreteMeasure, Pair, Point, SpaceTag};
    use crate::modelspaces::{sample_cone, sample_sphere, ConeSpace, Sphere2, SpherePoint};

    fn square_body() -> ConvexBody {
        ConvexBody::cube(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    fn square(n: usize, seed: u64) -> Arc<DiscreteMeasure> {
        Arc::new(sample_body(&square_body(), n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap())
    }

    #[test]
    fn radial_formula_by_hand() {
        let y = convex_inversion_point(&square_body(), &[0.25, 0.5], &[0.75, 0.5]);
        assert!((y[0] - 1.0 / 12.0).abs() < 1e-15 && (y[1] - 0.5).abs() < 1e-15);
        let ball = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let y = convex_inversion_point(&ball, &[0.0, 0.0], &[0.3, -0.4]);
        assert!((y[0] + 0.3).abs() < 1e-15 && (y[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn convex_plan_verifies() {
        let mu = square(10_000, 1);
        let z = Point::euclid(&[0.4, 0.55]);
        let plan = build_plan_convex_body(&square_body(), &z, mu.clone()).unwrap();
        let space = EuclideanSpace::new(2);
        let cfg = VerifyConfig { hz_tol: 1e-9, ..VerifyConfig::default() };
        let d = verify_plan(&plan, &mu, &space, &cfg).unwrap();
        assert!(d.pass, "{d:?}");
        assert_eq!(d.marginal_defect, 0.0);
        assert!(d.uniformity_constant.is_finite());
        assert!(build_plan_convex_body(&square_body(), &Point::euclid(&[0.0, 0.5]), mu).is_err());
    }

    #[test]
    fn symmetric_ball_plan_has_unit_constant() {
        let ball = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let coords = ball.sample_uniform(2000, &mut rng);
        let mirrored: Vec<Vec<f64>> = coords.iter().map(|c| vec![-c[0], -c[1]]).collect();
        let all: Vec<Vec<f64>> = coords.into_iter().chain(mirrored).collect();
        let mu = Arc::new(DiscreteMeasure::uniform(SpaceTag::Euclid(2), all, 1.0 / 4000.0, None).unwrap());
        let plan = build_plan_convex_body(&ball, &Point::euclid(&[0.0, 0.0]), mu.clone()).unwrap();
        assert!((uniformity_constant(&plan, &mu, 0.25).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn planted_defects_fail() {
        let mu = square(2000, 3);
        let space = EuclideanSpace::new(2);
        let z = Point::euclid(&[0.5, 0.5]);
        let dirac = InversionPlan::new(z.clone(), Coupling::product_with_dirac(mu.clone(), z.clone()).unwrap(), 0.0).unwrap();
        let d = verify_plan(&dirac, &mu, &space, &VerifyConfig::default()).unwrap();
        assert!(!d.ac_ok && d.ac_scores[1] > 0.9 * mu.total_mass());
        assert!(uniformity_constant(&dirac, &mu, 0.1).unwrap() > 50.0);

        let base = build_plan_convex_body(&square_body(), &z, mu.clone()).unwrap();
        let mut targets = base.coupling.targets().to_vec();
        let x = mu.coords(0).to_vec();
        let dz = ((x[0] - 0.5f64).powi(2) + (x[1] - 0.5f64).powi(2)).sqrt();
        // pairing x with itself misses the geodesic through z by 2·d(x, z)
        targets[0] = Point::euclid(&[x[0], x[1]]);
        let bad = InversionPlan::new(z.clone(), Coupling::new(mu.clone(), targets, base.coupling.pairs().to_vec()).unwrap(), 0.0).unwrap();
        let d = verify_plan(&bad, &mu, &space, &VerifyConfig { hz_tol: 1e-6, ..VerifyConfig::default() }).unwrap();
        assert!((d.hz_defect - 2.0 * dz).abs() < 1e-12 && !d.hz_ok && d.hz_worst_pair == Some(0));
    }

    #[test]
    fn heisenberg_plan_verifies_and_translates() {
        let mu = Arc::new(sample_haar_box(10_000, &[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0], &mut ChaCha8Rng::seed_from_u64(4)).unwrap());
        let space = HeisenbergSpace::new(1);
        let plan = build_plan_heisenberg(&HeisPoint::origin(1), mu.clone(), &ExclusionConfig::default()).unwrap();
        let cfg = VerifyConfig { cell_size: 0.25, ..VerifyConfig::default() };
        let d = verify_plan(&plan, &mu, &space, &cfg).unwrap();
        assert!(d.marginal_ok && d.hz_ok, "{d:?}");
        assert!(d.excluded_mass < 0.01 * mu.total_mass());

        let z = HeisPoint::new(vec![num_complex::Complex64::new(0.2, -0.1)], 0.3);
        let moved = crate::measure::pushforward(&mu, |p| {
            crate::heisenberg::group_mul(&z, &HeisPoint::from_point(p).unwrap()).to_point()
        })
        .unwrap();
        let moved = Arc::new(moved);
        let plan_z = build_plan_heisenberg(&z, moved.clone(), &ExclusionConfig::default()).unwrap();
        let (hz0, _) = hz_defect(&plan.coupling, &[0.0; 3], &space);
        let (hzz, _) = hz_defect(&plan_z.coupling, &z.to_coords(), &space);
        assert!(hz0 < 1e-7 && hzz < 1e-7);
        assert!((plan.excluded_mass - plan_z.excluded_mass).abs() <= 1e-12 + mu.weight(0));
    }

    #[test]
    fn heisenberg_exclusion_cap() {
        let coords = vec![vec![0.0, 0.0, 0.5], vec![0.5, 0.5, 0.0005], vec![0.3, 0.2, 0.4]];
        let mu = Arc::new(DiscreteMeasure::uniform(SpaceTag::Heisenberg(1), coords, 1.0, None).unwrap());
        let err = build_plan_heisenberg(&HeisPoint::origin(1), mu.clone(), &ExclusionConfig::default()).unwrap_err();
        assert!(matches!(err, crate::Error::ExcessiveExclusion { .. }));
        let loose = ExclusionConfig { max_fraction: 0.9, ..ExclusionConfig::default() };
        let plan = build_plan_heisenberg(&HeisPoint::origin(1), mu, &loose).unwrap();
        assert_eq!(plan.excluded_mass, 2.0);
    }

    #[test]
    fn sphere_plan_verifies() {
        let mu = Arc::new(sample_sphere(40_000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap());
        let plan = build_plan_sphere(&SpherePoint::north(), mu.clone(), &ExclusionConfig::default()).unwrap();
        let cfg = VerifyConfig { cell_size: 0.4, hz_tol: 1e-12, ..VerifyConfig::default() };
        let d = verify_plan(&plan, &mu, &Sphere2, &cfg).unwrap();
        assert!(d.pass, "{d:?}");
        // the image density is 4·cos of the distance to the pole
        assert!(d.uniformity_constant > 3.0 && d.uniformity_constant < 6.0, "{d:?}");
        assert!(plan.excluded_mass < 1e-3 * mu.total_mass());
    }

    #[test]
    fn cone_apex_is_not_an_inversion_point() {
        let theta = std::f64::consts::PI;
        let mu = Arc::new(sample_cone(theta, 1.0, 4000, &mut ChaCha8Rng::seed_from_u64(6)).unwrap());
        let plan = build_plan_cone_apex(mu.clone()).unwrap();
        let d = verify_plan(&plan, &mu, &ConeSpace::new(theta).unwrap(), &VerifyConfig::default()).unwrap();
        assert!(d.hz_ok && d.marginal_ok && !d.ac_ok && !d.pass);
    }

    #[test]
    fn rescaling_examples() {
        let mu = square(20_000, 7);
        let z = Point::euclid(&[0.5, 0.5]);
        let plan = build_plan_convex_body(&square_body(), &z, mu.clone()).unwrap();
        let (same, rep) = rescale_plan(&plan, |_| 1.0).unwrap();
        assert_eq!(same.coupling.pairs(), plan.coupling.pairs());
        assert_eq!(rep.zero_set_mass, 0.0);
        let (double, _) = rescale_plan(&plan, |_| 2.0).unwrap();
        assert!(double.coupling.pairs().iter().zip(plan.coupling.pairs()).all(|(a, b)| a.weight == 2.0 * b.weight));
        let bump = |p: &Point| if p.coords[0] < 0.5 { 3.0 } else { 0.5 };
        let (bumped, _) = rescale_plan(&plan, bump).unwrap();
        let first = bumped.coupling.first_marginal_weights();
        for (i, w) in first.iter().enumerate() {
            assert_eq!(*w, bump(&mu.particles()[i].point) * mu.weight(i));
        }
        let cfg = VerifyConfig { cell_size: 0.2, ..VerifyConfig::default() };
        let d = verify_plan(&bumped, bumped.source(), &EuclideanSpace::new(2), &cfg).unwrap();
        // the reflection swaps the two halves, so the density ratio is 6 there
        assert!(d.pass && (d.uniformity_constant - 6.0).abs() < 1.5, "{d:?}");
        assert!(rescale_plan(&plan, |_| -1.0).is_err());
    }

    #[test]
    fn extension_from_a_small_ball() {
        let ball = ConvexBody::ball(vec![0.0, 0.0], 1.0).unwrap();
        let mu = sample_body(&ball, 8000, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let z = Point::euclid(&[0.0, 0.0]);
        let r = 0.25;
        let local_mu = Arc::new(mu.restrict(|p| (p.coords[0].powi(2) + p.coords[1].powi(2)).sqrt() < r));
        let local = build_plan_convex_body(&ball, &z, local_mu).unwrap();
        let full = extend_local_plan(&ball, &z, &local, &mu, r, None).unwrap();
        assert_eq!(full.source().len(), mu.len());
        for (a, b) in local.coupling.pairs().iter().zip(full.coupling.pairs()) {
            assert_eq!(local.source().coords(a.source), full.source().coords(b.source));
            assert_eq!(local.coupling.targets()[a.target], full.coupling.targets()[b.target]);
            assert_eq!(a.weight, b.weight);
        }
        let d = verify_plan(&full, &mu, &EuclideanSpace::new(2), &VerifyConfig { hz_tol: 1e-9, cell_size: 0.2, ..VerifyConfig::default() }).unwrap();
        assert!(d.marginal_ok && d.hz_ok, "{d:?}");
        let partial = extend_local_plan(&ball, &z, &local, &mu, r, Some(1)).unwrap();
        let expect = mu.restrict(|p| (p.coords[0].powi(2) + p.coords[1].powi(2)).sqrt() < 2.0 * r);
        assert_eq!(partial.source().len(), expect.len());
        assert_eq!(partial.coupling.first_marginal_weights(), expect.weights());
    }

    #[test]
    fn isometry_examples() {
        let mu = square(1500, 9);
        let space = EuclideanSpace::new(2);
        let registry = MapRegistry::builtin();
        let id = EpsIsometry::new(Arc::from(registry.parse("identity").unwrap()), 0.0, 2.0, vec![0.5, 0.5]).unwrap();
        let rep = check_eps_isometry(&id, &mu, &mu, &space, &space, 1500).unwrap();
        assert!(rep.pass && rep.distortion == 0.0 && rep.surjectivity_defect == 0.0 && rep.bl_proxy == Some(0.0));

        let h = 0.05;
        let snap = EpsIsometry::new(Arc::from(registry.parse(&format!("snap:{h}")).unwrap()), 2.0 * h * 2f64.sqrt(), 2.0, vec![0.5, 0.5]).unwrap();
        let snapped = crate::measure::pushforward(&mu, |p| Point::euclid(&snap.map.apply(&p.coords).unwrap())).unwrap();
        let rep = check_eps_isometry(&snap, &mu, &snapped, &space, &space, 1500).unwrap();
        assert!(rep.distortion <= h * 2f64.sqrt() + 1e-12 && rep.pass, "{rep:?}");

        let rot = EpsIsometry::new(Arc::from(registry.parse("rotate:0.7").unwrap()), 1e-12, 2.0, vec![0.0, 0.0]).unwrap();
        let rotated = crate::measure::pushforward(&mu, |p| Point::euclid(&rot.map.apply(&p.coords).unwrap())).unwrap();
        let rep = check_eps_isometry(&rot, &mu, &rotated, &space, &space, 500).unwrap();
        assert!(rep.distortion < 1e-12 && rep.bl_proxy.unwrap() < 1e-12, "{rep:?}");
        assert!(registry.parse("snap").is_err() && registry.parse("warp:1").is_err());
    }

    #[test]
    fn pushing_plans() {
        let mu = square(4000, 10);
        let z = Point::euclid(&[0.4, 0.55]);
        let plan = build_plan_convex_body(&square_body(), &z, mu).unwrap();
        let space = EuclideanSpace::new(2);
        let registry = MapRegistry::builtin();
        let id = EpsIsometry::new(Arc::from(registry.parse("identity").unwrap()), 0.0, 2.0, vec![0.5, 0.5]).unwrap();
        let same = push_plan(&plan, &id, &space, &space, 0.1).unwrap();
        assert_eq!(same.pushed.coupling.targets(), plan.coupling.targets());
        assert!(same.bound_holds);

        let h = 0.01;
        let snap = EpsIsometry::new(Arc::from(registry.parse(&format!("snap:{h}")).unwrap()), h * 2f64.sqrt(), 2.0, vec![0.5, 0.5]).unwrap();
        let pushed = push_plan(&plan, &snap, &space, &space, 0.1).unwrap();
        assert!(pushed.bound_holds && pushed.hz_defect <= 4.0 * 2.0 * h * 2f64.sqrt());

        let half = EpsIsometry::new(Arc::from(registry.parse("scale:0.5").unwrap()), 1.0, 2.0, vec![0.0, 0.0]).unwrap();
        let p = push_plan(&plan, &half, &space, &space, 0.05).unwrap();
        assert_eq!(p.pushed.center.coords, vec![0.2, 0.275]);
        assert!((p.hz_defect - p.original_hz_defect / 2.0).abs() < 1e-15);
        let _ = Pair { source: 0, target: 0, weight: 0.0 };
    }

    #[test]
    fn plan_record_round_trip() {
        let mu = square(50, 11);
        let plan = build_plan_convex_body(&square_body(), &Point::euclid(&[0.5, 0.5]), mu).unwrap();
        let text = crate::io::to_string(&PlanRecord::from(&plan)).unwrap();
        let back = InversionPlan::try_from(serde_json::from_str::<PlanRecord>(&text).unwrap()).unwrap();
        assert_eq!(back.coupling.pairs(), plan.coupling.pairs());
        assert_eq!(back.center, plan.center);
        assert_eq!(back.coupling.targets(), plan.coupling.targets());
    }

    #[test]
    fn builder_registry() {
        let r = BuilderRegistry::builtin();
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["cone-apex", "convex", "heisenberg", "sphere"]);
        let ctx = BuildContext { body: Some(square_body()), ..BuildContext::default() };
        let plan = r.get("convex").unwrap().build(&Point::euclid(&[0.5, 0.5]), square(10, 12), &ctx).unwrap();
        assert_eq!(plan.coupling.pairs().len(), 10);
        assert!(r.get("nope").is_err());
    }
}
