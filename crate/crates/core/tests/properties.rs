use std::f64::consts::PI;

use borfem::excitation::{dipole_moment, incident_field, DipoleSource};
use borfem::geometry::{build_cylinder_profile, triangulate, DomainSpec, Region};
use borfem::materials::{ColeColeParams, ColeColeTerm};
use borfem::scenario::{calibrate, empirical_pdf, parse_dataset, write_dataset, MicroMovementGrid, RssiRecord};
use borfem::validation::zero_contrast;
use borfem::C64;
use proptest::prelude::*;

const F: f64 = 2.43e9;

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
}

proptest! {
    #[test]
    fn moment_scales_with_root_power(p in 1e-6f64..10.0, s in 0.01f64..100.0, f in 1e8f64..1e10) {
        let ratio = dipole_moment(s * p, f) / dipole_moment(p, f);
        prop_assert!((ratio - s.sqrt()).abs() <= 1e-12 * s.sqrt());
    }

    #[test]
    fn pec_ground_has_no_tangential_field(
        rho in 0.0f64..5.0, phi in -PI..PI, h in 0.02f64..3.0,
        obs_rho in 0.0f64..6.0, obs_phi in -PI..PI,
    ) {
        let src = DipoleSource::new([rho, phi, h], 1e-3, C64::new(1.0, 0.0), F).unwrap();
        let e = incident_field([obs_rho, obs_phi, 0.0], &src).unwrap();
        let total = norm(&e);
        prop_assume!(total > 0.0);
        prop_assert!(e[0].norm() <= 1e-10 * total && e[1].norm() <= 1e-10 * total);
    }

    #[test]
    fn incident_field_is_mirror_symmetric(
        rho in 0.0f64..3.0, h in 0.05f64..2.0, gamma in 0.0f64..1.0,
        obs_rho in 0.01f64..4.0, obs_phi in 0.01f64..3.1, z in 0.0f64..2.5,
    ) {
        let src = DipoleSource::new([rho, 0.0, h], 1e-3, C64::new(gamma, 0.0), F).unwrap();
        let a = incident_field([obs_rho, obs_phi, z], &src);
        prop_assume!(a.is_ok());
        let a = a.unwrap();
        let b = incident_field([obs_rho, -obs_phi, z], &src).unwrap();
        let scale = norm(&a);
        prop_assert!((a[0] - b[0]).norm() <= 1e-12 * scale);
        prop_assert!((a[2] - b[2]).norm() <= 1e-12 * scale);
        prop_assert!((a[1] + b[1]).norm() <= 1e-12 * scale);
    }

    #[test]
    fn calibration_recovers_scale_and_keeps_ranking(
        sim in prop::collection::vec(1e-12f64..1e-3, 2..20), k in 1e-3f64..1e3,
    ) {
        let reference: Vec<f64> = sim.iter().map(|v| k * v).collect();
        let f = calibrate(1, &sim, &reference).unwrap();
        prop_assert!((f.alpha - k).abs() <= 1e-12 * k);
        prop_assert_eq!(argmax(&f.apply(&sim)), argmax(&sim));
    }

    #[test]
    fn densities_integrate_to_one(
        values in prop::collection::vec(-80.0f64..20.0, 2..500), width in 0.05f64..5.0,
    ) {
        let pdf = empirical_pdf(&values, width).unwrap();
        prop_assert!((pdf.integral() - 1.0).abs() <= 1e-9);
        prop_assert!(pdf.density.iter().all(|d| *d >= 0.0));
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(pdf.start <= lo && pdf.start + width * pdf.density.len() as f64 >= hi);
    }

    #[test]
    fn dataset_round_trips(
        rows in prop::collection::vec(
            (1u32..20, 1u32..20, prop::option::of(1u32..6), -0.5f64..0.5, -0.5f64..0.5, -120.0f64..0.0, -120.0f64..0.0, any::<bool>()),
            0..30,
        ),
    ) {
        let records: Vec<RssiRecord> = rows
            .into_iter()
            .map(|(tx, rx, pos, dx, dy, rssi, free, near)| RssiRecord {
                tx_id: tx,
                rx_id: rx,
                body_pos_id: pos,
                dx,
                dy,
                rssi_dbm: rssi,
                rssi_free_dbm: free,
                delta_rssi_db: free - rssi,
                flags: if near { "near_field".into() } else { String::new() },
            })
            .collect();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &records).unwrap();
        prop_assert_eq!(parse_dataset(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn micro_offsets_are_centred_and_symmetric(n in 1usize..12, span in 0.0f64..1.0) {
        let offsets = MicroMovementGrid { n, span }.offsets();
        prop_assert_eq!(offsets.len(), n * n);
        for o in &offsets {
            prop_assert!(o[0].abs() <= span / 2.0 + 1e-12 && o[1].abs() <= span / 2.0 + 1e-12);
            let mirrored = offsets.iter().any(|p| (p[0] + o[0]).abs() < 1e-12 && (p[1] - o[1]).abs() < 1e-12);
            prop_assert!(mirrored);
        }
        let sum = offsets.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
        prop_assert!(sum[0].abs() < 1e-9 && sum[1].abs() < 1e-9);
    }

    #[test]
    fn cole_cole_media_are_passive(
        eps_inf in 1.0f64..10.0,
        terms in prop::collection::vec((0.0f64..5000.0, 1e-14f64..1e-3, 0.0f64..0.99), 0..5),
        sigma in 0.0f64..5.0,
        f in 1e6f64..1e11,
    ) {
        let params = ColeColeParams {
            eps_inf,
            terms: terms.into_iter().map(|(delta, tau, alpha)| ColeColeTerm { delta, tau, alpha }).collect(),
            sigma,
        };
        let eps = params.at_omega(2.0 * PI * f);
        prop_assert!(eps.im <= 0.0);
        prop_assert!(eps.re >= eps_inf - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn body_mesh_covers_the_profile(r in 0.05f64..0.2, h in 0.1f64..0.4) {
        let profile = build_cylinder_profile(r, h).unwrap();
        let spec = DomainSpec::around(profile.clone(), F, C64::new(52.7, -12.76), true).unwrap();
        let mesh = triangulate(&spec).unwrap();
        let mut body = 0.0;
        for t in 0..mesh.num_triangles() {
            prop_assert!(mesh.area(t) > 0.0);
            if mesh.region(t) == Region::Body {
                body += mesh.area(t);
            }
        }
        prop_assert!((body - r * h).abs() <= 1e-9 * r * h, "body area {} vs {}", body, r * h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn vacuum_body_never_scatters(rho in 0.5f64..3.0, phi in -PI..PI, z in 0.02f64..1.0, gamma in 0.0f64..1.0) {
        let src = DipoleSource::new([rho, phi, z], 1e-3, C64::new(gamma, 0.0), F).unwrap();
        let report = zero_contrast(&[src], 11, 1.0).unwrap();
        prop_assert!(report.worst() <= 1e-10, "{:?}", report.ratios);
    }
}
