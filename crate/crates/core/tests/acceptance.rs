//! Acceptance gate. Prints one PASS/FAIL line per criterion and a summary.
//!
//! Failures are reported, not raised, so that the workspace test run stays
//! green; set `BORFEM_STRICT=1` to exit non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use borfem::constants::ETA0;
use borfem::excitation::{incident_field, DipoleSource};
use borfem::exterior::{far_field, Kernel};
use borfem::fem::reconstruct_fields;
use borfem::fem::solve::HarmonicSolution;
use borfem::scenario::{calibrate_records, empirical_pdf, write_dataset, Engine, Job, RssiRecord, Scenario};
use borfem::simulation::BodyModel;
use borfem::validation::{cylinder_consistency, mie_sphere, zero_contrast, CylinderCase, MieCase};
use borfem::{Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn zero_contrast_null() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sources = (0..8)
        .map(|_| {
            DipoleSource::new(
                [rng.gen_range(0.5..3.0), rng.gen_range(-PI..PI), rng.gen_range(0.02..1.5)],
                1e-3,
                C64::new(rng.gen_range(0.0..1.0), 0.0),
                2.43e9,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let r = zero_contrast(&sources, 11, 1.0)?;
    let worst = r.worst();
    outcome(
        worst <= 1e-10 && r.elapsed < Duration::from_secs(60),
        format!("worst ratio {worst:.2e} (limit 1e-10) over m 0..11, 8 random sources, {} (limit 60 s)", secs(r.elapsed)),
    )
}

fn mie_oracle() -> Result<Outcome> {
    let r = mie_sphere(&MieCase::default())?;
    outcome(
        r.l2_error <= 0.02 && r.elapsed < Duration::from_secs(300),
        format!(
            "L2 {:.2}% (limit 2%) over 5..175°, {} triangles, {} (limit 300 s)",
            100.0 * r.l2_error,
            r.triangles,
            secs(r.elapsed)
        ),
    )
}

fn equivalent_source_consistency() -> Result<Outcome> {
    let r = cylinder_consistency(&CylinderCase::default())?;
    let full = cylinder_consistency(&CylinderCase {
        kernel: Kernel::Full,
        ..CylinderCase::default()
    })?;
    outcome(
        r.l2_error <= 0.03 && r.elapsed < Duration::from_secs(600),
        format!(
            "L2 {:.2}% (limit 3%) on the ring at ρ = {:.3} m, |E| error {:.2}%, {}; full kernel L2 {:.2}%",
            100.0 * r.l2_error,
            r.ring_radius,
            100.0 * r.magnitude_error,
            secs(r.elapsed),
            100.0 * full.l2_error
        ),
    )
}

/// `Σ |e_m|² + η₀²|h_m|²` along the default equivalent-surface generatrix.
fn boundary_spectrum(model: &BodyModel, sol: &HarmonicSolution, max_harmonic: usize) -> Result<Vec<f64>> {
    let spec = model.default_surface(max_harmonic)?;
    let n = 60;
    let mut energy = vec![0.0; sol.harmonics.len()];
    for i in 0..n {
        let z = spec.z_lo + (spec.z_hi - spec.z_lo) * (i as f64 + 0.5) / n as f64;
        for (m, s) in sol.harmonics_at([spec.radius, z])?.iter().enumerate() {
            energy[m] += s.e.iter().map(|v| v.norm_sqr()).sum::<f64>()
                + ETA0 * ETA0 * s.h.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
    }
    Ok(energy)
}

fn source_at(scn: &Scenario, tx: u32, pos: u32) -> Result<DipoleSource> {
    let a = scn.antenna(tx)?;
    let p = scn.position(pos)?;
    DipoleSource::at_xyz([a.x - p.x, a.y - p.y, a.z], scn.tx_power, scn.gamma(), scn.frequency)
}

struct HumanTiming {
    build: Duration,
    solve: Duration,
    triangles: usize,
}

fn harmonic_convergence(engine: &Engine, build: Duration) -> Result<(Outcome, HumanTiming)> {
    let scn = engine.scenario();
    let model = engine.model();
    let src = source_at(scn, 7, 1)?;
    let t = Instant::now();
    let hi = model.solve(&[src], 11)?.remove(0);
    let solve = t.elapsed();
    let lo = model.solve(&[src], 9)?.remove(0);

    let spec = model.default_surface(11)?;
    let pts: Vec<[f64; 3]> = (0..36)
        .flat_map(|k| {
            let phi = 2.0 * PI * k as f64 / 36.0;
            (0..12).map(move |i| [spec.radius, phi, spec.z_lo + (spec.z_hi - spec.z_lo) * (i as f64 + 0.5) / 12.0])
        })
        .collect();
    let a = reconstruct_fields(&lo, &pts)?;
    let b = reconstruct_fields(&hi, &pts)?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((ea, ha), (eb, hb)) in a.iter().zip(&b) {
        for i in 0..3 {
            num += (ea[i] - eb[i]).norm_sqr() + ETA0 * ETA0 * (ha[i] - hb[i]).norm_sqr();
            den += eb[i].norm_sqr() + ETA0 * ETA0 * hb[i].norm_sqr();
        }
    }
    let change = (num / den).sqrt();
    let e = boundary_spectrum(model, &hi, 11)?;
    let monotone = (4..11).all(|m| e[m + 1] < e[m]);
    let tail: Vec<String> = e[4..].iter().map(|v| format!("{:.1e}", v / e[0])).collect();
    let timing = HumanTiming {
        build,
        solve,
        triangles: model.mesh().num_triangles(),
    };
    Ok((
        Outcome {
            pass: change <= 1e-3 && monotone,
            detail: format!(
                "M 9→11 boundary change {change:.2e} (limit 1e-3), tail m ≥ 4 {} (relative to m = 0: {})",
                if monotone { "decays monotonically" } else { "is not monotone" },
                tail.join(" ")
            ),
        },
        timing,
    ))
}

fn reciprocity(engine: &Engine) -> Result<Outcome> {
    let scn = engine.scenario();
    let pos = 2;
    let mut links: Vec<(u32, u32)> = Vec::new();
    for a in &scn.antennas {
        let Ok(r) = scn.most_shadowed_receiver(a.id, pos) else { continue };
        let key = (a.id.min(r), a.id.max(r));
        if !links.contains(&key) {
            links.push(key);
        }
        if links.len() == 2 {
            break;
        }
    }
    let center = {
        let p = scn.position(pos)?;
        Some([p.x, p.y])
    };
    let jobs: Vec<Job> = links
        .iter()
        .flat_map(|&(a, b)| [Job { tx_id: a, center }, Job { tx_id: b, center }])
        .collect();
    let fields = engine.simulate(&jobs)?;
    let pick = |j: usize, rx: u32| {
        fields[j]
            .as_ref()
            .and_then(|f| f.iter().find(|r| r.rx_id == rx).copied())
            .ok_or_else(|| borfem::Error::Domain(format!("link {}→{rx} was not simulated", jobs[j].tx_id)))
    };
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (i, &(a, b)) in links.iter().enumerate() {
        let ab = pick(2 * i, b)?;
        let ba = pick(2 * i + 1, a)?;
        let rel = (ab.e_z - ba.e_z).norm() / ab.e_z.norm();
        let (sa, sb) = (ab.e_z - ab.incident, ba.e_z - ba.incident);
        worst = worst.max(rel);
        parts.push(format!("{a}↔{b} {:.3}% (scattered part {:.2}%)", 100.0 * rel, 100.0 * (sa - sb).norm() / sa.norm()));
    }
    outcome(
        links.len() == 2 && worst <= 0.02,
        format!("p = {pos}: {} (limit 2%)", parts.join(", ")),
    )
}

fn image_ground_null() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let src = DipoleSource::new(
            [rng.gen_range(0.0..5.0), rng.gen_range(-PI..PI), rng.gen_range(0.02..3.0)],
            1e-3,
            C64::new(1.0, 0.0),
            2.43e9,
        )?;
        let e = incident_field([rng.gen_range(0.0..8.0), rng.gen_range(-PI..PI), 0.0], &src)?;
        worst = worst.max(e[0].norm().hypot(e[1].norm()) / norm(&e));
    }

    let case = CylinderCase::default();
    let (_, surf) = case.surface()?;
    let dipole = case.dipole()?;
    let theta: Vec<f64> = (0..=90).map(|d| (d as f64).to_radians()).collect();
    let mut horizon = 0.0f64;
    for k in 0..8 {
        let phi = 0.1 + 0.4 * k as f64;
        let ff = far_field(&surf, Some(&dipole), case.gamma, &theta, phi)?;
        let scale = ff.e_theta.iter().zip(&ff.e_phi).map(|(a, b)| a.norm().max(b.norm())).fold(0.0, f64::max);
        let last = theta.len() - 1;
        debug_assert!((theta[last] - FRAC_PI_2).abs() < 1e-15);
        horizon = horizon.max(ff.e_phi[last].norm() / scale);
    }
    outcome(
        worst <= 1e-10 && horizon <= 1e-10,
        format!("tangential E on z = 0 {worst:.1e} over 1000 random pairs, horizon E_φ {horizon:.1e} on 8 cuts (limit 1e-10)"),
    )
}

fn cylinder_timing() -> Result<(Duration, usize)> {
    let case = CylinderCase::default();
    let t = Instant::now();
    let model = case.model(None)?;
    model.solve(&[case.dipole()?], 11)?;
    Ok((t.elapsed(), model.mesh().num_triangles()))
}

fn performance(cyl: Result<(Duration, usize)>, human: Option<&HumanTiming>) -> Result<Outcome> {
    let (cyl_time, cyl_tris) = cyl?;
    let Some(h) = human else {
        return outcome(false, format!("cylinder {} ({cyl_tris} triangles); human case did not run", secs(cyl_time)));
    };
    let human_time = h.build + h.solve;
    outcome(
        cyl_time <= Duration::from_secs(60) && human_time <= Duration::from_secs(900),
        format!(
            "cylinder {} (limit 60 s, {cyl_tris} triangles, M = 11), human {} (limit 900 s, {} triangles, build {} + solve {})",
            secs(cyl_time),
            secs(human_time),
            h.triangles,
            secs(h.build),
            secs(h.solve)
        ),
    )
}

fn micro_statistics(engine: &Engine) -> Result<Outcome> {
    let scn = engine.scenario();
    let (tx, pos) = (14, 1);
    let records = engine.micro_sweep(tx, pos, &scn.micro)?;
    let mut per_rx: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.body_pos_id.is_some()) {
        per_rx.entry(r.rx_id).or_default().push(r.delta_rssi_db);
    }
    let mut worst_integral = 0.0f64;
    let mut std = BTreeMap::new();
    for (&rx, deltas) in &per_rx {
        let pdf = empirical_pdf(deltas, 1.0)?;
        worst_integral = worst_integral.max((pdf.integral() - 1.0).abs());
        std.insert(rx, pdf.std_dev);
    }
    let shadowed = scn.most_shadowed_receiver(tx, pos)?;
    let nearest = scn.nearest_receiver(tx)?;
    let (s_sh, s_near) = (std[&shadowed], std[&nearest]);

    let mut calibrated: Vec<RssiRecord> = records.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let reference: BTreeMap<(u32, u32), f64> = records
        .iter()
        .filter(|r| r.body_pos_id == Some(pos) && r.dx == 0.0 && r.dy == 0.0)
        .map(|r| ((r.tx_id, r.rx_id), r.rssi_dbm + rng.gen_range(-6.0..6.0)))
        .collect();
    let factors = calibrate_records(&mut calibrated, &reference, Some(pos))?;
    let kept = records.iter().zip(&calibrated).all(|(a, b)| a.delta_rssi_db.to_bits() == b.delta_rssi_db.to_bits());
    let recomputed = calibrated
        .iter()
        .map(|r| (r.rssi_free_dbm - r.rssi_dbm - r.delta_rssi_db).abs())
        .fold(0.0, f64::max);
    outcome(
        s_sh > s_near && worst_integral <= 1e-9 && kept && recomputed <= 1e-9,
        format!(
            "Tx {tx}, p {pos}, {} offsets: std ΔRSSI {s_sh:.3} dB at shadowed Rx {shadowed} > {s_near:.3} dB at nearest Rx {nearest}; \
             PDF integrals within {worst_integral:.1e} of 1 (limit 1e-9); ΔRSSI {} under α = {:.2} dB (recomputed {recomputed:.1e})",
            scn.micro.offsets().len(),
            if kept { "unchanged bit for bit" } else { "changed" },
            factors.first().map_or(0.0, |f| f.db())
        ),
    )
}

fn determinism() -> Result<Outcome> {
    let mut scn = Scenario::table1();
    scn.solver.mesh_scale = 2.0;
    let t = Instant::now();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let records = Engine::new(scn.clone())?.dataset()?;
        let mut buf = Vec::new();
        write_dataset(&mut buf, &records)?;
        outputs.push((records.len(), buf));
    }
    let same = outputs[0].1 == outputs[1].1;
    outcome(
        same && outputs[0].0 > 0,
        format!(
            "two full Table I runs (mesh scale 2) give {} CSV files, {} rows, {} bytes, {}",
            if same { "byte-identical" } else { "different" },
            outputs[0].0,
            outputs[0].1.len(),
            secs(t.elapsed())
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Result<Outcome>)> = Vec::new();
    let mut report = |id: u32, name: &'static str, r: Result<Outcome>| {
        let line = match &r {
            Ok(o) => format!("{} {id} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => format!("FAIL {id} {name}: error: {e}"),
        };
        println!("{line}");
        results.push((id, name, r));
    };

    report(1, "zero-contrast null", zero_contrast_null());
    report(2, "Mie sphere", mie_oracle());
    report(3, "equivalent-source consistency", equivalent_source_consistency());
    let cyl = cylinder_timing();

    let scn = Scenario::table1();
    let t = Instant::now();
    let mut human = None;
    match Engine::new(scn) {
        Ok(engine) => {
            let build = t.elapsed();
            match harmonic_convergence(&engine, build) {
                Ok((o, timing)) => {
                    report(4, "harmonic convergence", Ok(o));
                    human = Some(timing);
                }
                Err(e) => report(4, "harmonic convergence", Err(e)),
            }
            report(5, "reciprocity", reciprocity(&engine));
            report(6, "image-ground null", image_ground_null());
            report(7, "performance", performance(cyl, human.as_ref()));
            report(8, "micro-movement statistics", micro_statistics(&engine));
        }
        Err(e) => {
            let msg = e.to_string();
            for (id, name) in [(4, "harmonic convergence"), (5, "reciprocity"), (8, "micro-movement statistics")] {
                report(id, name, Err(borfem::Error::Domain(format!("human model: {msg}"))));
            }
            report(6, "image-ground null", image_ground_null());
            report(7, "performance", performance(cyl, None));
        }
    }
    report(9, "dataset determinism", determinism());

    results.sort_by_key(|r| r.0);
    let passed = results.iter().filter(|r| matches!(&r.2, Ok(o) if o.pass)).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    for (id, name, r) in &results {
        if !matches!(r, Ok(o) if o.pass) {
            println!("  failing: {id} {name}");
        }
    }
    if passed < results.len() && std::env::var_os("BORFEM_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
