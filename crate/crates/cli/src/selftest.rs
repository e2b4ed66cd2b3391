//! Fast oracle checks of the analytic core.

use srm::kms::{
    kms_matrix, kolmogorov_distance_to_law, r1_map, single_atom_r1_closed_form, SpectrumSpec,
};
use srm::quadrature::AngularQuadrature;
use srm::replica::{solve_replica, ReplicaProblem, ReplicaSystem, SolverOptions};
use srm::scalar_channel::{Prior, ScalarChannel};

use crate::CliError;

type Check = (&'static str, fn() -> Result<f64, String>, f64);

fn closed_form() -> Result<f64, String> {
    let quad = AngularQuadrature::<f64>::default();
    let mut worst: f64 = 0.0;
    for lambda in [0.0, 0.3, 0.6, 0.9] {
        let spec = SpectrumSpec::single(lambda).map_err(|e| e.to_string())?;
        for q in [1e-3, 0.1, 1.0] {
            let got = r1_map(&[q], &spec, 2.0, 0.1, &quad).map_err(|e| e.to_string())?[0];
            worst = worst.max((got - single_atom_r1_closed_form(q, lambda, 2.0, 0.1)).abs());
        }
    }
    Ok(worst)
}

fn gaussian_quadratic() -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for c in [0.3f64, 1.0, 2.0] {
        for s2 in [0.1f64, 1.0] {
            let prob = ReplicaProblem::new(
                SpectrumSpec::single(0.0).map_err(|e| e.to_string())?,
                Prior::Gaussian { rho: 1.0 },
                c,
                s2,
            )
            .map_err(|e| e.to_string())?;
            let got = solve_replica(&prob, &SolverOptions::default())
                .map_err(|e| e.to_string())?
                .global
                .r2[0];
            let b = s2 + c - 1.0;
            let root = (-b + (b * b + 4.0 * s2).sqrt()) / 2.0;
            worst = worst.max((got - root).abs());
        }
    }
    Ok(worst)
}

fn i_mmse() -> Result<f64, String> {
    // d i_RS / d(1/sigma2) = (c/2) ymmse
    let opts = SolverOptions::default();
    let c = 2.0;
    let at = |inv_s2: f64| -> Result<(f64, f64), String> {
        let spec: SpectrumSpec<f64> = "0.9:0.5,0.1:0.5"
            .parse()
            .map_err(|e: srm::Error| e.to_string())?;
        let prob = ReplicaProblem::new(spec, Prior::Rademacher, c, 1.0 / inv_s2)
            .map_err(|e| e.to_string())?;
        let out = solve_replica(&prob, &opts).map_err(|e| e.to_string())?;
        let sys = ReplicaSystem::new(&prob, &opts).map_err(|e| e.to_string())?;
        let y = sys
            .prediction(&out.global)
            .map_err(|e| e.to_string())?
            .ymmse;
        Ok((out.global.i_rs, y))
    };
    let (x, h) = (2.0, 1e-3);
    let fd = (at(x + h)?.0 - at(x - h)?.0) / (2.0 * h);
    let want = 0.5 * c * at(x)?.1;
    Ok(((fd - want) / want).abs())
}

fn scalar_closed_forms() -> Result<f64, String> {
    let ch = ScalarChannel::with_default_rule(Prior::Gaussian { rho: 2.0 });
    let mut worst: f64 = 0.0;
    for r in [0.0f64, 0.5, 3.0] {
        worst = worst.max((ch.mmse(r) - 2.0 / (1.0 + 2.0 * r)).abs());
        worst = worst.max((ch.mutual_info(r) - 0.5 * (1.0 + 2.0 * r).ln()).abs());
    }
    Ok(worst)
}

fn kms_law() -> Result<f64, String> {
    let m = kms_matrix(0.9, 256).map_err(|e| e.to_string())?;
    Ok(kolmogorov_distance_to_law(&m.eigenvalues(), 0.9))
}

pub fn run() -> Result<(), CliError> {
    let checks: [Check; 5] = [
        ("single-atom closed form", closed_form, 1e-8),
        ("gaussian quadratic root", gaussian_quadratic, 1e-10),
        ("I-MMSE identity (relative)", i_mmse, 1e-4),
        ("gaussian channel closed forms", scalar_closed_forms, 1e-12),
        ("KMS eigenvalue law (Kolmogorov)", kms_law, 0.05),
    ];
    let mut failed = 0;
    for (name, check, tol) in checks {
        match check() {
            Ok(err) if err <= tol => println!("PASS {name}: {err:.3e} <= {tol:e}"),
            Ok(err) => {
                failed += 1;
                println!("FAIL {name}: {err:.3e} > {tol:e}");
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!(
            "{failed} self-test checks failed"
        )))
    }
}
