//! Executes a validated [`RunConfig`] and collects everything that gets
//! written out.

use std::collections::BTreeMap;
use std::time::Instant;

use ergodic_hjb::bounds::{certify, Certificate};
use ergodic_hjb::calculus::min_second_difference;
use ergodic_hjb::direct::{
    eikonal_residual, lipschitz_extension_residual, BoundConstants, BranchResiduals,
};
use ergodic_hjb::discount::{run_vanishing_discount, solve_discounted, DeltaStep, EigenSolution};
use ergodic_hjb::penalty::PenaltyLevel;
use ergodic_hjb::radial::{radial_eigen, radial_profile, RadialEigen};
use ergodic_hjb::simulate::{policy_sweep, simulate_ball_policy, sweep_argmin, ErgodicEstimate};
use ergodic_hjb::{CostFunction, Error, Grid, ScalarField};
use serde::Serialize;

use crate::config::{RunConfig, Subcommand};
use crate::table::Table;

/// A `λ` value with the method that produced it and its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub method: String,
    pub lambda: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenReport {
    pub backend: String,
    pub lambda_star: f64,
    pub richardson: f64,
    pub free_boundary_radius: f64,
    pub non_cauchy: bool,
    pub history: Vec<DeltaStep>,
    pub residuals: BranchResiduals,
    pub constants: BoundConstants,
    pub max_gradient: f64,
    pub min_second_difference: f64,
    pub lipschitz_extension_residual: f64,
    pub subsolution_gap: f64,
    pub penalty_levels: Option<Vec<PenaltyLevel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialReport {
    pub n: usize,
    pub lambda: f64,
    pub r0: f64,
    pub pasting_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub radius: f64,
    pub estimate: ErgodicEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// The machine-readable result document. Timings live elsewhere so that
/// identical runs produce identical documents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub version: String,
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    pub estimates: Vec<Estimate>,
    pub certificate: Option<Certificate>,
    pub radial: Option<RadialReport>,
    pub eigen: Vec<EigenReport>,
    pub backend_sup_difference: Option<f64>,
    pub simulation: Option<SimReport>,
    pub sweep: Vec<SimReport>,
    pub sweep_argmin: Option<f64>,
    pub criteria: Vec<Criterion>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    SolverFailure,
    AcceptanceFailure,
}

pub struct Outcome {
    pub result: RunResult,
    pub tables: Vec<Table>,
    pub timings: Vec<(String, f64)>,
    pub summary: Vec<String>,
    pub status: Status,
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    f: CostFunction,
    out: Outcome,
}

fn field_table(name: &str, u: &ScalarField, value: &str) -> Table {
    let grid = u.grid();
    let mut header = vec!["x"];
    if grid.dim() == 2 {
        header.push("y");
    }
    header.push(value);
    let mut t = Table::new(name, &header);
    for k in 0..grid.len() {
        let p = grid.point(k);
        let mut row = p[..grid.dim()].to_vec();
        row.push(u.get(k));
        t.push(row);
    }
    t
}

/// Executes the pipeline of `cfg.subcommand`. The config must already have
/// passed [`RunConfig::validate`].
pub fn execute(cfg: &RunConfig) -> Outcome {
    let f = cfg.cost_function().expect("validated config");
    let mut r = Runner {
        cfg,
        f,
        out: Outcome {
            result: RunResult {
                version: env!("CARGO_PKG_VERSION").to_string(),
                subcommand: cfg.subcommand.to_string(),
                config: cfg.entries(),
                estimates: vec![],
                certificate: None,
                radial: None,
                eigen: vec![],
                backend_sup_difference: None,
                simulation: None,
                sweep: vec![],
                sweep_argmin: None,
                criteria: vec![],
                error: None,
            },
            tables: vec![],
            timings: vec![],
            summary: vec![],
            status: Status::Success,
        },
    };
    if let Err(e) = r.dispatch() {
        r.out.result.error = Some(e.to_string());
        r.out.summary.push(format!("error: {e}"));
        r.out.status = Status::SolverFailure;
    } else if r.out.result.criteria.iter().any(|c| !c.passed) {
        r.out.status = Status::AcceptanceFailure;
    }
    r.out
}

impl Runner<'_> {
    fn timed<T>(&mut self, stage: &str, job: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let v = job(self);
        self.out
            .timings
            .push((stage.to_string(), start.elapsed().as_secs_f64()));
        v
    }

    fn estimate(&mut self, method: &str, lambda: f64, tolerance: f64) {
        self.out.summary.push(format!(
            "lambda[{method}] = {lambda:.6} (tolerance {tolerance:.1e})"
        ));
        self.out.result.estimates.push(Estimate {
            method: method.to_string(),
            lambda,
            tolerance,
        });
    }

    fn criterion(&mut self, name: &str, passed: bool, detail: String) {
        let mark = if passed { "PASS" } else { "FAIL" };
        self.out.summary.push(format!("{mark} {name}: {detail}"));
        self.out.result.criteria.push(Criterion {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    fn dispatch(&mut self) -> Result<(), Error> {
        match self.cfg.subcommand {
            Subcommand::Radial => {
                self.radial()?;
            }
            Subcommand::Eigen => {
                let eigen = self.eigen(&self.cfg.backend.clone())?;
                if let Err(e) = self.certificate(&eigen) {
                    self.out
                        .summary
                        .push(format!("certificate unavailable: {e}"));
                }
            }
            Subcommand::Bounds => {
                let eigen = self.eigen(&self.cfg.backend.clone())?;
                self.certificate(&eigen)?;
            }
            Subcommand::Simulate => {
                let radius = match self.cfg.sim.radius {
                    Some(r) => r,
                    None => self.radial()?.r0,
                };
                self.simulate(radius)?;
            }
            Subcommand::Sweep => {
                self.sweep()?;
            }
            Subcommand::Crosscheck => self.crosscheck()?,
        }
        Ok(())
    }

    fn radial(&mut self) -> Result<RadialEigen, Error> {
        let n = self.f.dim();
        let offset = self.f.offset();
        let (eig, profile) = self.timed("radial", |s| -> Result<_, Error> {
            let f0 = s.f.radial().expect("validated radial cost");
            let eig = radial_eigen(&f0, n)?;
            let samples = 2001;
            let r_max = 2.0 * eig.r0 + 2.0;
            let r: Vec<f64> = (0..samples)
                .map(|i| r_max * i as f64 / (samples - 1) as f64)
                .collect();
            Ok((eig, radial_profile(&f0, n, eig.lambda, eig.r0, &r)?))
        })?;
        let mut t = Table::new("profile", &["r", "dphi", "d2phi", "phi"]);
        for i in 0..profile.r.len() {
            t.push(vec![
                profile.r[i],
                profile.dphi[i],
                profile.d2phi[i],
                profile.phi[i],
            ]);
        }
        self.out.tables.push(t);
        self.estimate(
            "radial_oracle",
            eig.lambda - offset,
            1e-10 * eig.lambda.abs().max(1.0),
        );
        self.out
            .summary
            .push(format!("r0[radial_oracle] = {:.6}", eig.r0));
        self.out.result.radial = Some(RadialReport {
            n,
            lambda: eig.lambda - offset,
            r0: eig.r0,
            pasting_defect: profile.pasting_defect,
        });
        Ok(eig)
    }

    fn eigen(&mut self, backend: &str) -> Result<EigenSolution, Error> {
        let grid = self.cfg.grid().expect("validated grid");
        let dc = self
            .cfg
            .discount_config(backend)
            .expect("validated discount config");
        let eigen = self.timed(&format!("eigen_{backend}"), |s| {
            run_vanishing_discount(&s.f, &grid, &dc)
        })?;
        let offset = self.f.offset();
        let tol = dc.lambda_rel_tol * (1.0 + eigen.lambda_star.abs());
        self.estimate(
            &format!("vanishing_discount/{backend}"),
            eigen.lambda_star - offset,
            tol,
        );
        self.estimate(
            &format!("richardson/{backend}"),
            eigen.richardson - offset,
            tol,
        );
        self.out.summary.push(format!(
            "free_boundary_radius[{backend}] = {:.6}",
            eigen.free_boundary_radius()
        ));
        let max_gradient = 1.0 + eikonal_residual(&eigen.u_star).max();
        self.out.result.eigen.push(EigenReport {
            backend: backend.to_string(),
            lambda_star: eigen.lambda_star - offset,
            richardson: eigen.richardson - offset,
            free_boundary_radius: eigen.free_boundary_radius(),
            non_cauchy: eigen.non_cauchy,
            history: eigen.history.clone(),
            residuals: eigen.last.residuals,
            constants: eigen.last.constants,
            max_gradient,
            min_second_difference: min_second_difference(&eigen.u_star),
            lipschitz_extension_residual: lipschitz_extension_residual(&eigen.last),
            subsolution_gap: eigen.last.subsolution_gap(),
            penalty_levels: eigen.penalty.as_ref().map(|p| p.levels.clone()),
        });
        let fb = ScalarField::new(
            grid,
            eigen
                .free_boundary
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        )?;
        let suffix = if self.cfg.subcommand == Subcommand::Crosscheck {
            format!("_{backend}")
        } else {
            String::new()
        };
        self.out.tables.push(field_table(
            &format!("u_star{suffix}"),
            &eigen.u_star,
            "u_star",
        ));
        self.out.tables.push(field_table(
            &format!("free_boundary{suffix}"),
            &fb,
            "inside",
        ));
        let mut h = Table::new(
            &format!("history{suffix}"),
            &["delta", "iterations", "lambda"],
        );
        for s in &eigen.history {
            h.push(vec![s.delta, s.iterations as f64, s.lambda - offset]);
        }
        self.out.tables.push(h);
        Ok(eigen)
    }

    fn certificate(&mut self, eigen: &EigenSolution) -> Result<Certificate, Error> {
        let bc = self
            .cfg
            .bounds_config(eigen.grid())
            .expect("validated bounds config");
        let mut cert = self.timed("bounds", |s| certify(eigen, &s.f, &bc))?;
        let offset = self.f.offset();
        cert.lambda_minus -= offset;
        cert.lambda_plus -= offset;
        self.out.summary.push(format!(
            "certificate: {:.6} <= lambda <= {:.6} (gap {:.3e})",
            cert.lambda_minus, cert.lambda_plus, cert.gap
        ));
        self.out.result.certificate = Some(cert.clone());
        Ok(cert)
    }

    fn simulate(&mut self, radius: f64) -> Result<ErgodicEstimate, Error> {
        let sc = self.cfg.sim_config(radius).expect("validated sim config");
        let e = self.timed("simulate", |s| simulate_ball_policy(&s.f, &sc))?;
        let offset = self.f.offset();
        self.estimate("monte_carlo", e.mean - offset, 3.0 * e.std_error);
        let mut e_report = e;
        e_report.mean -= offset;
        e_report.running_cost -= offset;
        self.out.result.simulation = Some(SimReport {
            radius,
            estimate: e_report,
        });
        Ok(e)
    }

    fn sweep(&mut self) -> Result<Option<f64>, Error> {
        let sc = self.cfg.sim_config(1.0).expect("validated sim config");
        let radii = self.cfg.sim.radii.clone();
        let sweep = self.timed("sweep", |s| policy_sweep(&s.f, &radii, &sc))?;
        let offset = self.f.offset();
        let mut t = Table::new(
            "sweep",
            &["radius", "running_cost", "local_time", "std_error", "mean"],
        );
        for (r, e) in &sweep {
            t.push(vec![
                *r,
                e.running_cost - offset,
                e.local_time,
                e.std_error,
                e.mean - offset,
            ]);
            self.out.result.sweep.push(SimReport {
                radius: *r,
                estimate: ErgodicEstimate {
                    mean: e.mean - offset,
                    running_cost: e.running_cost - offset,
                    ..*e
                },
            });
        }
        self.out.tables.push(t);
        let best = sweep_argmin(&sweep);
        if let Some(b) = best {
            let e = sweep
                .iter()
                .find(|s| s.0 == b)
                .expect("argmin is an entry")
                .1;
            self.estimate("policy_sweep_min", e.mean - offset, 3.0 * e.std_error);
            self.out.summary.push(format!("sweep argmin radius = {b}"));
        }
        self.out.result.sweep_argmin = best;
        Ok(best)
    }

    fn crosscheck(&mut self) -> Result<(), Error> {
        let cc = self.cfg.crosscheck.clone();
        let offset = self.f.offset();
        let oracle = self.radial()?;
        let lambda = oracle.lambda - offset;
        let defect = self
            .out
            .result
            .radial
            .as_ref()
            .map_or(f64::NAN, |r| r.pasting_defect);
        self.criterion(
            "radial-oracle",
            defect <= 1e-8,
            format!(
                "lambda {lambda:.9}, r0 {:.9}, pasting defect {defect:.1e}",
                oracle.r0
            ),
        );

        let direct = self.eigen("direct")?;
        let penalty = self.eigen("penalty")?;
        let grid = *direct.grid();
        let h = grid.spacing();
        for (label, e) in [("direct", &direct), ("penalty", &penalty)] {
            let err = (e.lambda_star - offset - lambda).abs();
            self.criterion(
                &format!("oracle-agreement/{label}"),
                err <= cc.lambda_tol,
                format!(
                    "|lambda* - lambda_oracle| = {err:.3e} (tolerance {:.1e})",
                    cc.lambda_tol
                ),
            );
        }

        let matched = self.matched_difference(&grid)?;
        let u_star = direct.u_star.sup_distance(&penalty.u_star)?;
        let lambda_gap = (direct.lambda_star - penalty.lambda_star).abs();
        self.out.result.backend_sup_difference = Some(matched);
        self.criterion(
            "backend-equivalence",
            matched.max(u_star).max(lambda_gap) <= cc.backend_tol,
            format!(
                "sup |u_1 difference| = {matched:.3e}, sup |u* difference| = {u_star:.3e}, \
                 |lambda* difference| = {lambda_gap:.3e} (tolerance {:.1e})",
                cc.backend_tol
            ),
        );

        let radius = direct.free_boundary_radius();
        let miss = (radius - oracle.r0).abs();
        self.criterion(
            "free-boundary",
            miss <= 2.0 * h + 1e-12,
            format!(
                "radius {radius:.6} vs r0 {:.6} (tolerance 2h = {:.3})",
                oracle.r0,
                2.0 * h
            ),
        );

        let report = self.out.result.eigen[0].clone();
        let grad_ok = report.max_gradient <= 1.0 + 3.0 * h;
        let sub_ok = report.subsolution_gap >= 0.0;
        let lip_ok = report.lipschitz_extension_residual <= 2.0 * h;
        self.criterion(
            "invariants",
            grad_ok && sub_ok && lip_ok,
            format!(
                "max |D_h u*| = {:.6}, subsolution gap {:.3e}, Lipschitz-extension residual {:.3e}",
                report.max_gradient, report.subsolution_gap, report.lipschitz_extension_residual
            ),
        );

        match self.certificate(&direct) {
            Ok(c) => {
                let lam = direct.lambda_star - offset;
                let ok = c.lambda_minus <= lam && lam <= c.lambda_plus && c.gap <= cc.gap_tol;
                self.criterion(
                    "certificate",
                    ok,
                    format!(
                        "{:.6} <= {lam:.6} <= {:.6}, gap {:.3e} (tolerance {:.1e})",
                        c.lambda_minus, c.lambda_plus, c.gap, cc.gap_tol
                    ),
                );
            }
            Err(e) => self.criterion("certificate", false, e.to_string()),
        }

        let e = self.simulate(oracle.r0)?;
        let dev = (e.mean - oracle.lambda).abs();
        let allowed = 3.0 * e.std_error + cc.mc_allowance;
        self.criterion(
            "monte-carlo",
            dev <= allowed,
            format!("|estimate - lambda_oracle| = {dev:.4} (allowed {allowed:.4})"),
        );

        let best = self.sweep()?;
        let nearest = self
            .cfg
            .sim
            .radii
            .iter()
            .copied()
            .min_by(|a, b| (a - oracle.r0).abs().total_cmp(&(b - oracle.r0).abs()));
        self.criterion(
            "policy-sweep",
            best.is_some() && best == nearest,
            format!("argmin {best:?}, entry nearest r0 {nearest:?}"),
        );
        Ok(())
    }

    /// Sup-norm distance of the two backends' discounted solutions at
    /// `δ = 1`.
    fn matched_difference(&mut self, grid: &Grid) -> Result<f64, Error> {
        let direct = self
            .cfg
            .discount_config("direct")
            .expect("validated discount config");
        let penalty = self
            .cfg
            .discount_config("penalty")
            .expect("validated discount config");
        let (a, b) = self.timed("matched_delta", |s| -> Result<_, Error> {
            Ok((
                solve_discounted(&s.f, 1.0, grid, &direct)?,
                solve_discounted(&s.f, 1.0, grid, &penalty)?,
            ))
        })?;
        a.u.sup_distance(&b.u)
    }
}
