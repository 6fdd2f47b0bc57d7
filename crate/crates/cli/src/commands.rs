use std::path::Path;

use anyhow::{bail, Context, Result};
use dstab_core::blockmat::{
    matrix_from_rows, matrix_to_rows, MatrixJson, OrderedIndexSet, Partition, PartitionedMatrix,
};
use dstab_core::dstab::{self, Classification, ProbeConfig, VerdictStatus};
use dstab_core::intctl::{self, GainDesign, GainJson, LtiPlant, PlantJson};
use dstab_core::lyap::NormKind;
use dstab_core::scalingseq::{self, ScalingFamily};
use dstab_core::sim::{self, SimulationConfig};
use dstab_core::Error;
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::exit;
use crate::output::{emit, to_json, ManifestBuilder};
use crate::{
    AnalyzeArgs, DcgainArgs, DecomposeArgs, EpsStarArgs, InheritArgs, NormArg, PerturbArgs,
    ProbeArgs, ProbeFlags, SimulateArgs,
};

fn parse_file<T: DeserializeOwned>(mb: &mut ManifestBuilder, path: &Path) -> Result<T> {
    let text = mb.read(path)?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

fn load_matrix(mb: &mut ManifestBuilder, path: &Path) -> Result<PartitionedMatrix> {
    let j: MatrixJson = parse_file(mb, path)?;
    PartitionedMatrix::try_from(j).with_context(|| format!("invalid matrix in {}", path.display()))
}

fn load_plant(mb: &mut ManifestBuilder, path: &Path) -> Result<LtiPlant> {
    let j: PlantJson = parse_file(mb, path)?;
    LtiPlant::try_from(j).with_context(|| format!("invalid plant in {}", path.display()))
}

fn load_gains(mb: &mut ManifestBuilder, path: &Path, plant: &LtiPlant) -> Result<GainDesign> {
    let j: GainJson = parse_file(mb, path)?;
    let g =
        GainDesign::try_from(j).with_context(|| format!("invalid gains in {}", path.display()))?;
    g.validate(plant)
        .with_context(|| format!("gains in {} do not fit the plant", path.display()))?;
    Ok(g)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WeightFile {
    Partitioned(MatrixJson),
    Rows(Vec<Vec<f64>>),
}

/// `identity` or a JSON matrix file (bare rows or `{"partition", "data"}`).
fn load_weight(mb: &mut ManifestBuilder, spec: &str, n: usize) -> Result<DMatrix<f64>> {
    if spec == "identity" {
        return Ok(DMatrix::identity(n, n));
    }
    let path = Path::new(spec);
    let rows = match parse_file::<WeightFile>(mb, path)? {
        WeightFile::Partitioned(m) => m.data,
        WeightFile::Rows(r) => r,
    };
    let m = matrix_from_rows(&rows)?;
    if m.nrows() != n || m.ncols() != n {
        bail!(
            "{} must be {n}x{n}, got {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        );
    }
    Ok(m)
}

fn probe_config(p: &ProbeFlags, norm: NormKind) -> ProbeConfig {
    ProbeConfig {
        directions: p.directions,
        t_max: p.tmax,
        steps: p.steps,
        norm,
        seed: p.seed,
        sample_budget: p.budget,
        tol: p.tol,
        slope_tol: p.slope_tol,
    }
}

fn finish(mb: ManifestBuilder, mut body: serde_json::Value, out: Option<&Path>) -> Result<()> {
    body["manifest"] = serde_json::to_value(mb.finish())?;
    emit(&to_json(&body)?, out)
}

pub fn analyze(a: AnalyzeArgs) -> Result<u8> {
    let mut mb = ManifestBuilder::new("analyze", Some(a.sampling.seed));
    let m = load_matrix(&mut mb, &a.matrix)?;
    let s = &a.sampling;
    let (body, code) = match dstab::analyze(&m, s.budget, s.seed, s.tol) {
        Ok((verdict, fired)) => {
            let code = if verdict.status == VerdictStatus::Falsified {
                exit::FALSIFIED
            } else {
                exit::OK
            };
            (
                json!({"verdict": verdict, "sufficient_conditions": fired, "partition": m.partition()}),
                code,
            )
        }
        Err(e @ Error::Discrepancy { .. }) => {
            (json!({"discrepancy": e.to_string()}), exit::FALSIFIED)
        }
        Err(e) => return Err(e.into()),
    };
    finish(mb, body, a.out.output.as_deref())?;
    Ok(code)
}

pub fn probe(a: ProbeArgs) -> Result<u8> {
    let mut mb = ManifestBuilder::new("probe", Some(a.probe.seed));
    let m = load_matrix(&mut mb, &a.matrix)?;
    let q = load_weight(&mut mb, &a.q, m.dim())?;
    let norm = match a.norm {
        NormArg::Spectral => NormKind::Spectral,
        NormArg::One => NormKind::One,
    };
    let mut report = dstab::probe_robustness(&m, &q, &probe_config(&a.probe, norm))?;
    if !a.rays {
        report.rays.clear();
    }
    let code = match report.classification {
        Classification::BoundedConsistent => exit::OK,
        Classification::UnboundedEvidence => exit::UNBOUNDED,
        Classification::StabilityLost => exit::FALSIFIED,
    };
    finish(mb, json!({ "report": report }), a.out.output.as_deref())?;
    Ok(code)
}

fn rows_json(m: &DMatrix<f64>) -> serde_json::Value {
    json!(matrix_to_rows(m))
}

pub fn dcgain(a: DcgainArgs) -> Result<u8> {
    let mut mb = ManifestBuilder::new("dcgain", a.k.as_ref().map(|_| a.sampling.seed));
    let plant = load_plant(&mut mb, &a.plant)?;
    let g = intctl::dc_gain(&plant);
    let mut body = json!({
        "Gu": rows_json(&g.gu),
        "Gw": rows_json(&g.gw),
        "input_partition": plant.input_partition(),
        "output_partition": plant.output_partition(),
    });
    let mut code = exit::OK;
    if let Some(kp) = &a.k {
        let design = load_gains(&mut mb, kp, &plant)?;
        let ngk =
            intctl::neg_gain_matrix(&plant, &design, &OrderedIndexSet::full(plant.n_loops()))?;
        body["neg_Gu_K"] = serde_json::to_value(&ngk)?;
        let s = &a.sampling;
        match dstab::analyze(&ngk, s.budget, s.seed, s.tol) {
            Ok((verdict, fired)) => {
                if verdict.status == VerdictStatus::Falsified {
                    code = exit::FALSIFIED;
                }
                body["verdict"] = serde_json::to_value(verdict)?;
                body["sufficient_conditions"] = serde_json::to_value(fired)?;
            }
            Err(e @ Error::Discrepancy { .. }) => {
                body["discrepancy"] = json!(e.to_string());
                code = exit::FALSIFIED;
            }
            Err(e) => return Err(e.into()),
        }
    }
    finish(mb, body, a.out.output.as_deref())?;
    Ok(code)
}

pub fn eps_star(a: EpsStarArgs) -> Result<u8> {
    let mut mb = ManifestBuilder::new("eps-star", Some(a.probe.seed));
    let plant = load_plant(&mut mb, &a.plant)?;
    let design = load_gains(&mut mb, &a.k, &plant)?;
    let qf = load_weight(&mut mb, &a.qf, plant.n_states())?;
    let qs = load_weight(&mut mb, &a.qs, plant.n_outputs())?;
    let cfg = probe_config(&a.probe, NormKind::Spectral);
    let out = a.out.output.as_deref();

    let full = OrderedIndexSet::full(plant.n_loops());
    let ngk = intctl::neg_gain_matrix(&plant, &design, &full)?;
    let hypothesis = dstab::sample_dstability(&ngk, cfg.sample_budget, cfg.seed, cfg.tol);
    if hypothesis.status == VerdictStatus::Falsified {
        let body = json!({
            "hypothesis": hypothesis,
            "offending_sigma": [full.to_one_based()],
            "reason": "-Gu K is not block D-stable",
        });
        finish(mb, body, out)?;
        return Ok(exit::FALSIFIED);
    }
    let (report, estimates) = match intctl::epsilon_star_probed(&plant, &design, &qf, &qs, &cfg) {
        Ok(r) => r,
        Err(Error::ConfigurationRejected { sigma, abscissa }) => {
            let body = json!({
                "hypothesis": hypothesis,
                "offending_sigma": [sigma],
                "reason": format!("-Gu_σσ K_σ is not Hurwitz (abscissa {abscissa})"),
            });
            finish(mb, body, out)?;
            return Ok(exit::FALSIFIED);
        }
        Err(e) => return Err(e.into()),
    };
    let offending: Vec<Vec<usize>> = report
        .rows
        .iter()
        .filter(|r| r.eps_star_sigma.is_none())
        .map(|r| r.sigma.clone())
        .collect();
    let probes: Vec<_> = estimates
        .iter()
        .map(|e| {
            json!({
                "sigma": e.sigma,
                "m_estimate": e.value,
                "classification": e.probe.classification,
                "max_observed": e.probe.max_observed,
                "growth_exponent": e.probe.growth_exponent,
                "worst_direction": e.probe.worst_direction,
                "sampling": e.verdict,
            })
        })
        .collect();
    let code = if offending.is_empty() {
        exit::OK
    } else {
        exit::FALSIFIED
    };
    let body = json!({
        "hypothesis": hypothesis,
        "eps_star": report.eps_star,
        "report": report,
        "m_probes": probes,
        "offending_sigma": offending,
    });
    finish(mb, body, out)?;
    Ok(code)
}

pub fn simulate(a: SimulateArgs) -> Result<u8> {
    let mut mb = ManifestBuilder::new("simulate", None);
    mb.record(&a.config)?;
    let (cfg, base) = SimulationConfig::from_file(&a.config)?;
    let resolved = cfg.resolve(&base)?;
    for f in &resolved.referenced_files {
        mb.record(f)?;
    }
    let traj = sim::simulate(&resolved.plant, &resolved.design, &resolved.schedule)?;
    sim::export_csv(&traj, &a.out).with_context(|| format!("cannot write {}", a.out.display()))?;
    let body = json!({
        "description": cfg.description,
        "dt": resolved.schedule.dt,
        "epsilons": resolved.design.epsilons(),
        "summary": traj.summary(),
        "csv": a.out.display().to_string(),
    });
    finish(mb, body, a.summary.as_deref())?;
    Ok(if traj.diverged {
        exit::DIVERGED
    } else {
        exit::OK
    })
}

pub fn decompose(a: DecomposeArgs) -> Result<u8> {
    let mut mb = ManifestBuilder::new("decompose", None);
    let f: ScalingFamily = parse_file(&mut mb, &a.family)?;
    if a.k.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
        bail!("sample points must be positive");
    }
    let dec = scalingseq::decompose(&f);
    let part = Partition::scalar(f.len())?;
    let err = scalingseq::verify_reconstruction(&f, &dec, &a.k, &part)?;
    let body = json!({
        "decomposition": dec.report(),
        "k_samples": a.k,
        "reconstruction_error": err,
        "ordering_ratios": scalingseq::ordering_ratios(&dec, &a.k),
    });
    finish(mb, body, a.out.output.as_deref())?;
    Ok(exit::OK)
}

pub fn perturb(a: PerturbArgs) -> Result<u8> {
    let mut mb = ManifestBuilder::new("perturb", Some(a.sampling.seed));
    let m = load_matrix(&mut mb, &a.matrix)?;
    let s = &a.sampling;
    let report = dstab::perturbation_probe(&m, a.mu, a.trials, s.budget, s.seed, s.tol)?;
    let code = if report.falsified_count > 0 {
        exit::FALSIFIED
    } else {
        exit::OK
    };
    finish(mb, json!({ "report": report }), a.out.output.as_deref())?;
    Ok(code)
}

pub fn inherit(a: InheritArgs) -> Result<u8> {
    let mut mb = ManifestBuilder::new("inherit", Some(a.probe.seed));
    let m = load_matrix(&mut mb, &a.matrix)?;
    let alpha = OrderedIndexSet::from_one_based(&a.alpha, m.n_blocks())?;
    let cfg = probe_config(&a.probe, NormKind::Spectral);
    let mut report = dstab::inheritance_check(&m, &alpha, cfg.sample_budget, cfg.seed, &cfg)?;
    report.principal.probe.rays.clear();
    if let Some(s) = report.schur.as_mut() {
        s.probe.rays.clear();
    }
    let falsified =
        report.principal.falsified() || report.schur.as_ref().is_some_and(|s| s.falsified());
    finish(mb, json!({ "report": report }), a.out.output.as_deref())?;
    Ok(if falsified { exit::FALSIFIED } else { exit::OK })
}
