//! Block D-stability battery.
//!
//! Sampling can falsify block D-stability (a destabilizing scaling is a
//! certificate of failure) but never prove it. Cheap sufficient conditions
//! certify. The robustness probe sweeps rays of scalings and reports
//! whether `‖P_D D‖` looks uniformly bounded; it is evidence, not proof.
//!
//! Everything here is degree-0 homogeneous in the scaling, so sampled
//! scalings are normalized to `max d_i = 1`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockmat::{
    matrix_to_rows, schur_complement, submatrix, BlockScaling, OrderedIndexSet, PartitionedMatrix,
};
use crate::error::{Error, Result};
use crate::lyap::{self, NormKind, DEFAULT_HURWITZ_TOL};

/// Largest corner exponent: corners use entries in `{10^-k, 1, 10^k}`, `k <= 6`.
pub const MAX_CORNER_EXPONENT: i32 = 6;
/// Random samples draw `log10 d_i` uniformly from `[-RANDOM_LOG10_SPAN, 0]`.
pub const RANDOM_LOG10_SPAN: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStatus {
    CertifiedSufficient,
    ConsistentWithSampling,
    Falsified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SufficientCondition {
    /// `A + Aᵀ ≺ 0`
    SymmetricPartNegative,
    /// Off-diagonal entries nonnegative and `A` Hurwitz.
    StableMetzler,
    /// Negative diagonal with strict row diagonal dominance.
    RowDiagonalDominance,
}

impl SufficientCondition {
    pub fn name(self) -> &'static str {
        match self {
            SufficientCondition::SymmetricPartNegative => "symmetric-part-negative",
            SufficientCondition::StableMetzler => "stable-metzler",
            SufficientCondition::RowDiagonalDominance => "row-diagonal-dominance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DStabilityVerdict {
    pub status: VerdictStatus,
    /// Destabilizing scaling, present iff falsified.
    pub witness: Option<BlockScaling>,
    pub sufficient_condition: Option<SufficientCondition>,
    pub samples_tested: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    BoundedConsistent,
    UnboundedEvidence,
    StabilityLost,
}

/// One probed ray `d(t) = exp(t w)` with `w = v / (max v - min v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayTable {
    /// Unit direction `v`.
    pub direction: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    /// Least-squares slope of `ln ‖P_D D‖` against `t` over the last third of the grid.
    pub tail_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub classification: Classification,
    pub max_observed: f64,
    pub growth_exponent: Option<f64>,
    pub worst_direction: Option<Vec<f64>>,
    pub norm_kind: NormKind,
    pub slope_tol: f64,
    /// Scaling at which stability was lost, if it was.
    pub witness: Option<BlockScaling>,
    pub rays: Vec<RayTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Number of seeded random directions added to the axis and pair directions.
    pub directions: usize,
    pub t_max: f64,
    pub steps: usize,
    pub norm: NormKind,
    pub seed: u64,
    /// Budget of the D-stability sampling run before probing.
    pub sample_budget: usize,
    pub tol: f64,
    pub slope_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            directions: 64,
            t_max: 14.0,
            steps: 56,
            norm: NormKind::Spectral,
            seed: 0,
            sample_budget: 2000,
            tol: DEFAULT_HURWITZ_TOL,
            slope_tol: 0.1,
        }
    }
}

/// Cheap sufficient conditions for block D-stability, in a fixed order.
pub fn sufficient_conditions(a: &PartitionedMatrix) -> Vec<SufficientCondition> {
    let m = a.data();
    let n = m.nrows();
    let scale = 1.0 + m.amax();
    let mut fired = Vec::new();

    let sym = m + m.transpose();
    if sym.symmetric_eigenvalues().max() < -1e-12 * scale {
        fired.push(SufficientCondition::SymmetricPartNegative);
    }

    let metzler = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= 0.0));
    if metzler && lyap::is_hurwitz(m, DEFAULT_HURWITZ_TOL).unwrap_or(false) {
        fired.push(SufficientCondition::StableMetzler);
    }

    let dominant = (0..n).all(|i| {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
        m[(i, i)] < 0.0 && -m[(i, i)] > off
    });
    if dominant {
        fired.push(SufficientCondition::RowDiagonalDominance);
    }
    fired
}

/// Deterministic sample of normalized scalings: the all-ones point, then the
/// corner set, then log-uniform random points. Corners take at most half of
/// the budget when the budget leaves room for random points.
pub fn sample_set(n_blocks: usize, budget: usize, seed: u64) -> Vec<BlockScaling> {
    let mut out = Vec::with_capacity(budget);
    if budget == 0 {
        return out;
    }
    out.push(BlockScaling::ones(n_blocks));
    let corner_cap = if budget >= 4 {
        budget.div_ceil(2)
    } else {
        budget
    };
    let mut seen: std::collections::HashSet<Vec<u64>> = std::collections::HashSet::new();
    seen.insert(vec![1f64.to_bits(); n_blocks]);

    'corners: for k in 1..=MAX_CORNER_EXPONENT {
        let levels = [10f64.powi(-k), 1.0, 10f64.powi(k)];
        let total = 3usize.saturating_pow(n_blocks as u32);
        for code in 0..total {
            if out.len() >= corner_cap {
                break 'corners;
            }
            let mut c = code;
            let raw: Vec<f64> = (0..n_blocks)
                .map(|_| {
                    let v = levels[c % 3];
                    c /= 3;
                    v
                })
                .collect();
            let d = BlockScaling::new(raw)
                .expect("positive corner")
                .normalized();
            let key: Vec<u64> = d.as_slice().iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                out.push(d);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < budget {
        let raw: Vec<f64> = (0..n_blocks)
            .map(|_| 10f64.powf(-RANDOM_LOG10_SPAN * rng.random::<f64>()))
            .collect();
        out.push(
            BlockScaling::new(raw)
                .expect("positive sample")
                .normalized(),
        );
    }
    out
}

/// Tests `D A` for Hurwitzness over [`sample_set`]; stops at the first
/// failure (lowest sample index, independent of thread scheduling).
pub fn sample_dstability(
    a: &PartitionedMatrix,
    budget: usize,
    seed: u64,
    tol: f64,
) -> DStabilityVerdict {
    let samples = sample_set(a.n_blocks(), budget.max(1), seed);
    let first_fail = samples
        .par_iter()
        .position_first(|d| matches!(lyap::is_hurwitz_scaled(a, d, tol), Ok(false)));
    match first_fail {
        Some(idx) => DStabilityVerdict {
            status: VerdictStatus::Falsified,
            witness: Some(samples[idx].clone()),
            sufficient_condition: None,
            samples_tested: idx + 1,
        },
        None => DStabilityVerdict {
            status: VerdictStatus::ConsistentWithSampling,
            witness: None,
            sufficient_condition: None,
            samples_tested: samples.len(),
        },
    }
}

/// Sufficient conditions followed by sampling. A sampling failure while a
/// sufficient condition fired is reported as [`Error::Discrepancy`].
pub fn analyze(
    a: &PartitionedMatrix,
    budget: usize,
    seed: u64,
    tol: f64,
) -> Result<(DStabilityVerdict, Vec<SufficientCondition>)> {
    let fired = sufficient_conditions(a);
    let mut verdict = sample_dstability(a, budget, seed, tol);
    if verdict.status == VerdictStatus::Falsified {
        if let Some(c) = fired.first() {
            return Err(Error::Discrepancy {
                condition: c.name().to_string(),
            });
        }
    } else if let Some(&c) = fired.first() {
        verdict.status = VerdictStatus::CertifiedSufficient;
        verdict.sufficient_condition = Some(c);
    }
    Ok((verdict, fired))
}

fn probe_directions(n: usize, extra: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; n];
            v[i] = sign;
            dirs.push(v);
        }
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut v = vec![0.0; n];
            v[i] = h;
            v[j] = -h;
            dirs.push(v.clone());
            dirs.push(v.iter().map(|x| -x).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d1ec);
    let mut added = 0;
    while added < extra {
        let v: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            dirs.push(v.iter().map(|x| x / norm).collect());
            added += 1;
        }
    }
    dirs
}

/// Points of the ray along `direction`, normalized to `max d_i = 1`.
/// The parameter `t` equals `ln(max d / min d)` so every ray spans the same
/// dynamic range; directions with zero spread give a constant ray.
pub fn ray_point(direction: &[f64], t: f64) -> BlockScaling {
    let hi = direction.iter().copied().fold(f64::MIN, f64::max);
    let lo = direction.iter().copied().fold(f64::MAX, f64::min);
    let spread = hi - lo;
    let d: Vec<f64> = if spread < 1e-12 {
        vec![1.0; direction.len()]
    } else {
        direction
            .iter()
            .map(|v| (t * (v - hi) / spread).exp())
            .collect()
    };
    BlockScaling::new(d).unwrap_or_else(|_| BlockScaling::ones(direction.len()))
}

fn tail_slope(t: &[f64], values: &[f64]) -> f64 {
    let start = (2 * (t.len() - 1)).div_ceil(3);
    let xs = &t[start..];
    let ys: Vec<f64> = values[start..].iter().map(|v| v.ln()).collect();
    if xs.len() < 2 {
        return 0.0;
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Sweeps rays of block scalings and classifies the growth of `‖P_D D‖`.
pub fn probe_robustness(
    a: &PartitionedMatrix,
    q: &DMatrix<f64>,
    cfg: &ProbeConfig,
) -> Result<BoundednessReport> {
    if q.nrows() != a.dim() || q.ncols() != a.dim() {
        return Err(Error::DimensionMismatch {
            context: "probe Q dimension",
            expected: a.dim(),
            got: q.nrows(),
        });
    }
    let lost = |witness: BlockScaling, rays: Vec<RayTable>| BoundednessReport {
        classification: Classification::StabilityLost,
        max_observed: rays
            .iter()
            .flat_map(|r| r.values.iter().copied())
            .fold(0.0, f64::max),
        growth_exponent: None,
        worst_direction: None,
        norm_kind: cfg.norm,
        slope_tol: cfg.slope_tol,
        witness: Some(witness),
        rays,
    };

    let pre = sample_dstability(a, cfg.sample_budget, cfg.seed, cfg.tol);
    if let Some(w) = pre.witness {
        return Ok(lost(w, Vec::new()));
    }

    let steps = cfg.steps.max(1);
    let grid: Vec<f64> = (0..=steps)
        .map(|k| cfg.t_max * k as f64 / steps as f64)
        .collect();
    let dirs = probe_directions(a.n_blocks(), cfg.directions, cfg.seed);

    let evaluated: Vec<std::result::Result<RayTable, BlockScaling>> = dirs
        .par_iter()
        .map(|v| {
            let mut values = Vec::with_capacity(grid.len());
            for &t in &grid {
                let d = ray_point(v, t);
                match lyap::scaled_product_norm(a, &d, q, cfg.norm, cfg.tol) {
                    Ok(x) if x.is_finite() && x > 0.0 => values.push(x),
                    _ => return Err(d),
                }
            }
            Ok(RayTable {
                direction: v.clone(),
                t: grid.clone(),
                tail_slope: tail_slope(&grid, &values),
                values,
            })
        })
        .collect();

    let mut rays = Vec::with_capacity(evaluated.len());
    for r in evaluated {
        match r {
            Ok(table) => rays.push(table),
            Err(d) => return Ok(lost(d, rays)),
        }
    }

    let max_observed = rays
        .iter()
        .flat_map(|r| r.values.iter().copied())
        .fold(0.0, f64::max);
    // Equivalent rays give the same slope up to rounding; keep the first.
    let mut worst = 0;
    for (i, r) in rays.iter().enumerate() {
        if r.tail_slope > rays[worst].tail_slope + 1e-9 {
            worst = i;
        }
    }
    let slope = rays[worst].tail_slope;
    let classification = if slope > cfg.slope_tol {
        Classification::UnboundedEvidence
    } else {
        Classification::BoundedConsistent
    };
    Ok(BoundednessReport {
        classification,
        max_observed,
        growth_exponent: Some(slope),
        worst_direction: Some(rays[worst].direction.clone()),
        norm_kind: cfg.norm,
        slope_tol: cfg.slope_tol,
        witness: None,
        rays,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTrial {
    pub perturbation_norm: f64,
    pub verdict: DStabilityVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationFalsification {
    pub trial: usize,
    pub perturbation: Vec<Vec<f64>>,
    pub witness: BlockScaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub mu: f64,
    pub trials: Vec<PerturbationTrial>,
    pub falsified_count: usize,
    /// First falsifying `(B, D)` pair in trial order.
    pub first_falsification: Option<PerturbationFalsification>,
}

/// Samples `B` with `‖B‖₂ <= mu` and runs [`sample_dstability`] on `A + B`.
/// Magnitudes are biased towards the boundary `‖B‖₂ = mu`.
pub fn perturbation_probe(
    a: &PartitionedMatrix,
    mu: f64,
    trials: usize,
    scaling_budget: usize,
    seed: u64,
    tol: f64,
) -> Result<PerturbationReport> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "perturbation radius must be nonnegative, got {mu}"
        )));
    }
    let n = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perturbations: Vec<DMatrix<f64>> = (0..trials)
        .map(|_| {
            let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let s = lyap::spectral_norm(&g);
            let r = mu * rng.random::<f64>().powf(0.25);
            if s > 0.0 {
                g * (r / s)
            } else {
                DMatrix::zeros(n, n)
            }
        })
        .collect();

    let results: Vec<Result<PerturbationTrial>> = perturbations
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let ab = a.with_data(a.data() + b)?;
            let verdict =
                sample_dstability(&ab, scaling_budget, seed.wrapping_add(i as u64 + 1), tol);
            Ok(PerturbationTrial {
                perturbation_norm: lyap::spectral_norm(b),
                verdict,
            })
        })
        .collect();
    let trials: Vec<PerturbationTrial> = results.into_iter().collect::<Result<_>>()?;

    let first = trials
        .iter()
        .position(|t| t.verdict.status == VerdictStatus::Falsified);
    Ok(PerturbationReport {
        mu,
        falsified_count: trials
            .iter()
            .filter(|t| t.verdict.status == VerdictStatus::Falsified)
            .count(),
        first_falsification: first.map(|i| PerturbationFalsification {
            trial: i,
            perturbation: matrix_to_rows(&perturbations[i]),
            witness: trials[i]
                .verdict
                .witness
                .clone()
                .expect("falsified verdict carries witness"),
        }),
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmatrixReport {
    pub verdict: DStabilityVerdict,
    pub probe: BoundednessReport,
}

impl SubmatrixReport {
    pub fn falsified(&self) -> bool {
        self.verdict.status == VerdictStatus::Falsified
            || self.probe.classification == Classification::StabilityLost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InheritanceReport {
    /// One-based block indices of `alpha`.
    pub alpha: Vec<usize>,
    pub principal: SubmatrixReport,
    /// `None` when `alpha` selects every block.
    pub schur: Option<SubmatrixReport>,
}

/// Runs sampling and the robustness probe on `A_{alpha,alpha}` and on the
/// Schur complement `A / A_{alpha,alpha}`, both with `Q = I`.
pub fn inheritance_check(
    a: &PartitionedMatrix,
    alpha: &OrderedIndexSet,
    budget: usize,
    seed: u64,
    probe: &ProbeConfig,
) -> Result<InheritanceReport> {
    if alpha.is_empty() {
        return Err(Error::InvalidInput(
            "inheritance check needs a nonempty index set".into(),
        ));
    }
    let run = |m: &PartitionedMatrix| -> Result<SubmatrixReport> {
        let verdict = sample_dstability(m, budget, seed, probe.tol);
        let q = DMatrix::identity(m.dim(), m.dim());
        let probe = probe_robustness(m, &q, probe)?;
        Ok(SubmatrixReport { verdict, probe })
    };
    let principal = run(&submatrix(a, alpha, alpha)?)?;
    let schur = if alpha.len() == a.n_blocks() {
        None
    } else {
        Some(run(&schur_complement(a, alpha)?)?)
    };
    Ok(InheritanceReport {
        alpha: alpha.to_one_based(),
        principal,
        schur,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a_eps(eps: f64) -> PartitionedMatrix {
        PartitionedMatrix::from_rows(&[vec![eps, 1.0], vec![-1.0, -2.0]], vec![1, 1]).unwrap()
    }

    fn neg_gk() -> PartitionedMatrix {
        PartitionedMatrix::from_rows(
            &[
                vec![-0.1, -0.1, -0.1],
                vec![1.0, -0.1, 0.0],
                vec![0.0, -0.1, -0.1],
            ],
            vec![2, 1],
        )
        .unwrap()
    }

    fn neg_identity(n: usize, sizes: Vec<usize>) -> PartitionedMatrix {
        PartitionedMatrix::new(
            -DMatrix::<f64>::identity(n, n),
            crate::blockmat::Partition::new(sizes).unwrap(),
        )
        .unwrap()
    }

    fn small_probe() -> ProbeConfig {
        ProbeConfig {
            directions: 8,
            steps: 28,
            sample_budget: 300,
            ..ProbeConfig::default()
        }
    }

    #[test]
    fn conditions_on_reference_matrices() {
        assert_eq!(
            sufficient_conditions(&neg_identity(3, vec![1, 2])),
            vec![
                SufficientCondition::SymmetricPartNegative,
                SufficientCondition::StableMetzler,
                SufficientCondition::RowDiagonalDominance
            ]
        );
        assert!(sufficient_conditions(&a_eps(0.0)).is_empty());
        assert!(
            !sufficient_conditions(&neg_gk()).contains(&SufficientCondition::SymmetricPartNegative)
        );
    }

    #[test]
    fn sample_set_is_normalized_and_deterministic() {
        let s = sample_set(3, 200, 7);
        assert_eq!(s.len(), 200);
        assert!(s.iter().all(|d| d.max() == 1.0));
        assert_eq!(s, sample_set(3, 200, 7));
        assert_ne!(s, sample_set(3, 200, 8));
        assert_eq!(sample_set(2, 1, 0), vec![BlockScaling::ones(2)]);
    }

    #[test]
    fn edge_matrix_is_falsified() {
        let a = a_eps(0.01);
        let v = sample_dstability(&a, 2000, 0, DEFAULT_HURWITZ_TOL);
        assert_eq!(v.status, VerdictStatus::Falsified);
        let w = v.witness.unwrap();
        assert!(w.as_slice()[0] / w.as_slice()[1] > 200.0);
        let d = crate::blockmat::expand_scaling(&w, a.partition()).unwrap();
        assert!(lyap::spectral_abscissa(&(d * a.data())).unwrap().abscissa >= -DEFAULT_HURWITZ_TOL);
    }

    #[test]
    fn robust_matrices_survive_sampling() {
        for budget in [1, 10, 2000] {
            let v = sample_dstability(&a_eps(-1.0), budget, 3, DEFAULT_HURWITZ_TOL);
            assert_eq!(v.status, VerdictStatus::ConsistentWithSampling);
            assert_eq!(v.samples_tested, budget);
        }
        assert_eq!(
            sample_dstability(&neg_gk(), 2000, 0, DEFAULT_HURWITZ_TOL).status,
            VerdictStatus::ConsistentWithSampling
        );
        // A0 is D-stable (though not robustly so)
        assert_eq!(
            sample_dstability(&a_eps(0.0), 2000, 0, DEFAULT_HURWITZ_TOL).status,
            VerdictStatus::ConsistentWithSampling
        );
    }

    #[test]
    fn analyze_certifies_negative_identity() {
        let (v, fired) =
            analyze(&neg_identity(2, vec![1, 1]), 100, 0, DEFAULT_HURWITZ_TOL).unwrap();
        assert_eq!(v.status, VerdictStatus::CertifiedSufficient);
        assert_eq!(
            v.sufficient_condition,
            Some(SufficientCondition::SymmetricPartNegative)
        );
        assert_eq!(fired.len(), 3);
    }

    #[test]
    fn probe_trivial_partition_is_constant() {
        let a = neg_identity(2, vec![2]);
        let r = probe_robustness(&a, &DMatrix::identity(2, 2), &small_probe()).unwrap();
        assert_eq!(r.classification, Classification::BoundedConsistent);
        for ray in &r.rays {
            for v in &ray.values {
                assert!((v - 0.5).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn probe_edge_cases_one_norm() {
        let cfg = ProbeConfig {
            norm: NormKind::One,
            ..small_probe()
        };
        let r = probe_robustness(&a_eps(0.0), &DMatrix::identity(2, 2), &cfg).unwrap();
        assert_eq!(r.classification, Classification::UnboundedEvidence);
        let s = r.growth_exponent.unwrap();
        assert!((0.9..=1.1).contains(&s), "slope {s}");
        assert_eq!(r.worst_direction.unwrap(), vec![1.0, 0.0]);

        let r = probe_robustness(&a_eps(-1.0), &DMatrix::identity(2, 2), &cfg).unwrap();
        assert_eq!(r.classification, Classification::BoundedConsistent);
        assert!(r.max_observed <= 2.0 / 3.0 + 1e-6);
    }

    #[test]
    fn probe_reports_lost_stability() {
        let r = probe_robustness(&a_eps(0.01), &DMatrix::identity(2, 2), &small_probe()).unwrap();
        assert_eq!(r.classification, Classification::StabilityLost);
        assert!(r.witness.is_some());
    }

    #[test]
    fn perturbations_of_edge_matrix() {
        let r = perturbation_probe(&a_eps(0.0), 0.05, 40, 500, 1, DEFAULT_HURWITZ_TOL).unwrap();
        assert!(r.falsified_count > 0);
        let f = r.first_falsification.unwrap();
        assert!(r.trials[f.trial].perturbation_norm <= 0.05 + 1e-12);

        let r = perturbation_probe(&a_eps(-1.0), 0.01, 40, 500, 1, DEFAULT_HURWITZ_TOL).unwrap();
        assert_eq!(r.falsified_count, 0);

        let r = perturbation_probe(&a_eps(0.01), 0.0, 3, 500, 1, DEFAULT_HURWITZ_TOL).unwrap();
        let plain = sample_dstability(&a_eps(0.01), 500, 2, DEFAULT_HURWITZ_TOL);
        assert_eq!(r.trials[0].verdict, plain);
        assert!(r.trials.iter().all(|t| t.perturbation_norm == 0.0));
    }

    #[test]
    fn inheritance_on_example_gain() {
        let alpha = OrderedIndexSet::from_one_based(&[1], 2).unwrap();
        let r = inheritance_check(&neg_gk(), &alpha, 500, 0, &small_probe()).unwrap();
        assert!(!r.principal.falsified());
        assert!(!r.schur.unwrap().falsified());

        let a = neg_identity(4, vec![1, 1, 2]);
        let alpha = OrderedIndexSet::from_one_based(&[3, 1], 3).unwrap();
        let r = inheritance_check(&a, &alpha, 200, 0, &small_probe()).unwrap();
        assert!(!r.principal.falsified());
        assert!(!r.schur.as_ref().unwrap().falsified());
    }
}
