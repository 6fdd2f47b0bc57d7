//! Decentralized low-gain integral control of a stable LTI plant.
//!
//! The plant is `ẋ = A x + Σ_j Bu_j u_j + Bw w`, `e_i = C_i x + Σ_j Du_ij u_j + Dw_i w`
//! with local controllers `η̇_i = -ε_i e_i`, `u_i = K_i η_i`. A loop
//! configuration `σ` lists the closed loops; the remaining inputs are held
//! constant.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockmat::{
    gather, matrix_from_rows, matrix_to_rows, OrderedIndexSet, Partition, PartitionedMatrix,
};
use crate::dstab::{self, BoundednessReport, Classification, DStabilityVerdict, ProbeConfig};
use crate::error::{Error, Result};
use crate::lyap::{self, DEFAULT_HURWITZ_TOL};

/// Largest loop count for which all configurations are enumerated.
pub const MAX_LOOPS: usize = 12;
/// Multiplier applied to the probed supremum of `‖P_s ℰ‖` to form `M^σ`.
pub const M_SAFETY_FACTOR: f64 = 1.5;
/// Provenance tag carried by every `ε*` computed from probed `M^σ` values.
pub const M_PROVENANCE: &str = "ESTIMATE";

#[derive(Debug, Clone, PartialEq)]
pub struct LtiPlant {
    a: DMatrix<f64>,
    bu: DMatrix<f64>,
    bw: DMatrix<f64>,
    c: DMatrix<f64>,
    du: DMatrix<f64>,
    dw: DMatrix<f64>,
    input_partition: Partition,
    output_partition: Partition,
    a_inv: DMatrix<f64>,
}

/// Plant file format. `Bw`, `Du` and `Dw` default to zero (with `n_w = 0`
/// when both `Bw` and `Dw` are absent).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "Bu")]
    pub bu: Vec<Vec<f64>>,
    #[serde(rename = "Bw", default, skip_serializing_if = "Option::is_none")]
    pub bw: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "Du", default, skip_serializing_if = "Option::is_none")]
    pub du: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Dw", default, skip_serializing_if = "Option::is_none")]
    pub dw: Option<Vec<Vec<f64>>>,
    pub input_partition: Vec<usize>,
    pub output_partition: Vec<usize>,
}

fn rows_or_zeros(rows: &Option<Vec<Vec<f64>>>, nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    match rows {
        None => Ok(DMatrix::zeros(nrows, ncols)),
        // `[]` or rows of `[]` both mean zero columns
        Some(r) if r.is_empty() => Ok(DMatrix::zeros(nrows, 0)),
        Some(r) => matrix_from_rows(r),
    }
}

impl TryFrom<PlantJson> for LtiPlant {
    type Error = Error;
    fn try_from(j: PlantJson) -> Result<Self> {
        let a = matrix_from_rows(&j.a)?;
        let bu = matrix_from_rows(&j.bu)?;
        let c = matrix_from_rows(&j.c)?;
        let n_w = match (&j.bw, &j.dw) {
            (Some(b), _) if !b.is_empty() => b[0].len(),
            (_, Some(d)) if !d.is_empty() => d[0].len(),
            _ => 0,
        };
        let bw = rows_or_zeros(&j.bw, a.nrows(), n_w)?;
        let du = rows_or_zeros(&j.du, c.nrows(), bu.ncols())?;
        let dw = rows_or_zeros(&j.dw, c.nrows(), n_w)?;
        LtiPlant::new(
            a,
            bu,
            bw,
            c,
            du,
            dw,
            Partition::new(j.input_partition)?,
            Partition::new(j.output_partition)?,
        )
    }
}

impl From<&LtiPlant> for PlantJson {
    fn from(p: &LtiPlant) -> Self {
        PlantJson {
            a: matrix_to_rows(&p.a),
            bu: matrix_to_rows(&p.bu),
            bw: Some(matrix_to_rows(&p.bw)),
            c: matrix_to_rows(&p.c),
            du: Some(matrix_to_rows(&p.du)),
            dw: Some(matrix_to_rows(&p.dw)),
            input_partition: p.input_partition.sizes().to_vec(),
            output_partition: p.output_partition.sizes().to_vec(),
        }
    }
}

fn check_shape(m: &DMatrix<f64>, rows: usize, cols: usize, context: &'static str) -> Result<()> {
    if m.nrows() != rows {
        return Err(Error::DimensionMismatch {
            context,
            expected: rows,
            got: m.nrows(),
        });
    }
    if m.ncols() != cols {
        return Err(Error::DimensionMismatch {
            context,
            expected: cols,
            got: m.ncols(),
        });
    }
    Ok(())
}

impl LtiPlant {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        bu: DMatrix<f64>,
        bw: DMatrix<f64>,
        c: DMatrix<f64>,
        du: DMatrix<f64>,
        dw: DMatrix<f64>,
        input_partition: Partition,
        output_partition: Partition,
    ) -> Result<Self> {
        let n = a.nrows();
        let (m, p, n_w) = (
            input_partition.total(),
            output_partition.total(),
            bw.ncols(),
        );
        check_shape(&a, n, n, "A must be square")?;
        check_shape(&bu, n, m, "Bu shape (n x m)")?;
        check_shape(&bw, n, n_w, "Bw shape (n x n_w)")?;
        check_shape(&c, p, n, "C shape (p x n)")?;
        check_shape(&du, p, m, "Du shape (p x m)")?;
        check_shape(&dw, p, n_w, "Dw shape (p x n_w)")?;
        if input_partition.n_blocks() != output_partition.n_blocks() {
            return Err(Error::DimensionMismatch {
                context: "input vs output loop count",
                expected: input_partition.n_blocks(),
                got: output_partition.n_blocks(),
            });
        }
        let abscissa = lyap::spectral_abscissa(&a)?.abscissa;
        if !(abscissa < -DEFAULT_HURWITZ_TOL) {
            return Err(Error::UnstablePlant { abscissa });
        }
        let a_inv = a.clone().try_inverse().ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?;
        Ok(LtiPlant {
            a,
            bu,
            bw,
            c,
            du,
            dw,
            input_partition,
            output_partition,
            a_inv,
        })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_loops(&self) -> usize {
        self.input_partition.n_blocks()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_partition.total()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_partition.total()
    }

    pub fn n_disturbances(&self) -> usize {
        self.bw.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn a_inv(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    pub fn bu(&self) -> &DMatrix<f64> {
        &self.bu
    }

    pub fn bw(&self) -> &DMatrix<f64> {
        &self.bw
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn du(&self) -> &DMatrix<f64> {
        &self.du
    }

    pub fn dw(&self) -> &DMatrix<f64> {
        &self.dw
    }

    pub fn input_partition(&self) -> &Partition {
        &self.input_partition
    }

    pub fn output_partition(&self) -> &Partition {
        &self.output_partition
    }

    pub fn input_indices(&self, s: &OrderedIndexSet) -> Vec<usize> {
        self.input_partition.scalar_indices(s)
    }

    pub fn output_indices(&self, s: &OrderedIndexSet) -> Vec<usize> {
        self.output_partition.scalar_indices(s)
    }

    /// Columns of `Bu` for the inputs of `s`.
    pub fn bu_sub(&self, s: &OrderedIndexSet) -> DMatrix<f64> {
        let rows: Vec<usize> = (0..self.n_states()).collect();
        gather(&self.bu, &rows, &self.input_indices(s))
    }

    /// Rows of `C` for the outputs of `s`.
    pub fn c_sub(&self, s: &OrderedIndexSet) -> DMatrix<f64> {
        let cols: Vec<usize> = (0..self.n_states()).collect();
        gather(&self.c, &self.output_indices(s), &cols)
    }

    pub fn du_sub(&self, rows: &OrderedIndexSet, cols: &OrderedIndexSet) -> DMatrix<f64> {
        gather(
            &self.du,
            &self.output_indices(rows),
            &self.input_indices(cols),
        )
    }

    pub fn dw_sub(&self, rows: &OrderedIndexSet) -> DMatrix<f64> {
        let cols: Vec<usize> = (0..self.n_disturbances()).collect();
        gather(&self.dw, &self.output_indices(rows), &cols)
    }
}

/// Block-diagonal integral gains `K_i` (each `m_i x p_i`) and tunings `ε_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainDesign {
    k_blocks: Vec<DMatrix<f64>>,
    epsilons: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainJson {
    #[serde(rename = "K_blocks")]
    pub k_blocks: Vec<Vec<Vec<f64>>>,
    /// Omitted tunings default to 1 for every loop.
    #[serde(default)]
    pub epsilons: Vec<f64>,
}

impl TryFrom<GainJson> for GainDesign {
    type Error = Error;
    fn try_from(j: GainJson) -> Result<Self> {
        let blocks = j
            .k_blocks
            .iter()
            .map(|b| matrix_from_rows(b))
            .collect::<Result<Vec<_>>>()?;
        let eps = if j.epsilons.is_empty() {
            vec![1.0; blocks.len()]
        } else {
            j.epsilons
        };
        GainDesign::new(blocks, eps)
    }
}

impl From<&GainDesign> for GainJson {
    fn from(g: &GainDesign) -> Self {
        GainJson {
            k_blocks: g.k_blocks.iter().map(matrix_to_rows).collect(),
            epsilons: g.epsilons.clone(),
        }
    }
}

impl GainDesign {
    pub fn new(k_blocks: Vec<DMatrix<f64>>, epsilons: Vec<f64>) -> Result<Self> {
        if k_blocks.len() != epsilons.len() {
            return Err(Error::DimensionMismatch {
                context: "K blocks vs epsilons",
                expected: k_blocks.len(),
                got: epsilons.len(),
            });
        }
        if let Some(e) = epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "tuning gain {e} is not positive and finite"
            )));
        }
        Ok(GainDesign { k_blocks, epsilons })
    }

    /// `K_i = I` for square loops, with the given tunings.
    pub fn identity(plant: &LtiPlant, epsilons: Vec<f64>) -> Result<Self> {
        let blocks = (0..plant.n_loops())
            .map(|i| {
                DMatrix::identity(
                    plant.input_partition.size(i),
                    plant.output_partition.size(i),
                )
            })
            .collect();
        let g = GainDesign::new(blocks, epsilons)?;
        g.validate(plant)?;
        Ok(g)
    }

    pub fn with_epsilons(&self, epsilons: Vec<f64>) -> Result<Self> {
        GainDesign::new(self.k_blocks.clone(), epsilons)
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn k_blocks(&self) -> &[DMatrix<f64>] {
        &self.k_blocks
    }

    pub fn validate(&self, plant: &LtiPlant) -> Result<()> {
        if self.k_blocks.len() != plant.n_loops() {
            return Err(Error::DimensionMismatch {
                context: "K block count vs loops",
                expected: plant.n_loops(),
                got: self.k_blocks.len(),
            });
        }
        for (i, k) in self.k_blocks.iter().enumerate() {
            check_shape(
                k,
                plant.input_partition.size(i),
                plant.output_partition.size(i),
                "K_i shape (m_i x p_i)",
            )?;
        }
        Ok(())
    }

    /// `K_σ = blkdiag(K_i, i in σ)`, of size `m_σ x p_σ`.
    pub fn k_sub(&self, s: &OrderedIndexSet) -> DMatrix<f64> {
        let rows: usize = s.iter().map(|i| self.k_blocks[i].nrows()).sum();
        let cols: usize = s.iter().map(|i| self.k_blocks[i].ncols()).sum();
        let mut k = DMatrix::zeros(rows, cols);
        let (mut r, mut c) = (0, 0);
        for i in s.iter() {
            let b = &self.k_blocks[i];
            k.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
            r += b.nrows();
            c += b.ncols();
        }
        k
    }

    /// `ℰ_σ = blkdiag(ε_i I_{p_i}, i in σ)` as a diagonal vector.
    pub fn eps_diag(&self, plant: &LtiPlant, s: &OrderedIndexSet) -> DVector<f64> {
        DVector::from_iterator(
            plant.output_partition.scalar_indices(s).len(),
            s.iter().flat_map(|i| {
                std::iter::repeat_n(self.epsilons[i], plant.output_partition.size(i))
            }),
        )
    }
}

/// Which loops are closed, the held inputs of the open ones (stacked in
/// natural order of the open loops) and the disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfiguration {
    pub sigma: OrderedIndexSet,
    pub u_open: DVector<f64>,
    pub w: DVector<f64>,
}

impl LoopConfiguration {
    /// Held inputs default to zero when `u_open` is `None`.
    pub fn new(
        plant: &LtiPlant,
        sigma: OrderedIndexSet,
        u_open: Option<DVector<f64>>,
        w: DVector<f64>,
    ) -> Result<Self> {
        let n = plant.n_loops();
        let sigma = OrderedIndexSet::new(sigma.as_slice().to_vec(), n)?;
        let m_open = plant.input_indices(&sigma.complement(n)).len();
        let u_open = u_open.unwrap_or_else(|| DVector::zeros(m_open));
        if u_open.len() != m_open {
            return Err(Error::DimensionMismatch {
                context: "held input length",
                expected: m_open,
                got: u_open.len(),
            });
        }
        if w.len() != plant.n_disturbances() {
            return Err(Error::DimensionMismatch {
                context: "disturbance length",
                expected: plant.n_disturbances(),
                got: w.len(),
            });
        }
        Ok(LoopConfiguration { sigma, u_open, w })
    }

    pub fn open_loops(&self, plant: &LtiPlant) -> OrderedIndexSet {
        self.sigma.complement(plant.n_loops())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcGain {
    /// `p x m`
    pub gu: DMatrix<f64>,
    /// `p x n_w`
    pub gw: DMatrix<f64>,
    input_partition: Partition,
    output_partition: Partition,
}

impl DcGain {
    pub fn gu_block(&self, rows: &OrderedIndexSet, cols: &OrderedIndexSet) -> DMatrix<f64> {
        gather(
            &self.gu,
            &self.output_partition.scalar_indices(rows),
            &self.input_partition.scalar_indices(cols),
        )
    }

    pub fn gw_rows(&self, rows: &OrderedIndexSet) -> DMatrix<f64> {
        let cols: Vec<usize> = (0..self.gw.ncols()).collect();
        gather(&self.gw, &self.output_partition.scalar_indices(rows), &cols)
    }
}

/// `Gu = -C A⁻¹ Bu + Du`, `Gw = -C A⁻¹ Bw + Dw`.
pub fn dc_gain(plant: &LtiPlant) -> DcGain {
    let ca = &plant.c * &plant.a_inv;
    DcGain {
        gu: -(&ca * &plant.bu) + &plant.du,
        gw: -(&ca * &plant.bw) + &plant.dw,
        input_partition: plant.input_partition.clone(),
        output_partition: plant.output_partition.clone(),
    }
}

/// `-G^u_{σσ} K_σ`, partitioned by the output sizes of `σ`.
pub fn neg_gain_matrix(
    plant: &LtiPlant,
    design: &GainDesign,
    s: &OrderedIndexSet,
) -> Result<PartitionedMatrix> {
    design.validate(plant)?;
    let g = dc_gain(plant);
    let m = -(g.gu_block(s, s) * design.k_sub(s));
    PartitionedMatrix::new(m, plant.output_partition.restrict(s)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x: DVector<f64>,
    /// Integrator states of the closed loops, stacked in `σ` order.
    pub eta_sigma: DVector<f64>,
}

/// Rejects `σ` when `-G^u_{σσ} K_σ` is not Hurwitz; returns that matrix otherwise.
pub fn check_configuration(
    plant: &LtiPlant,
    design: &GainDesign,
    s: &OrderedIndexSet,
) -> Result<Option<PartitionedMatrix>> {
    design.validate(plant)?;
    if s.is_empty() {
        return Ok(None);
    }
    let ngk = neg_gain_matrix(plant, design, s)?;
    let abscissa = lyap::spectral_abscissa(ngk.data())?.abscissa;
    if !(abscissa < -DEFAULT_HURWITZ_TOL) {
        return Err(Error::ConfigurationRejected {
            sigma: s.to_one_based(),
            abscissa,
        });
    }
    Ok(Some(ngk))
}

/// The unique equilibrium of the closed loop under `config`.
pub fn equilibrium(
    plant: &LtiPlant,
    design: &GainDesign,
    config: &LoopConfiguration,
) -> Result<Equilibrium> {
    let s = &config.sigma;
    let open = config.open_loops(plant);
    let ngk = check_configuration(plant, design, s)?;
    let g = dc_gain(plant);
    let eta = match ngk {
        None => DVector::zeros(0),
        Some(ngk) => {
            let rhs = g.gu_block(s, &open) * &config.u_open + g.gw_rows(s) * &config.w;
            ngk.data().clone().lu().solve(&rhs).ok_or(Error::Singular {
                condition: f64::INFINITY,
            })?
        }
    };
    let forcing = plant.bu_sub(s) * design.k_sub(s) * &eta
        + plant.bu_sub(&open) * &config.u_open
        + &plant.bw * &config.w;
    let x = -(&plant.a_inv * forcing);
    Ok(Equilibrium { x, eta_sigma: eta })
}

/// Closed-loop matrices in the shifted coordinates `ξ = x - Πu_σ K_σ η_σ - Πu_σ̄ u_σ̄ - Πw w`
/// (`a_sig`, `b_sig`) and in the original coordinates `(x, η_σ)` (`a_direct`, `b_direct`).
/// Both input matrices act on `(u_σ̄, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRealization {
    pub a_sig: DMatrix<f64>,
    pub b_sig: DMatrix<f64>,
    pub a_direct: DMatrix<f64>,
    pub b_direct: DMatrix<f64>,
    pub equilibrium: Equilibrium,
    pub n_states: usize,
    pub n_integrators: usize,
}

fn block2(
    tl: &DMatrix<f64>,
    tr: &DMatrix<f64>,
    bl: &DMatrix<f64>,
    br: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (r1, c1) = (tl.nrows().max(tr.nrows()), tl.ncols().max(bl.ncols()));
    let (r2, c2) = (bl.nrows().max(br.nrows()), tr.ncols().max(br.ncols()));
    let mut m = DMatrix::zeros(r1 + r2, c1 + c2);
    m.view_mut((0, 0), (tl.nrows(), tl.ncols())).copy_from(tl);
    m.view_mut((0, c1), (tr.nrows(), tr.ncols())).copy_from(tr);
    m.view_mut((r1, 0), (bl.nrows(), bl.ncols())).copy_from(bl);
    m.view_mut((r1, c1), (br.nrows(), br.ncols())).copy_from(br);
    m
}

pub fn closed_loop(
    plant: &LtiPlant,
    design: &GainDesign,
    config: &LoopConfiguration,
) -> Result<ClosedLoopRealization> {
    let eq = equilibrium(plant, design, config)?;
    let s = &config.sigma;
    let open = config.open_loops(plant);
    let g = dc_gain(plant);
    let k = design.k_sub(s);
    let eps = DMatrix::from_diagonal(&design.eps_diag(plant, s));
    let c_s = plant.c_sub(s);
    let pi_k = -(&plant.a_inv * plant.bu_sub(s)) * &k;
    let gk = g.gu_block(s, s) * &k;
    let g_open = g.gu_block(s, &open);
    let gw = g.gw_rows(s);

    let a_sig = block2(
        &(plant.a() + &pi_k * &eps * &c_s),
        &(&pi_k * &eps * &gk),
        &(-(&eps * &c_s)),
        &(-(&eps * &gk)),
    );
    let b_sig = block2(
        &(&pi_k * &eps * &g_open),
        &(&pi_k * &eps * &gw),
        &(-(&eps * &g_open)),
        &(-(&eps * &gw)),
    );

    let a_direct = block2(
        plant.a(),
        &(plant.bu_sub(s) * &k),
        &(-(&eps * &c_s)),
        &(-(&eps * plant.du_sub(s, s) * &k)),
    );
    let b_direct = block2(
        &plant.bu_sub(&open),
        plant.bw(),
        &(-(&eps * plant.du_sub(s, &open))),
        &(-(&eps * plant.dw_sub(s))),
    );
    let n_int = c_s.nrows();
    Ok(ClosedLoopRealization {
        a_sig,
        b_sig,
        a_direct,
        b_direct,
        equilibrium: eq,
        n_states: plant.n_states(),
        n_integrators: n_int,
    })
}

/// All nonempty loop sets in lexicographic order of their sorted index lists.
pub fn enumerate_configurations(n_loops: usize) -> Result<Vec<OrderedIndexSet>> {
    if n_loops > MAX_LOOPS {
        return Err(Error::TooManyLoops(n_loops));
    }
    let mut sets: Vec<Vec<usize>> = (1u32..(1u32 << n_loops))
        .map(|mask| (0..n_loops).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    sets.sort();
    sets.into_iter()
        .map(|v| OrderedIndexSet::new(v, n_loops))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonStarRow {
    /// One-based loop indices.
    pub sigma: Vec<usize>,
    pub m_estimate: Option<f64>,
    pub c1: f64,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub eps_star_sigma: Option<f64>,
    /// Why `eps_star_sigma` is missing, if it is.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonStarReport {
    /// Minimum of `eps_star_sigma` over all nonempty `σ`; `None` if any is not established.
    pub eps_star: Option<f64>,
    pub rows: Vec<EpsilonStarRow>,
    pub m_provenance: String,
    pub lambda_min_qf: f64,
    pub pf_norm: f64,
    /// `σ = ∅` imposes no constraint and is not enumerated.
    pub empty_sigma_included: bool,
}

fn check_pd(q: &DMatrix<f64>, n: usize, what: &str) -> Result<f64> {
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "{what} must be {n}x{n}, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let lmin = lyap::lambda_min_sym(q);
    if !(lmin > 0.0) || (q - q.transpose()).amax() > 1e-12 * (1.0 + q.amax()) {
        return Err(Error::InvalidInput(format!(
            "{what} must be symmetric positive definite"
        )));
    }
    Ok(lmin)
}

struct SharedConstants {
    pf_norm: f64,
    lambda_min_qf: f64,
}

fn shared_constants(plant: &LtiPlant, qf: &DMatrix<f64>) -> Result<SharedConstants> {
    let lambda_min_qf = check_pd(qf, plant.n_states(), "Qf")?;
    let pf = lyap::solve_lyapunov(plant.a(), qf)?;
    Ok(SharedConstants {
        pf_norm: lyap::spectral_norm(&pf.p),
        lambda_min_qf,
    })
}

/// `Q_s` restricted to the outputs of `σ`.
pub fn qs_for(plant: &LtiPlant, qs: &DMatrix<f64>, s: &OrderedIndexSet) -> Result<DMatrix<f64>> {
    check_pd(qs, plant.n_outputs(), "Qs")?;
    let idx = plant.output_indices(s);
    Ok(gather(qs, &idx, &idx))
}

fn sigma_row(
    plant: &LtiPlant,
    design: &GainDesign,
    shared: &SharedConstants,
    qs: &DMatrix<f64>,
    s: &OrderedIndexSet,
    m: Option<f64>,
) -> Result<EpsilonStarRow> {
    let g = dc_gain(plant);
    let k = design.k_sub(s);
    let pi_k = -(&plant.a_inv * plant.bu_sub(s)) * &k;
    let c_norm = lyap::spectral_norm(&plant.c_sub(s));
    let pik_norm = lyap::spectral_norm(&pi_k);
    let gk_norm = lyap::spectral_norm(&(g.gu_block(s, s) * &k));
    let c1 = 2.0 * shared.pf_norm * pik_norm * c_norm;
    let lmin_qs = lyap::lambda_min_sym(&qs_for(plant, qs, s)?);
    let mut row = EpsilonStarRow {
        sigma: s.to_one_based(),
        m_estimate: m,
        c1,
        c2: None,
        c3: None,
        eps_star_sigma: None,
        note: None,
    };
    match m {
        Some(m) => {
            let c2 = shared.pf_norm * pik_norm * gk_norm + m * c_norm;
            let c3 = c1 + c2 * c2 / lmin_qs;
            row.c2 = Some(c2);
            row.c3 = Some(c3);
            row.eps_star_sigma = Some(shared.lambda_min_qf / c3);
        }
        None => row.note = Some("M estimate unavailable".into()),
    }
    Ok(row)
}

fn assemble_report(rows: Vec<EpsilonStarRow>, shared: &SharedConstants) -> EpsilonStarReport {
    let all: Option<Vec<f64>> = rows.iter().map(|r| r.eps_star_sigma).collect();
    EpsilonStarReport {
        eps_star: all.map(|v| v.into_iter().fold(f64::INFINITY, f64::min)),
        rows,
        m_provenance: M_PROVENANCE.to_string(),
        lambda_min_qf: shared.lambda_min_qf,
        pf_norm: shared.pf_norm,
        empty_sigma_included: false,
    }
}

/// `ε* = min_σ λ_min(Q_f) / c₃^σ` from supplied `M^σ` values.
pub fn epsilon_star(
    plant: &LtiPlant,
    design: &GainDesign,
    qf: &DMatrix<f64>,
    qs: &DMatrix<f64>,
    m_estimates: &BTreeMap<OrderedIndexSet, f64>,
) -> Result<EpsilonStarReport> {
    design.validate(plant)?;
    let shared = shared_constants(plant, qf)?;
    let mut rows = Vec::new();
    for s in enumerate_configurations(plant.n_loops())? {
        check_configuration(plant, design, &s)?;
        let m = *m_estimates.get(&s).ok_or_else(|| Error::MissingMEstimate {
            sigma: s.to_one_based(),
        })?;
        rows.push(sigma_row(plant, design, &shared, qs, &s, Some(m))?);
    }
    Ok(assemble_report(rows, &shared))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MEstimate {
    pub sigma: Vec<usize>,
    /// `max_observed * M_SAFETY_FACTOR` when the probe looked bounded.
    pub value: Option<f64>,
    pub verdict: DStabilityVerdict,
    pub probe: BoundednessReport,
    pub provenance: String,
}

/// Probes `-G^u_{σσ} K_σ` with `Q = Q_s` (spectral norm) and turns the
/// observed supremum into an estimate of `M^σ`.
pub fn estimate_m(
    plant: &LtiPlant,
    design: &GainDesign,
    s: &OrderedIndexSet,
    qs: &DMatrix<f64>,
    probe: &ProbeConfig,
) -> Result<MEstimate> {
    let ngk = neg_gain_matrix(plant, design, s)?;
    estimate_m_for_matrix(&ngk, &qs_for(plant, qs, s)?, probe, s.to_one_based())
}

/// [`estimate_m`] on an arbitrary partitioned gain matrix.
pub fn estimate_m_for_matrix(
    ngk: &PartitionedMatrix,
    qs: &DMatrix<f64>,
    probe: &ProbeConfig,
    sigma: Vec<usize>,
) -> Result<MEstimate> {
    let cfg = ProbeConfig {
        norm: lyap::NormKind::Spectral,
        ..probe.clone()
    };
    let verdict = dstab::sample_dstability(ngk, cfg.sample_budget, cfg.seed, cfg.tol);
    let report = dstab::probe_robustness(ngk, qs, &cfg)?;
    let value = (report.classification == Classification::BoundedConsistent)
        .then(|| report.max_observed * M_SAFETY_FACTOR);
    Ok(MEstimate {
        sigma,
        value,
        verdict,
        probe: report,
        provenance: M_PROVENANCE.to_string(),
    })
}

/// Runs [`estimate_m`] for every nonempty `σ` (concurrently, merged in
/// lexicographic order) and evaluates `ε*` from the estimates.
pub fn epsilon_star_probed(
    plant: &LtiPlant,
    design: &GainDesign,
    qf: &DMatrix<f64>,
    qs: &DMatrix<f64>,
    probe: &ProbeConfig,
) -> Result<(EpsilonStarReport, Vec<MEstimate>)> {
    design.validate(plant)?;
    let shared = shared_constants(plant, qf)?;
    let sets = enumerate_configurations(plant.n_loops())?;
    let estimates: Vec<MEstimate> = sets
        .par_iter()
        .map(|s| estimate_m(plant, design, s, qs, probe))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(sets.len());
    for (s, est) in sets.iter().zip(&estimates) {
        let mut row = sigma_row(plant, design, &shared, qs, s, est.value)?;
        if est.value.is_none() {
            row.note = Some(format!(
                "M estimate unavailable: probe reported {:?}",
                est.probe.classification
            ));
        }
        rows.push(row);
    }
    Ok((assemble_report(rows, &shared), estimates))
}
