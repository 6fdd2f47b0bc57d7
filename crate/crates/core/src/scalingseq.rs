//! Decomposition of power-law scaling families `d_i(k) = a_i k^{b_i}` into
//! `D(k) = Σᵀ D̃(k) T(k) Σ`: a block permutation `Σ`, a bounded part `D̃(k)`
//! and an ordered scale part `T(k)` whose ratios `τ_i/τ_j` vanish iff `i > j`.
//!
//! For power laws the `limsup d_j/d_i < ∞` test reduces to `b_j <= b_i`, so
//! the rate groups are exactly the classes of equal exponent.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blockmat::{
    block_permutation, expand_scaling, BlockPermutation, BlockScaling, Partition,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScalingFamilyJson", into = "ScalingFamilyJson")]
pub struct ScalingFamily {
    coefficients: Vec<f64>,
    exponents: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingFamilyJson {
    pub coefficients: Vec<f64>,
    pub exponents: Vec<f64>,
}

impl TryFrom<ScalingFamilyJson> for ScalingFamily {
    type Error = Error;
    fn try_from(j: ScalingFamilyJson) -> Result<Self> {
        ScalingFamily::new(j.coefficients, j.exponents)
    }
}

impl From<ScalingFamily> for ScalingFamilyJson {
    fn from(f: ScalingFamily) -> Self {
        ScalingFamilyJson {
            coefficients: f.coefficients,
            exponents: f.exponents,
        }
    }
}

impl ScalingFamily {
    pub fn new(coefficients: Vec<f64>, exponents: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidInput(
                "scaling family needs at least one block".into(),
            ));
        }
        if coefficients.len() != exponents.len() {
            return Err(Error::DimensionMismatch {
                context: "coefficients vs exponents",
                expected: coefficients.len(),
                got: exponents.len(),
            });
        }
        if coefficients.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidInput(
                "coefficients must be positive and finite".into(),
            ));
        }
        if exponents.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("exponents must be finite".into()));
        }
        Ok(ScalingFamily {
            coefficients,
            exponents,
        })
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn entry(&self, i: usize, k: f64) -> f64 {
        self.coefficients[i] * k.powf(self.exponents[i])
    }

    pub fn at(&self, k: f64) -> Result<BlockScaling> {
        BlockScaling::new((0..self.len()).map(|i| self.entry(i, k)).collect())
    }

    /// Family with block labels moved by `perm` (new block `l` is old block `perm[l]`).
    pub fn relabeled(&self, perm: &BlockPermutation) -> Self {
        ScalingFamily {
            coefficients: perm
                .as_slice()
                .iter()
                .map(|&i| self.coefficients[i])
                .collect(),
            exponents: perm.as_slice().iter().map(|&i| self.exponents[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingDecomposition {
    permutation: BlockPermutation,
    /// Rate groups in decreasing-exponent order; indices ascending within a group.
    groups: Vec<Vec<usize>>,
    representatives: Vec<usize>,
    group_exponents: Vec<f64>,
    /// `a_{i*}` of each group, so `τ_l(k) = a_{i*} k^{b_l}`.
    tau_coefficients: Vec<f64>,
    /// Constant entry `a_j / a_{i*}` of `D̃` for every block `j` (original labels).
    tilde_entries: Vec<f64>,
    group_of: Vec<usize>,
    /// `c_l = max_{i,j in group} a_j / a_i`
    group_constants: Vec<f64>,
}

pub fn decompose(f: &ScalingFamily) -> ScalingDecomposition {
    let n = f.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps ascending labels inside each exponent class
    order.sort_by(|&i, &j| {
        f.exponents[j]
            .partial_cmp(&f.exponents[i])
            .expect("finite exponents")
    });

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if f.exponents[g[0]] == f.exponents[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }

    let mut group_of = vec![0; n];
    let mut tilde_entries = vec![0.0; n];
    let mut representatives = Vec::with_capacity(groups.len());
    let mut tau_coefficients = Vec::with_capacity(groups.len());
    let mut group_exponents = Vec::with_capacity(groups.len());
    let mut group_constants = Vec::with_capacity(groups.len());
    for (l, g) in groups.iter().enumerate() {
        let rep = *g.iter().min().unwrap();
        representatives.push(rep);
        tau_coefficients.push(f.coefficients[rep]);
        group_exponents.push(f.exponents[rep]);
        let hi = g
            .iter()
            .map(|&j| f.coefficients[j])
            .fold(f64::MIN, f64::max);
        let lo = g
            .iter()
            .map(|&j| f.coefficients[j])
            .fold(f64::MAX, f64::min);
        group_constants.push(hi / lo);
        for &j in g {
            group_of[j] = l;
            tilde_entries[j] = f.coefficients[j] / f.coefficients[rep];
        }
    }

    ScalingDecomposition {
        permutation: BlockPermutation::new(groups.concat()).expect("groups partition the labels"),
        groups,
        representatives,
        group_exponents,
        tau_coefficients,
        tilde_entries,
        group_of,
        group_constants,
    }
}

impl ScalingDecomposition {
    pub fn permutation(&self) -> &BlockPermutation {
        &self.permutation
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn representatives(&self) -> &[usize] {
        &self.representatives
    }

    pub fn group_exponents(&self) -> &[f64] {
        &self.group_exponents
    }

    pub fn group_constants(&self) -> &[f64] {
        &self.group_constants
    }

    pub fn tau(&self, group: usize, k: f64) -> f64 {
        self.tau_coefficients[group] * k.powf(self.group_exponents[group])
    }

    /// Diagonal entries of `D̃(k)` for the blocks of `group`, in group order.
    /// Constant in `k` for power-law families.
    pub fn tilde_group(&self, group: usize) -> Vec<f64> {
        self.groups[group]
            .iter()
            .map(|&j| self.tilde_entries[j])
            .collect()
    }

    /// Per-block factors `(D̃ entry, τ)` in permuted order.
    fn permuted_factors(&self, k: f64) -> Vec<(f64, f64)> {
        self.permutation
            .as_slice()
            .iter()
            .map(|&j| (self.tilde_entries[j], self.tau(self.group_of[j], k)))
            .collect()
    }

    /// `Σᵀ D̃(k) T(k) Σ` assembled on `partition`.
    pub fn assemble(&self, k: f64, partition: &Partition) -> Result<DMatrix<f64>> {
        if partition.n_blocks() != self.permutation.len() {
            return Err(Error::DimensionMismatch {
                context: "reference partition vs family length",
                expected: self.permutation.len(),
                got: partition.n_blocks(),
            });
        }
        let permuted = partition.permuted(&self.permutation);
        let n = partition.total();
        let mut inner = DMatrix::zeros(n, n);
        for (pos, (tilde, tau)) in self.permuted_factors(k).into_iter().enumerate() {
            for i in permuted.range(pos) {
                inner[(i, i)] = tilde * tau;
            }
        }
        let sigma = block_permutation(partition, &self.permutation)?;
        Ok(sigma.transpose() * inner * sigma)
    }

    pub fn report(&self) -> DecompositionReport {
        DecompositionReport {
            permutation: self.permutation.as_slice().iter().map(|i| i + 1).collect(),
            groups: self
                .groups
                .iter()
                .map(|g| g.iter().map(|i| i + 1).collect())
                .collect(),
            n_groups: self.groups.len(),
            representatives: self.representatives.iter().map(|i| i + 1).collect(),
            group_exponents: self.group_exponents.clone(),
            tau_coefficients: self.tau_coefficients.clone(),
            tilde: (0..self.groups.len())
                .map(|l| self.tilde_group(l))
                .collect(),
            group_constants: self.group_constants.clone(),
        }
    }
}

/// JSON view of a decomposition; block labels are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub permutation: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
    pub n_groups: usize,
    pub representatives: Vec<usize>,
    pub group_exponents: Vec<f64>,
    pub tau_coefficients: Vec<f64>,
    pub tilde: Vec<Vec<f64>>,
    pub group_constants: Vec<f64>,
}

/// Largest entrywise error of the reassembled `D(k)` relative to the
/// magnitude of the corresponding diagonal entry, over all sampled `k`.
pub fn verify_reconstruction(
    f: &ScalingFamily,
    dec: &ScalingDecomposition,
    k_samples: &[f64],
    partition: &Partition,
) -> Result<f64> {
    if f.len() != dec.permutation.len() {
        return Err(Error::DimensionMismatch {
            context: "decomposition vs family length",
            expected: f.len(),
            got: dec.permutation.len(),
        });
    }
    let mut worst: f64 = 0.0;
    for &k in k_samples {
        let recon = dec.assemble(k, partition)?;
        let expect = expand_scaling(&f.at(k)?, partition)?;
        for i in 0..recon.nrows() {
            let scale = expect[(i, i)].abs();
            for j in 0..recon.ncols() {
                worst = worst.max((recon[(i, j)] - expect[(i, j)]).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// `τ_i(k)/τ_j(k)` for every group pair `i < j`, one row per pair, one column per `k`.
pub fn ordering_ratios(dec: &ScalingDecomposition, k_samples: &[f64]) -> Vec<Vec<f64>> {
    let g = dec.n_groups();
    let mut rows = Vec::new();
    for i in 0..g {
        for j in (i + 1)..g {
            rows.push(
                k_samples
                    .iter()
                    .map(|&k| dec.tau(i, k) / dec.tau(j, k))
                    .collect(),
            );
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rate_class() {
        let f = ScalingFamily::new(vec![2.0, 3.0, 5.0], vec![0.0; 3]).unwrap();
        let d = decompose(&f);
        assert_eq!(d.n_groups(), 1);
        assert_eq!(d.permutation(), &BlockPermutation::identity(3));
        assert_eq!(d.tau(0, 17.0), 2.0);
        assert_eq!(d.tilde_group(0), vec![1.0, 1.5, 2.5]);
    }

    #[test]
    fn two_groups_example() {
        let f = ScalingFamily::new(vec![1.0, 2.0, 1.0], vec![1.0, 1.0, -1.0]).unwrap();
        let d = decompose(&f);
        assert_eq!(d.groups(), &[vec![0, 1], vec![2]]);
        assert_eq!(d.n_groups(), 2);
        assert_eq!(d.tau(0, 7.0), 7.0);
        assert_eq!(d.tau(1, 7.0), 1.0 / 7.0);
        assert_eq!(d.tilde_group(0), vec![1.0, 2.0]);
        // hand assembly at k = 7: D = diag(7, 14, 1/7)
        let p = Partition::scalar(3).unwrap();
        let m = d.assemble(7.0, &p).unwrap();
        assert_eq!(
            m,
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![7.0, 14.0, 1.0 / 7.0]))
        );
        assert_eq!(verify_reconstruction(&f, &d, &[7.0], &p).unwrap(), 0.0);
    }

    #[test]
    fn faster_index_leads() {
        let f = ScalingFamily::new(vec![1.0, 1.0], vec![-1.0, 2.0]).unwrap();
        let d = decompose(&f);
        assert_eq!(d.permutation().as_slice(), &[1, 0]);
        assert_eq!(d.groups(), &[vec![1], vec![0]]);
        let r = d.report();
        assert_eq!(r.groups, vec![vec![2], vec![1]]);
    }

    #[test]
    fn reconstruction_on_uneven_partition() {
        let f = ScalingFamily::new(vec![0.5, 4.0, 1.5, 2.0], vec![0.5, -2.0, 0.5, 3.0]).unwrap();
        let d = decompose(&f);
        let p = Partition::new(vec![2, 1, 3, 1]).unwrap();
        let err = verify_reconstruction(&f, &d, &[1.0, 10.0, 1000.0, 1e6], &p).unwrap();
        assert!(err <= 1e-12, "{err}");
        assert!(verify_reconstruction(&f, &d, &[1.0], &Partition::scalar(3).unwrap()).is_err());
    }

    #[test]
    fn invalid_families() {
        assert!(ScalingFamily::new(vec![], vec![]).is_err());
        assert!(ScalingFamily::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(ScalingFamily::new(vec![0.0], vec![1.0]).is_err());
        assert!(ScalingFamily::new(vec![1.0], vec![f64::INFINITY]).is_err());
        assert!(serde_json::from_str::<ScalingFamily>(
            r#"{"coefficients":[1,-2],"exponents":[0,0]}"#
        )
        .is_err());
    }
}
