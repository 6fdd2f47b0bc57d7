//! Block-partitioned matrices: partitions, ordered index sets, submatrices,
//! Schur complements, block permutations and positive block scalings.
//!
//! Block indices are zero-based inside the crate. The JSON formats and the
//! CLI use one-based indices; convert with [`OrderedIndexSet::from_one_based`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition-number threshold above which a diagonal block is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Block sizes `(n_1, ..., n_N)` of a square partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl Partition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition(
                "partition needs at least one block".into(),
            ));
        }
        if let Some(pos) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!(
                "block {} has size 0",
                pos + 1
            )));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Partition { sizes, offsets })
    }

    /// `n` blocks of size one.
    pub fn scalar(n: usize) -> Result<Self> {
        Partition::new(vec![1; n])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    pub fn size(&self, block: usize) -> usize {
        self.sizes[block]
    }

    /// Scalar row/column indices covered by `block`.
    pub fn range(&self, block: usize) -> std::ops::Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    /// Scalar indices covered by the blocks of `set`, in the set's order.
    pub fn scalar_indices(&self, set: &OrderedIndexSet) -> Vec<usize> {
        set.iter().flat_map(|b| self.range(b)).collect()
    }

    /// Partition of the blocks selected by `set`, in the set's order.
    pub fn restrict(&self, set: &OrderedIndexSet) -> Result<Partition> {
        Partition::new(set.iter().map(|b| self.sizes[b]).collect())
    }

    /// Partition obtained by reordering blocks with `perm`.
    pub fn permuted(&self, perm: &BlockPermutation) -> Partition {
        Partition::new(perm.as_slice().iter().map(|&b| self.sizes[b]).collect())
            .expect("permuting a valid partition")
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Partition::new(v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.sizes
    }
}

/// An ordered selection of distinct block indices (zero-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderedIndexSet {
    indices: Vec<usize>,
}

impl OrderedIndexSet {
    pub fn new(indices: Vec<usize>, n_blocks: usize) -> Result<Self> {
        let mut seen = vec![false; n_blocks];
        for &i in &indices {
            if i >= n_blocks {
                return Err(Error::IndexOutOfRange {
                    index: i + 1,
                    n_blocks,
                });
            }
            if seen[i] {
                return Err(Error::DuplicateIndex(i + 1));
            }
            seen[i] = true;
        }
        Ok(OrderedIndexSet { indices })
    }

    /// Builds a set from one-based indices as used in external formats.
    pub fn from_one_based(indices: &[usize], n_blocks: usize) -> Result<Self> {
        let zero: Vec<usize> = indices
            .iter()
            .map(|&i| {
                if i == 0 {
                    Err(Error::IndexOutOfRange { index: 0, n_blocks })
                } else {
                    Ok(i - 1)
                }
            })
            .collect::<Result<_>>()?;
        OrderedIndexSet::new(zero, n_blocks)
    }

    /// All blocks in natural order.
    pub fn full(n_blocks: usize) -> Self {
        OrderedIndexSet {
            indices: (0..n_blocks).collect(),
        }
    }

    pub fn empty() -> Self {
        OrderedIndexSet {
            indices: Vec::new(),
        }
    }

    /// Blocks not in `self`, in natural order.
    pub fn complement(&self, n_blocks: usize) -> Self {
        OrderedIndexSet {
            indices: (0..n_blocks)
                .filter(|i| !self.indices.contains(i))
                .collect(),
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }
}

/// A point `d` of the positive orthant; stands for `blkdiag(d_1 I, ..., d_N I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BlockScaling(Vec<f64>);

impl BlockScaling {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidScaling("empty scaling".into()));
        }
        if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidScaling(format!(
                "entry {bad} is not positive and finite"
            )));
        }
        Ok(BlockScaling(d))
    }

    pub fn ones(n: usize) -> Self {
        BlockScaling(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::MAX, f64::min)
    }

    /// Rescaled so that the largest entry is exactly one.
    pub fn normalized(&self) -> Self {
        let m = self.max();
        BlockScaling(self.0.iter().map(|v| v / m).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        BlockScaling::new(self.0.iter().map(|v| v * c).collect())
    }

    /// Entries reordered by `perm` (new entry `l` is old entry `perm[l]`).
    pub fn permuted(&self, perm: &BlockPermutation) -> Self {
        BlockScaling(perm.as_slice().iter().map(|&b| self.0[b]).collect())
    }
}

impl TryFrom<Vec<f64>> for BlockScaling {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        BlockScaling::new(v)
    }
}

impl From<BlockScaling> for Vec<f64> {
    fn from(d: BlockScaling) -> Self {
        d.0
    }
}

/// A bijection on block indices. Entry `l` names the old block placed at position `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPermutation(Vec<usize>);

impl BlockPermutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n {
                return Err(Error::NotAPermutation {
                    n,
                    detail: format!("index {} out of range", i + 1),
                });
            }
            if seen[i] {
                return Err(Error::NotAPermutation {
                    n,
                    detail: format!("index {} repeated", i + 1),
                });
            }
            seen[i] = true;
        }
        Ok(BlockPermutation(order))
    }

    pub fn identity(n: usize) -> Self {
        BlockPermutation((0..n).collect())
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (pos, &b) in self.0.iter().enumerate() {
            inv[b] = pos;
        }
        BlockPermutation(inv)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_index_set(&self) -> OrderedIndexSet {
        OrderedIndexSet {
            indices: self.0.clone(),
        }
    }
}

/// Square real matrix with a block partition of its rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedMatrix {
    data: DMatrix<f64>,
    partition: Partition,
}

impl PartitionedMatrix {
    pub fn new(data: DMatrix<f64>, partition: Partition) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch {
                context: "partitioned matrix must be square",
                expected: data.nrows(),
                got: data.ncols(),
            });
        }
        if data.nrows() != partition.total() {
            return Err(Error::DimensionMismatch {
                context: "partition total vs matrix dimension",
                expected: partition.total(),
                got: data.nrows(),
            });
        }
        Ok(PartitionedMatrix { data, partition })
    }

    /// Matrix with every scalar entry its own block.
    pub fn scalar_blocks(data: DMatrix<f64>) -> Result<Self> {
        let p = Partition::scalar(data.nrows())?;
        PartitionedMatrix::new(data, p)
    }

    pub fn from_rows(rows: &[Vec<f64>], sizes: Vec<usize>) -> Result<Self> {
        let m = matrix_from_rows(rows)?;
        PartitionedMatrix::new(m, Partition::new(sizes)?)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn n_blocks(&self) -> usize {
        self.partition.n_blocks()
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    /// Same partition, new data (e.g. `A + B`).
    pub fn with_data(&self, data: DMatrix<f64>) -> Result<Self> {
        PartitionedMatrix::new(data, self.partition.clone())
    }
}

/// JSON form `{"partition": [...], "data": [[row], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub partition: Vec<usize>,
    pub data: Vec<Vec<f64>>,
}

impl TryFrom<MatrixJson> for PartitionedMatrix {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        PartitionedMatrix::from_rows(&j.data, j.partition)
    }
}

impl From<&PartitionedMatrix> for MatrixJson {
    fn from(m: &PartitionedMatrix) -> Self {
        MatrixJson {
            partition: m.partition.sizes().to_vec(),
            data: matrix_to_rows(&m.data),
        }
    }
}

impl Serialize for PartitionedMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PartitionedMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        PartitionedMatrix::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// Row-major nested vectors to a dense matrix. Rejects ragged input.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::InvalidInput(format!(
                "row {} has {} entries, expected {}",
                i + 1,
                r.len(),
                ncols
            )));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// `blkdiag(d_1 I_{n_1}, ..., d_N I_{n_N})`.
pub fn expand_scaling(d: &BlockScaling, p: &Partition) -> Result<DMatrix<f64>> {
    Ok(DMatrix::from_diagonal(&expand_scaling_diag(d, p)?))
}

/// Diagonal of [`expand_scaling`] as a vector.
pub fn expand_scaling_diag(d: &BlockScaling, p: &Partition) -> Result<DVector<f64>> {
    if d.len() != p.n_blocks() {
        return Err(Error::DimensionMismatch {
            context: "scaling length vs partition block count",
            expected: p.n_blocks(),
            got: d.len(),
        });
    }
    let mut diag = DVector::zeros(p.total());
    for (b, &v) in d.as_slice().iter().enumerate() {
        for i in p.range(b) {
            diag[i] = v;
        }
    }
    Ok(diag)
}

/// Gathers the scalar submatrix of rows `rows` and columns `cols`.
pub(crate) fn gather(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// The block submatrix `A_{alpha,beta}`.
///
/// The result is square only when `alpha` and `beta` select blocks of equal
/// total size; a rectangular selection is returned as a plain matrix through
/// [`submatrix_rect`]. Here both sets must give a square result.
pub fn submatrix(
    a: &PartitionedMatrix,
    alpha: &OrderedIndexSet,
    beta: &OrderedIndexSet,
) -> Result<PartitionedMatrix> {
    let m = submatrix_rect(a, alpha, beta)?;
    if alpha == beta {
        return PartitionedMatrix::new(m, a.partition.restrict(alpha)?);
    }
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: "non-square block submatrix",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    // Off-diagonal selections with matching sizes keep the row partition.
    PartitionedMatrix::new(m, a.partition.restrict(alpha)?)
}

/// `A_{alpha,beta}` as a dense (possibly rectangular) matrix.
pub fn submatrix_rect(
    a: &PartitionedMatrix,
    alpha: &OrderedIndexSet,
    beta: &OrderedIndexSet,
) -> Result<DMatrix<f64>> {
    let n = a.n_blocks();
    for set in [alpha, beta] {
        // Re-validate: sets may have been built against another partition.
        OrderedIndexSet::new(set.as_slice().to_vec(), n)?;
    }
    let rows = a.partition.scalar_indices(alpha);
    let cols = a.partition.scalar_indices(beta);
    Ok(gather(&a.data, &rows, &cols))
}

/// Largest over smallest singular value; infinite for exactly singular input.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Schur complement `A / A_{alpha,alpha} = A_{ab,ab} - A_{ab,a} A_{a,a}^{-1} A_{a,ab}`
/// where `ab` is the complement of `alpha` in natural order.
pub fn schur_complement(
    a: &PartitionedMatrix,
    alpha: &OrderedIndexSet,
) -> Result<PartitionedMatrix> {
    let n = a.n_blocks();
    let alpha = OrderedIndexSet::new(alpha.as_slice().to_vec(), n)?;
    let rest = alpha.complement(n);
    if rest.is_empty() {
        return Err(Error::InvalidInput(
            "Schur complement of the full matrix is empty".into(),
        ));
    }
    let a_aa = submatrix_rect(a, &alpha, &alpha)?;
    let a_ra = submatrix_rect(a, &rest, &alpha)?;
    let a_ar = submatrix_rect(a, &alpha, &rest)?;
    let a_rr = submatrix_rect(a, &rest, &rest)?;
    if alpha.is_empty() {
        return PartitionedMatrix::new(a_rr, a.partition.restrict(&rest)?);
    }
    let condition = condition_estimate(&a_aa);
    if !(condition < SINGULAR_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let lu = a_aa.full_piv_lu();
    let x = lu.solve(&a_ar).ok_or(Error::Singular { condition })?;
    PartitionedMatrix::new(a_rr - a_ra * x, a.partition.restrict(&rest)?)
}

/// Block permutation matrix `S` with `S A S^T = A_{perm,perm}` for any `A`
/// conformal with `p`.
pub fn block_permutation(p: &Partition, perm: &BlockPermutation) -> Result<DMatrix<f64>> {
    if perm.len() != p.n_blocks() {
        return Err(Error::NotAPermutation {
            n: p.n_blocks(),
            detail: format!("permutation has {} entries", perm.len()),
        });
    }
    let n = p.total();
    let mut s = DMatrix::zeros(n, n);
    let mut row = 0;
    for &b in perm.as_slice() {
        for col in p.range(b) {
            s[(row, col)] = 1.0;
            row += 1;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a0() -> PartitionedMatrix {
        PartitionedMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, -2.0]], vec![1, 1]).unwrap()
    }

    #[test]
    fn partition_rejects_zero_and_empty() {
        assert!(Partition::new(vec![]).is_err());
        assert!(Partition::new(vec![2, 0]).is_err());
        let p = Partition::new(vec![2, 1, 3]).unwrap();
        assert_eq!(p.total(), 6);
        assert_eq!(p.range(2), 3..6);
    }

    #[test]
    fn expand_scaling_cases() {
        let p = Partition::new(vec![2, 1]).unwrap();
        assert_eq!(
            expand_scaling(&BlockScaling::ones(2), &p).unwrap(),
            DMatrix::identity(3, 3)
        );
        let p = Partition::scalar(2).unwrap();
        let d = BlockScaling::new(vec![2.0, 3.0]).unwrap();
        assert_eq!(
            expand_scaling(&d, &p).unwrap(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))
        );
        let err = expand_scaling(&BlockScaling::ones(3), &p).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                got: 3,
                ..
            }
        ));
    }

    #[test]
    fn scaled_a0_trace_and_det() {
        for &(d1, d2) in &[(1.0, 1.0), (3.0, 0.5), (250.0, 1.0)] {
            let d = BlockScaling::new(vec![d1, d2]).unwrap();
            let da = expand_scaling(&d, a0().partition()).unwrap() * a0().data();
            assert!((da.trace() + 2.0 * d2).abs() < 1e-12);
            assert!((da.determinant() - d1 * d2).abs() < 1e-9 * d1 * d2);
        }
    }

    #[test]
    fn scaling_rejects_nonpositive() {
        assert!(BlockScaling::new(vec![1.0, 0.0]).is_err());
        assert!(BlockScaling::new(vec![1.0, f64::NAN]).is_err());
        assert!(BlockScaling::new(vec![-1.0]).is_err());
    }

    #[test]
    fn submatrix_full_is_identity_op() {
        let a = PartitionedMatrix::from_rows(
            &[
                vec![1.0, 2.0, 3.0],
                vec![4.0, 5.0, 6.0],
                vec![7.0, 8.0, 9.0],
            ],
            vec![2, 1],
        )
        .unwrap();
        let full = OrderedIndexSet::full(2);
        assert_eq!(submatrix(&a, &full, &full).unwrap(), a);
    }

    #[test]
    fn submatrix_scalar_block_of_a0() {
        let s = OrderedIndexSet::from_one_based(&[2], 2).unwrap();
        let sub = submatrix(&a0(), &s, &s).unwrap();
        assert_eq!(sub.data()[(0, 0)], -2.0);
    }

    #[test]
    fn submatrix_non_monotone_matches_gather_loop() {
        let p = Partition::new(vec![1, 2, 2]).unwrap();
        let data = DMatrix::from_fn(5, 5, |i, j| (10 * i + j) as f64);
        let a = PartitionedMatrix::new(data.clone(), p.clone()).unwrap();
        let alpha = OrderedIndexSet::from_one_based(&[3, 1], 3).unwrap();
        let sub = submatrix(&a, &alpha, &alpha).unwrap();
        // brute force: walk the blocks in the given order
        let mut idx = Vec::new();
        for b in [2usize, 0] {
            let start: usize = p.sizes()[..b].iter().sum();
            for k in 0..p.sizes()[b] {
                idx.push(start + k);
            }
        }
        for (i, &r) in idx.iter().enumerate() {
            for (j, &c) in idx.iter().enumerate() {
                assert_eq!(sub.data()[(i, j)], data[(r, c)]);
            }
        }
        assert_eq!(sub.partition().sizes(), &[2, 1]);
        // (1,1) slot holds A_{3,3}
        assert_eq!(sub.data()[(0, 0)], data[(3, 3)]);
    }

    #[test]
    fn index_set_errors() {
        assert!(matches!(
            OrderedIndexSet::new(vec![0, 0], 2),
            Err(Error::DuplicateIndex(1))
        ));
        assert!(matches!(
            OrderedIndexSet::new(vec![2], 2),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(OrderedIndexSet::from_one_based(&[0], 2).is_err());
    }

    #[test]
    fn schur_of_block_diagonal_is_unchanged() {
        let data = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, 0.5, -3.0, 0.0, 0.0, 0.0, -4.0]);
        let a = PartitionedMatrix::new(data, Partition::new(vec![2, 1]).unwrap()).unwrap();
        let s = schur_complement(&a, &OrderedIndexSet::new(vec![1], 2).unwrap()).unwrap();
        assert_eq!(
            s.data(),
            &DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.5, -3.0])
        );
        let s = schur_complement(&a, &OrderedIndexSet::new(vec![0], 2).unwrap()).unwrap();
        assert_eq!(s.data()[(0, 0)], -4.0);
    }

    #[test]
    fn schur_of_a0() {
        let s =
            schur_complement(&a0(), &OrderedIndexSet::from_one_based(&[2], 2).unwrap()).unwrap();
        assert!((s.data()[(0, 0)] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn schur_singular_block_reports_condition() {
        let a = PartitionedMatrix::from_rows(
            &[
                vec![1.0, 1.0, 0.0],
                vec![1.0, 1.0, 0.0],
                vec![0.0, 1.0, 1.0],
            ],
            vec![2, 1],
        )
        .unwrap();
        let err = schur_complement(&a, &OrderedIndexSet::new(vec![0], 2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn block_permutation_swaps_blocks() {
        let p = Partition::new(vec![1, 2]).unwrap();
        let perm = BlockPermutation::new(vec![1, 0]).unwrap();
        let s = block_permutation(&p, &perm).unwrap();
        assert_eq!(&s * s.transpose(), DMatrix::identity(3, 3));
        let a =
            PartitionedMatrix::new(DMatrix::from_fn(3, 3, |i, j| (3 * i + j) as f64), p.clone())
                .unwrap();
        let moved = &s * a.data() * s.transpose();
        let expect = submatrix(&a, &perm.as_index_set(), &perm.as_index_set()).unwrap();
        assert_eq!(&moved, expect.data());
        assert_eq!(
            block_permutation(&p, &BlockPermutation::identity(2)).unwrap(),
            DMatrix::identity(3, 3)
        );
        assert!(BlockPermutation::new(vec![0, 0]).is_err());
        assert!(block_permutation(&p, &BlockPermutation::identity(3)).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let j = r#"{"partition":[1,1],"data":[[0,1],[-1,-2]]}"#;
        let m: PartitionedMatrix = serde_json::from_str(j).unwrap();
        assert_eq!(m, a0());
        let back = serde_json::to_string(&m).unwrap();
        let again: PartitionedMatrix = serde_json::from_str(&back).unwrap();
        assert_eq!(again, m);
        assert!(serde_json::from_str::<PartitionedMatrix>(
            r#"{"partition":[2],"data":[[0,1],[1]]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<PartitionedMatrix>(
            r#"{"partition":[3],"data":[[0,1],[1,0]]}"#
        )
        .is_err());
    }
}
