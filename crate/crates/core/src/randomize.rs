//! Squaring up an overdetermined system `G` (`n_G` rows, `n` unknowns) by a
//! randomizing matrix `A` (`n x n_G`), so that Newton's method can work on
//! the square system `A G`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};

/// Relative residual below which a candidate row counts as dependent on the
/// rows already selected by the leverage-score randomizer.
pub const INDEPENDENCE_THRESHOLD: f64 = 1e-10;

/// Leverage scores within this distance are treated as ties (kept in row order).
const SCORE_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RandomizerKind {
    Fixed,
    Pseudoinverse,
    LeverageScore,
}

impl RandomizerKind {
    pub fn label(self) -> &'static str {
        match self {
            RandomizerKind::Fixed => "FR",
            RandomizerKind::Pseudoinverse => "PIR",
            RandomizerKind::LeverageScore => "LSR",
        }
    }

    /// Whether the randomizer is rebuilt after every accepted step.
    pub fn is_adaptive(self) -> bool {
        !matches!(self, RandomizerKind::Fixed)
    }
}

impl FromStr for RandomizerKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed" => Ok(RandomizerKind::Fixed),
            "pinv" => Ok(RandomizerKind::Pseudoinverse),
            "leverage" => Ok(RandomizerKind::LeverageScore),
            other => Err(format!("unknown randomizer '{other}'")),
        }
    }
}

impl fmt::Display for RandomizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RandomizerKind::Fixed => "fixed",
            RandomizerKind::Pseudoinverse => "pinv",
            RandomizerKind::LeverageScore => "leverage",
        })
    }
}

/// A randomizing matrix, stored densely or as a weighted row selection.
#[derive(Debug, Clone, PartialEq)]
pub enum Randomizer {
    /// Dense `A`. `identity_prefix` marks the `[I Q]` form, whose leading
    /// identity block costs nothing to apply.
    Dense { a: CMatrix, identity_prefix: bool },
    /// Row `r` of `A G` is `weights[r] * G[rows[r]]`.
    Select { rows: Vec<usize>, weights: Vec<f64>, source_rows: usize },
}

impl Randomizer {
    /// Output dimension `n`.
    pub fn output_len(&self) -> usize {
        match self {
            Randomizer::Dense { a, .. } => a.nrows(),
            Randomizer::Select { rows, .. } => rows.len(),
        }
    }

    /// Number of rows `n_G` of the system it applies to.
    pub fn source_len(&self) -> usize {
        match self {
            Randomizer::Dense { a, .. } => a.ncols(),
            Randomizer::Select { source_rows, .. } => *source_rows,
        }
    }

    /// Rows of `G` that must be evaluated to apply `A`; `None` means all.
    pub fn needed_rows(&self) -> Option<&[usize]> {
        match self {
            Randomizer::Dense { .. } => None,
            Randomizer::Select { rows, .. } => Some(rows),
        }
    }

    /// Dense form of `A`.
    pub fn matrix(&self) -> CMatrix {
        match self {
            Randomizer::Dense { a, .. } => a.clone(),
            Randomizer::Select { rows, weights, source_rows } => {
                let mut a = CMatrix::zeros(rows.len(), *source_rows);
                for (r, (&row, &w)) in rows.iter().zip(weights).enumerate() {
                    a[(r, row)] = C64::new(w, 0.0);
                }
                a
            }
        }
    }

    fn dense_ops(a: &CMatrix, identity_prefix: bool, cols: usize) -> u64 {
        let inner = if identity_prefix { a.ncols() - a.nrows() } else { a.ncols() };
        (a.nrows() * inner * cols) as u64
    }

    /// `A m` for an `n_G x c` matrix whose rows are all rows of `G`, or (for
    /// a selection) only the needed rows, in selection order.
    pub fn apply(&self, m: &CMatrix, ops: &mut u64) -> Result<CMatrix> {
        match self {
            Randomizer::Dense { a, identity_prefix } => {
                if m.nrows() != a.ncols() {
                    return Err(Error::DimensionMismatch { expected: a.ncols(), got: m.nrows() });
                }
                *ops += Self::dense_ops(a, *identity_prefix, m.ncols());
                Ok(a * m)
            }
            Randomizer::Select { rows, weights, .. } => {
                if m.nrows() != rows.len() {
                    return Err(Error::DimensionMismatch { expected: rows.len(), got: m.nrows() });
                }
                *ops += (rows.len() * m.ncols()) as u64;
                let mut out = m.clone();
                for (r, &w) in weights.iter().enumerate() {
                    out.row_mut(r).scale_mut(w);
                }
                Ok(out)
            }
        }
    }

    /// Vector form of [`Randomizer::apply`].
    pub fn apply_vec(&self, v: &CVector, ops: &mut u64) -> Result<CVector> {
        let m = CMatrix::from_column_slice(v.len(), 1, v.as_slice());
        let out = self.apply(&m, ops)?;
        Ok(out.column(0).clone_owned())
    }
}

/// `[I Q]` with `Q` drawn entrywise as unit-modulus complex numbers.
pub fn fixed_randomizer<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Result<Randomizer> {
    if k > n {
        return Err(Error::DimensionMismatch { expected: n, got: k });
    }
    let q = CMatrix::from_fn(k, n - k, |_, _| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)));
    fixed_randomizer_from(&q)
}

/// `[I Q]` with a caller-supplied `Q`.
pub fn fixed_randomizer_from(q: &CMatrix) -> Result<Randomizer> {
    let k = q.nrows();
    let mut a = CMatrix::zeros(k, k + q.ncols());
    a.columns_mut(0, k).fill_with_identity();
    a.columns_mut(k, q.ncols()).copy_from(q);
    Ok(Randomizer::Dense { a, identity_prefix: true })
}

/// `A = J_G^+`, so that `A J_G = I` at the current point.
pub fn pinv_randomizer(jg: &CMatrix) -> Result<Randomizer> {
    Ok(Randomizer::Dense { a: linalg::pseudoinverse(jg)?, identity_prefix: false })
}

/// Row order by descending leverage score; near-equal scores keep their
/// original order.
pub fn leverage_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // restore row order inside clusters of tied scores
    let mut start = 0;
    while start < idx.len() {
        let lead = scores[idx[start]];
        let mut end = start + 1;
        while end < idx.len() && (lead - scores[idx[end]]).abs() <= SCORE_TIE {
            end += 1;
        }
        idx[start..end].sort_unstable();
        start = end;
    }
    idx
}

/// Greedy choice of `n` independent rows of `J_G` in descending leverage
/// order, each weighted by the reciprocal of its 2-norm.
pub fn leverage_randomizer(jg: &CMatrix) -> Result<Randomizer> {
    let (rows, n) = jg.shape();
    if rows < n {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let scores = linalg::leverage_scores(jg)?;
    let order = leverage_order(&scores);
    if scores[order[0]] <= 0.0 {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let mut basis: Vec<CVector> = Vec::with_capacity(n);
    let mut chosen = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &r in &order {
        if chosen.len() == n {
            break;
        }
        let row: CVector = jg.row(r).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut res = row.clone();
        // two passes of Gram-Schmidt keep the basis orthonormal to working precision
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&res);
                res -= b * c;
            }
        }
        let rn = res.norm();
        if rn > INDEPENDENCE_THRESHOLD * norm {
            basis.push(res / C64::new(rn, 0.0));
            chosen.push(r);
            weights.push(1.0 / norm);
        }
    }
    if chosen.len() < n {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    Ok(Randomizer::Select { rows: chosen, weights, source_rows: rows })
}

/// Builds the randomizer of the given kind at a Jacobian `J_G`; a fixed
/// randomizer must be supplied by the caller since it does not depend on `J_G`.
pub fn adaptive_randomizer(kind: RandomizerKind, jg: &CMatrix) -> Result<Randomizer> {
    match kind {
        RandomizerKind::Pseudoinverse => pinv_randomizer(jg),
        RandomizerKind::LeverageScore => leverage_randomizer(jg),
        RandomizerKind::Fixed => Err(Error::Invalid("fixed randomizers are not rebuilt".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rmat(rows: usize, cols: usize, v: &[f64]) -> CMatrix {
        CMatrix::from_fn(rows, cols, |i, j| C64::new(v[i * cols + j], 0.0))
    }

    #[test]
    fn fixed_shape_and_identity_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = fixed_randomizer(3, 5, &mut rng).unwrap();
        let a = r.matrix();
        assert_eq!(a.shape(), (3, 5));
        assert_eq!(a.columns(0, 3).clone_owned(), CMatrix::identity(3, 3));
        assert!(a.columns(3, 2).iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        let sq = fixed_randomizer(4, 4, &mut rng).unwrap();
        assert_eq!(sq.matrix(), CMatrix::identity(4, 4));
        assert!(fixed_randomizer(5, 4, &mut rng).is_err());
    }

    #[test]
    fn pinv_makes_identity() {
        let j = rmat(4, 2, &[1.0, 2.0, 0.0, 1.0, 3.0, -1.0, 2.0, 2.0]);
        let a = pinv_randomizer(&j).unwrap().matrix();
        assert!((a * &j - CMatrix::identity(2, 2)).norm() < 1e-13);
    }

    #[test]
    fn leverage_picks_independent_rows_and_skips_duplicates() {
        // rows 0 and 1 are equal, row 2 independent
        let j = rmat(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let r = leverage_randomizer(&j).unwrap();
        match &r {
            Randomizer::Select { rows, weights, .. } => {
                assert_eq!(rows, &vec![2, 0]);
                assert_eq!(weights, &vec![1.0, 1.0]);
            }
            _ => panic!("expected a selection"),
        }
        let mut ops = 0;
        let needed = r.needed_rows().unwrap().to_vec();
        let sub = CMatrix::from_fn(needed.len(), 2, |i, k| j[(needed[i], k)]);
        let aj = r.apply(&sub, &mut ops).unwrap();
        assert!((aj - r.matrix() * &j).norm() == 0.0);
    }

    #[test]
    fn leverage_rejects_rank_deficient() {
        let j = rmat(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        assert!(matches!(leverage_randomizer(&j), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn tie_order_is_stable() {
        let s = [0.5, 1.0, 0.5 + 1e-15, 1.0 - 1e-14, 0.2];
        assert_eq!(leverage_order(&s), vec![1, 3, 0, 2, 4]);
    }

    #[test]
    fn dense_apply_counts_only_q_block() {
        let q = rmat(2, 1, &[1.0, 2.0]);
        let r = fixed_randomizer_from(&q).unwrap();
        let mut ops = 0;
        let v = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let out = r.apply_vec(&v, &mut ops).unwrap();
        assert_eq!(out, CVector::from_vec(vec![C64::new(2.0, 0.0), C64::new(3.0, 0.0)]));
        assert_eq!(ops, 2);
    }
}
