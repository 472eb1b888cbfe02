//! Sparse polynomial systems in variables `x` and parameters `p`.
//!
//! A system lives on a product of projective and affine spaces described by
//! [`VarStructure`]. Exponent vectors cover all variables followed by all
//! parameters, so a single differentiation path serves both `J_x` and the
//! parameter-direction derivative. Gradients are compiled once at
//! construction.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Range, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Projective,
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarGroup {
    pub kind: GroupKind,
    /// Number of coordinates (homogeneous coordinates for projective groups).
    pub size: usize,
}

impl VarGroup {
    pub fn projective(size: usize) -> Self {
        Self { kind: GroupKind::Projective, size }
    }

    pub fn affine(size: usize) -> Self {
        Self { kind: GroupKind::Affine, size }
    }
}

/// Variable layout: ordered groups followed by the parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarStructure {
    pub groups: Vec<VarGroup>,
    pub param_count: usize,
}

impl VarStructure {
    pub fn new(groups: Vec<VarGroup>, param_count: usize) -> Result<Self> {
        if groups.is_empty() || groups.iter().any(|g| g.size == 0) {
            return Err(Error::Invalid("variable groups must be nonempty".into()));
        }
        Ok(Self { groups, param_count })
    }

    pub fn num_vars(&self) -> usize {
        self.groups.iter().map(|g| g.size).sum()
    }

    /// Exponent slots: variables then parameters.
    pub fn width(&self) -> usize {
        self.num_vars() + self.param_count
    }

    pub fn group_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.groups
            .iter()
            .map(|g| {
                let r = start..start + g.size;
                start += g.size;
                r
            })
            .collect()
    }

    /// Ranges of the projective groups only.
    pub fn projective_ranges(&self) -> Vec<Range<usize>> {
        self.groups
            .iter()
            .zip(self.group_ranges())
            .filter(|(g, _)| g.kind == GroupKind::Projective)
            .map(|(_, r)| r)
            .collect()
    }

    pub fn num_projective(&self) -> usize {
        self.groups.iter().filter(|g| g.kind == GroupKind::Projective).count()
    }

    /// Dimension of the solution space (`N` for `P^N`, `n` for `C^n`).
    pub fn dimension(&self) -> usize {
        self.num_vars() - self.num_projective()
    }

    /// Divides each projective group by the phase of its largest-modulus
    /// coordinate and scales it to unit 2-norm; affine coordinates are left alone.
    pub fn phase_normalized(&self, x: &CVector) -> CVector {
        let mut out = x.clone();
        for r in self.projective_ranges() {
            let (mut jmax, mut mmax) = (r.start, -1.0);
            for j in r.clone() {
                if x[j].norm() > mmax {
                    mmax = x[j].norm();
                    jmax = j;
                }
            }
            let norm: f64 = r.clone().map(|j| x[j].norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let phase = x[jmax] / x[jmax].norm();
            let scale = phase.conj() / norm;
            for j in r {
                out[j] = x[j] * scale;
            }
        }
        out
    }

    /// Representative with every projective group scaled to unit 2-norm.
    pub fn unit_representative(&self, x: &CVector) -> CVector {
        let mut out = x.clone();
        for r in self.projective_ranges() {
            let norm: f64 = r.clone().map(|j| x[j].norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                for j in r {
                    out[j] /= C64::new(norm, 0.0);
                }
            }
        }
        out
    }

    /// Largest per-group distance: `min_theta ||x/|x| - e^{i theta} y/|y|||` for
    /// projective groups and the plain 2-norm distance for affine ones.
    pub fn distance(&self, x: &CVector, y: &CVector) -> f64 {
        self.groups
            .iter()
            .zip(self.group_ranges())
            .map(|(g, r)| {
                let xs = x.rows(r.start, r.len());
                let ys = y.rows(r.start, r.len());
                match g.kind {
                    GroupKind::Affine => (xs - ys).norm(),
                    GroupKind::Projective => projective_distance(&xs.clone_owned(), &ys.clone_owned()),
                }
            })
            .fold(0.0, f64::max)
    }
}

/// `min_theta || x/|x| - e^{i theta} y/|y| ||`.
pub fn projective_distance(x: &CVector, y: &CVector) -> f64 {
    let (nx, ny) = (x.norm(), y.norm());
    if nx == 0.0 || ny == 0.0 {
        return if nx == ny { 0.0 } else { 1.0 };
    }
    let xh = x / C64::new(nx, 0.0);
    let yh = y / C64::new(ny, 0.0);
    let inner = yh.dotc(&xh);
    let phase = if inner.norm() == 0.0 { C64::new(1.0, 0.0) } else { inner / inner.norm() };
    (xh - yh * phase).norm()
}

/// One monomial `coeff * prod slot^exp` over variables and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub exps: Vec<u32>,
}

/// Sparse polynomial with canonical (sorted, merged, nonzero) terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    width: usize,
    terms: Vec<Term>,
}

impl Poly {
    pub fn zero(width: usize) -> Self {
        Self { width, terms: Vec::new() }
    }

    pub fn constant(width: usize, c: C64) -> Self {
        Self::from_terms(width, vec![Term { coeff: c, exps: vec![0; width] }])
    }

    /// The monomial `slot` (a variable, or a parameter at `num_vars + k`).
    pub fn var(width: usize, slot: usize) -> Self {
        let mut exps = vec![0; width];
        exps[slot] = 1;
        Self { width, terms: vec![Term { coeff: C64::new(1.0, 0.0), exps }] }
    }

    /// Merges duplicate exponents and drops zero coefficients.
    pub fn from_terms(width: usize, terms: Vec<Term>) -> Self {
        let mut acc: BTreeMap<Vec<u32>, C64> = BTreeMap::new();
        for t in terms {
            assert_eq!(t.exps.len(), width, "exponent vector width");
            *acc.entry(t.exps).or_insert(C64::new(0.0, 0.0)) += t.coeff;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| *c != C64::new(0.0, 0.0))
            .map(|(exps, coeff)| Term { coeff, exps })
            .collect();
        Self { width, terms }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_terms(
            self.width,
            self.terms.iter().map(|t| Term { coeff: t.coeff * c, exps: t.exps.clone() }).collect(),
        )
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(self.width, C64::new(1.0, 0.0));
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Largest total degree over the given exponent slots; `None` for the zero polynomial.
    pub fn degree_in(&self, slots: Range<usize>) -> Option<u32> {
        self.terms.iter().map(|t| t.exps[slots.clone()].iter().sum()).max()
    }

    /// Common degree of all terms in `slots`, if there is one.
    pub fn homogeneous_degree_in(&self, slots: Range<usize>) -> Option<u32> {
        let mut degs = self.terms.iter().map(|t| t.exps[slots.clone()].iter().sum::<u32>());
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    pub fn derivative(&self, slot: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.exps[slot] > 0)
            .map(|t| {
                let mut exps = t.exps.clone();
                let e = exps[slot];
                exps[slot] -= 1;
                Term { coeff: t.coeff * e as f64, exps }
            })
            .collect();
        Self::from_terms(self.width, terms)
    }

    /// Substitutes values for the exponent slots `from..width`, producing a
    /// polynomial of width `from`.
    pub fn substitute_tail(&self, from: usize, values: &[C64]) -> Self {
        assert_eq!(values.len(), self.width - from);
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut c = t.coeff;
                for (k, &e) in t.exps[from..].iter().enumerate() {
                    c *= values[k].powu(e);
                }
                Term { coeff: c, exps: t.exps[..from].to_vec() }
            })
            .collect();
        Self::from_terms(from, terms)
    }

    /// Re-embeds into a wider slot layout: slot `i` moves to `map[i]`.
    pub fn remap(&self, width: usize, map: &[usize]) -> Self {
        assert_eq!(map.len(), self.width);
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut exps = vec![0; width];
                for (i, &e) in t.exps.iter().enumerate() {
                    exps[map[i]] += e;
                }
                Term { coeff: t.coeff, exps }
            })
            .collect();
        Self::from_terms(width, terms)
    }

    /// Plain term-by-term evaluation at the full slot vector.
    pub fn eval_naive(&self, slots: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|t| {
                t.exps
                    .iter()
                    .zip(slots)
                    .fold(t.coeff, |acc, (&e, &v)| acc * v.powu(e))
            })
            .sum()
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        assert_eq!(self.width, rhs.width);
        Poly::from_terms(self.width, self.terms.iter().chain(&rhs.terms).cloned().collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        assert_eq!(self.width, rhs.width);
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                let exps = a.exps.iter().zip(&b.exps).map(|(x, y)| x + y).collect();
                terms.push(Term { coeff: a.coeff * b.coeff, exps });
            }
        }
        Poly::from_terms(self.width, terms)
    }
}

/// Term stored as sparse `(slot, exponent)` factors for fast evaluation.
#[derive(Debug, Clone)]
struct CompiledTerm {
    coeff: C64,
    factors: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, Default)]
struct CompiledPoly {
    terms: Vec<CompiledTerm>,
}

impl CompiledPoly {
    fn new(p: &Poly) -> Self {
        let terms = p
            .terms()
            .iter()
            .map(|t| CompiledTerm {
                coeff: t.coeff,
                factors: t
                    .exps
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(s, &e)| (s as u32, e))
                    .collect(),
            })
            .collect();
        Self { terms }
    }

    #[inline]
    fn eval(&self, powers: &Powers, ops: &mut u64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for t in &self.terms {
            let mut v = t.coeff;
            for &(s, e) in &t.factors {
                v *= powers.get(s as usize, e as usize);
            }
            acc += v;
            *ops += t.factors.len() as u64 + 1;
        }
        acc
    }
}

/// `powers[slot][e] = value^e` for every exponent the system uses.
struct Powers {
    offsets: Vec<usize>,
    table: Vec<C64>,
}

impl Powers {
    fn new(values: impl Iterator<Item = C64>, max_exp: &[u32], ops: &mut u64) -> Self {
        let mut offsets = Vec::with_capacity(max_exp.len());
        let mut table = Vec::new();
        for (v, &m) in values.zip(max_exp) {
            offsets.push(table.len());
            let mut acc = C64::new(1.0, 0.0);
            table.push(acc);
            for _ in 0..m {
                acc *= v;
                table.push(acc);
            }
            *ops += m.saturating_sub(1) as u64;
        }
        Self { offsets, table }
    }

    #[inline]
    fn get(&self, slot: usize, e: usize) -> C64 {
        self.table[self.offsets[slot] + e]
    }
}

#[derive(Debug, Clone)]
struct CompiledRow {
    value: CompiledPoly,
    /// `(variable, d f / d x_var)` for nonzero partials.
    grad_x: Vec<(usize, CompiledPoly)>,
    /// `(parameter, d f / d p_k)` for nonzero partials.
    grad_p: Vec<(usize, CompiledPoly)>,
}

/// Per polynomial and projective group, the common degree (`None` = inhomogeneous).
pub type HomogeneityProfile = Vec<Vec<Option<u32>>>;

/// A parameterized polynomial system `F(x; p)`.
#[derive(Debug, Clone)]
pub struct ParamPolySystem {
    structure: VarStructure,
    polys: Vec<Poly>,
    compiled: Vec<CompiledRow>,
    max_exp: Vec<u32>,
}

impl PartialEq for ParamPolySystem {
    fn eq(&self, other: &Self) -> bool {
        self.structure == other.structure && self.polys == other.polys
    }
}

impl ParamPolySystem {
    pub fn new(structure: VarStructure, polys: Vec<Poly>) -> Result<Self> {
        let width = structure.width();
        if let Some(p) = polys.iter().find(|p| p.width() != width) {
            return Err(Error::DimensionMismatch { expected: width, got: p.width() });
        }
        let nv = structure.num_vars();
        let mut max_exp = vec![0u32; width];
        for p in &polys {
            for t in p.terms() {
                for (m, &e) in max_exp.iter_mut().zip(&t.exps) {
                    *m = (*m).max(e);
                }
            }
        }
        let compiled = polys
            .iter()
            .map(|p| {
                let grad = |slot: usize| {
                    let d = p.derivative(slot);
                    (!d.is_zero()).then(|| CompiledPoly::new(&d))
                };
                CompiledRow {
                    value: CompiledPoly::new(p),
                    grad_x: (0..nv).filter_map(|j| grad(j).map(|g| (j, g))).collect(),
                    grad_p: (0..structure.param_count)
                        .filter_map(|k| grad(nv + k).map(|g| (k, g)))
                        .collect(),
                }
            })
            .collect();
        Ok(Self { structure, polys, compiled, max_exp })
    }

    pub fn structure(&self) -> &VarStructure {
        &self.structure
    }

    pub fn polys(&self) -> &[Poly] {
        &self.polys
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.structure.num_vars()
    }

    pub fn param_count(&self) -> usize {
        self.structure.param_count
    }

    /// Largest total degree in the variables over all polynomials.
    pub fn max_degree(&self) -> u32 {
        let nv = self.num_vars();
        self.polys.iter().filter_map(|p| p.degree_in(0..nv)).max().unwrap_or(0)
    }

    fn check(&self, x: &CVector, p: &CVector) -> Result<()> {
        if x.len() != self.num_vars() {
            return Err(Error::DimensionMismatch { expected: self.num_vars(), got: x.len() });
        }
        if p.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), got: p.len() });
        }
        Ok(())
    }

    fn powers(&self, x: &CVector, p: &CVector, ops: &mut u64) -> Powers {
        Powers::new(x.iter().chain(p.iter()).copied(), &self.max_exp, ops)
    }

    pub fn evaluate(&self, x: &CVector, p: &CVector) -> Result<CVector> {
        let mut ops = 0;
        self.evaluate_counted(x, p, &mut ops)
    }

    pub fn evaluate_counted(&self, x: &CVector, p: &CVector, ops: &mut u64) -> Result<CVector> {
        self.check(x, p)?;
        let pw = self.powers(x, p, ops);
        Ok(CVector::from_iterator(self.len(), self.compiled.iter().map(|r| r.value.eval(&pw, ops))))
    }

    pub fn jacobian_x(&self, x: &CVector, p: &CVector) -> Result<CMatrix> {
        let rows: Vec<usize> = (0..self.len()).collect();
        let mut ops = 0;
        Ok(self.eval_rows(x, p, &rows, None, &mut ops)?.jacobian)
    }

    /// `J_p F(x; p) * dir`.
    pub fn jacobian_p_dir(&self, x: &CVector, p: &CVector, dir: &CVector) -> Result<CVector> {
        let rows: Vec<usize> = (0..self.len()).collect();
        let mut ops = 0;
        Ok(self.eval_rows(x, p, &rows, Some(dir), &mut ops)?.dir_derivative.unwrap())
    }

    /// Values and `J_x` of the selected rows (in the given order), plus the
    /// parameter-direction derivative when `dir` is supplied. `ops` is charged
    /// one unit per complex multiply-add.
    pub fn eval_rows(
        &self,
        x: &CVector,
        p: &CVector,
        rows: &[usize],
        dir: Option<&CVector>,
        ops: &mut u64,
    ) -> Result<RowEvaluation> {
        self.check(x, p)?;
        if let Some(d) = dir {
            if d.len() != self.param_count() {
                return Err(Error::DimensionMismatch { expected: self.param_count(), got: d.len() });
            }
        }
        let pw = self.powers(x, p, ops);
        let n = self.num_vars();
        let mut values = CVector::zeros(rows.len());
        let mut jacobian = CMatrix::zeros(rows.len(), n);
        let mut dir_derivative = dir.map(|_| CVector::zeros(rows.len()));
        for (i, &row) in rows.iter().enumerate() {
            let c = &self.compiled[row];
            values[i] = c.value.eval(&pw, ops);
            for (j, g) in &c.grad_x {
                jacobian[(i, *j)] = g.eval(&pw, ops);
            }
            if let (Some(d), Some(out)) = (dir, dir_derivative.as_mut()) {
                let mut acc = C64::new(0.0, 0.0);
                for (k, g) in &c.grad_p {
                    if d[*k] != C64::new(0.0, 0.0) {
                        acc += g.eval(&pw, ops) * d[*k];
                        *ops += 1;
                    }
                }
                out[i] = acc;
            }
        }
        Ok(RowEvaluation { values, jacobian, dir_derivative })
    }

    pub fn homogeneity(&self) -> HomogeneityProfile {
        let ranges = self.structure.projective_ranges();
        self.polys
            .iter()
            .map(|p| ranges.iter().map(|r| p.homogeneous_degree_in(r.clone())).collect())
            .collect()
    }

    /// `G = [F; extra]`.
    pub fn append(&self, extra: Vec<Poly>) -> Result<Self> {
        let mut polys = self.polys.clone();
        polys.extend(extra);
        Self::new(self.structure.clone(), polys)
    }

    /// `F(x; p)` at fixed `p`, as a parameter-free system.
    pub fn substitute_params(&self, p: &CVector) -> Result<Self> {
        if p.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), got: p.len() });
        }
        let nv = self.num_vars();
        let vals: Vec<C64> = p.iter().copied().collect();
        let polys = self.polys.iter().map(|q| q.substitute_tail(nv, &vals)).collect();
        let structure = VarStructure { groups: self.structure.groups.clone(), param_count: 0 };
        Self::new(structure, polys)
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            groups: self.structure.groups.clone(),
            params: self.structure.param_count,
            polys: self
                .polys
                .iter()
                .map(|p| p.terms().iter().map(|t| ([t.coeff.re, t.coeff.im], t.exps.clone())).collect())
                .collect(),
        }
    }

    pub fn from_file(file: &SystemFile) -> Result<Self> {
        let structure = VarStructure::new(file.groups.clone(), file.params)?;
        let width = structure.width();
        let mut polys = Vec::with_capacity(file.polys.len());
        for terms in &file.polys {
            let mut seen = std::collections::BTreeSet::new();
            let mut out = Vec::with_capacity(terms.len());
            for (c, exps) in terms {
                if exps.len() != width {
                    return Err(Error::DimensionMismatch { expected: width, got: exps.len() });
                }
                if !seen.insert(exps.clone()) {
                    return Err(Error::Invalid("duplicate exponent vector".into()));
                }
                out.push(Term { coeff: C64::new(c[0], c[1]), exps: exps.clone() });
            }
            polys.push(Poly::from_terms(width, out));
        }
        Self::new(structure, polys)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("system serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(s).map_err(|e| Error::Invalid(e.to_string()))?;
        Self::from_file(&file)
    }
}

/// Output of [`ParamPolySystem::eval_rows`].
#[derive(Debug, Clone)]
pub struct RowEvaluation {
    pub values: CVector,
    pub jacobian: CMatrix,
    pub dir_derivative: Option<CVector>,
}

/// On-disk JSON layout of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub groups: Vec<VarGroup>,
    pub params: usize,
    pub polys: Vec<Vec<([f64; 2], Vec<u32>)>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::fixtures;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cv(v: &[f64]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&r| c(r, 0.0)))
    }

    #[test]
    fn twisted_cubic_vanishes_on_known_point() {
        let f = fixtures::twisted_cubic();
        let v = f.evaluate(&cv(&[1.0, -1.0, 1.0, -1.0]), &CVector::zeros(0)).unwrap();
        assert!(v.norm() == 0.0);
    }

    #[test]
    fn gradient_by_hand() {
        let f = fixtures::twisted_cubic();
        let j = f.jacobian_x(&cv(&[1.0, -1.0, 1.0, -1.0]), &CVector::zeros(0)).unwrap();
        let row: Vec<f64> = j.row(0).iter().map(|z| z.re).collect();
        assert_eq!(row, vec![1.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn no_constant_terms_vanish_at_origin() {
        let f = fixtures::twisted_cubic();
        assert_eq!(f.evaluate(&CVector::zeros(4), &CVector::zeros(0)).unwrap().norm(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = fixtures::twisted_cubic();
        assert!(matches!(
            f.evaluate(&CVector::zeros(3), &CVector::zeros(0)),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
        let g = crate::problems::twisted_cubic_family();
        assert!(g.jacobian_p_dir(&CVector::zeros(4), &CVector::zeros(3), &CVector::zeros(2)).is_err());
    }

    #[test]
    fn parameter_direction_derivative() {
        // F = p0 * x0
        let s = VarStructure::new(vec![VarGroup::affine(1)], 1).unwrap();
        let f = ParamPolySystem::new(s, vec![&Poly::var(2, 1) * &Poly::var(2, 0)]).unwrap();
        let d = f.jacobian_p_dir(&cv(&[3.0]), &cv(&[5.0]), &cv(&[1.0])).unwrap();
        assert_eq!(d[0], c(3.0, 0.0));

        let tc = fixtures::twisted_cubic();
        let d = tc.jacobian_p_dir(&cv(&[1.0, 2.0, 3.0, 4.0]), &CVector::zeros(0), &CVector::zeros(0)).unwrap();
        assert_eq!(d.norm(), 0.0);
    }

    #[test]
    fn homogeneity_profiles() {
        let f = fixtures::twisted_cubic();
        assert_eq!(f.homogeneity(), vec![vec![Some(2)], vec![Some(2)], vec![Some(2)], vec![Some(1)]]);
        let h = fixtures::twisted_cubic_h();
        assert_eq!(h.homogeneity()[4], vec![None]);
    }

    #[test]
    fn append_matches_concatenation() {
        let f = fixtures::twisted_cubic();
        let h = f.append(vec![&Poly::var(4, 0) - &Poly::constant(4, c(1.0, 0.0))]).unwrap();
        assert_eq!(h, fixtures::twisted_cubic_h());
        assert_eq!(f.append(vec![]).unwrap(), f);
        let x = CVector::from_vec(vec![c(0.3, 0.1), c(-1.0, 0.5), c(2.0, 0.0), c(0.0, -1.0)]);
        let hv = h.evaluate(&x, &CVector::zeros(0)).unwrap();
        let fv = f.evaluate(&x, &CVector::zeros(0)).unwrap();
        assert_eq!(hv.rows(0, 4), fv.rows(0, 4));
        assert_eq!(hv[4], x[0] - c(1.0, 0.0));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let f = crate::problems::twisted_cubic_family();
        let g = ParamPolySystem::from_json(&f.to_json()).unwrap();
        assert_eq!(f, g);
        let bad = r#"{"groups":[{"kind":"affine","size":1}],"params":0,"polys":[[[[1,0],[1]],[[2,0],[1]]]]}"#;
        assert!(ParamPolySystem::from_json(bad).is_err());
    }

    #[test]
    fn projective_distance_ignores_scale_and_phase() {
        let x = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)]);
        let y = &x * c(0.0, -2.5);
        assert!(projective_distance(&x, &y) < 1e-15);
        let s = VarStructure::new(vec![VarGroup::projective(3)], 0).unwrap();
        let n = s.phase_normalized(&y);
        assert!((n.norm() - 1.0).abs() < 1e-15);
        assert!(n[0].im.abs() < 1e-15 && n[0].re > 0.0);
    }
}
