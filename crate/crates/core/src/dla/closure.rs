//! Lie closure of `{iH_d, iH_p}` and its adjoint representation.
//!
//! Elements are kept as dense coefficient vectors over a growing index of
//! Pauli strings. Starting from the two generators, the closure repeatedly
//! applies `ad_{iH_d}` and `ad_{iH_p}` to every new basis element; nested
//! brackets of the generators span the whole algebra, so this reaches the same
//! span as commuting all pairs. New vectors are orthonormalized against the
//! basis with two Gram-Schmidt passes.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::pauli::{DlaElement, PauliString};
use crate::error::{Error, Result};
use crate::ring_model::RingModel;

/// Residual norm below which a unit vector counts as dependent.
pub const INDEPENDENCE_TOL: f64 = 1e-10;

/// Default dimension cap `10 N^2`.
pub fn default_cap(n: usize) -> usize {
    10 * n * n
}

/// Which generator an adjoint refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Driver,
    Problem,
}

/// `H_d = -sum_j X_j`.
pub fn driver_terms(n: usize) -> Result<Vec<(PauliString, f64)>> {
    (1..=n).map(|j| Ok((PauliString::single(n, j, 'X')?, -1.0))).collect()
}

/// `H_p = -sum_j c_j Z_j Z_{j+1}` on a ring of `c.len()` sites.
pub fn problem_terms(couplings: &[f64]) -> Result<Vec<(PauliString, f64)>> {
    let n = couplings.len();
    couplings
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(b, &c)| Ok((PauliString::zz(n, b + 1, (b + 1) % n + 1)?, -c)))
        .collect()
}

/// Real coefficient of `i[Q, S] = c R` for strings `Q`, `S`; `None` if they commute.
#[inline]
fn bracket_strings(q: &PauliString, s: &PauliString) -> Option<(f64, PauliString)> {
    if q.commutes_with(s) {
        return None;
    }
    // [Q, S] = 2 QS = 2 i^k R, so i[Q, S] = 2 i^{k+1} R with k odd.
    let (k, r) = q.product(s);
    debug_assert!(k % 2 == 1);
    Some((if k == 1 { -2.0 } else { 2.0 }, r))
}

struct Builder {
    index: HashMap<PauliString, usize>,
    strings: Vec<PauliString>,
    basis: Vec<Vec<f64>>,
}

impl Builder {
    fn slot(&mut self, p: PauliString) -> usize {
        if let Some(&i) = self.index.get(&p) {
            return i;
        }
        let i = self.strings.len();
        self.strings.push(p);
        self.index.insert(p, i);
        i
    }

    fn from_terms(&mut self, terms: &[(PauliString, f64)]) -> Vec<f64> {
        let mut v = vec![0.0; self.strings.len()];
        for &(p, c) in terms {
            let i = self.slot(p);
            if i >= v.len() {
                v.resize(i + 1, 0.0);
            }
            v[i] += c;
        }
        v
    }

    /// `i[g, v]`.
    fn bracket(&mut self, g: &[(PauliString, f64)], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.strings.len()];
        for (si, &c) in v.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let s = self.strings[si];
            for &(q, b) in g {
                if let Some((f, r)) = bracket_strings(&q, &s) {
                    let ri = self.slot(r);
                    if ri >= out.len() {
                        out.resize(ri + 1, 0.0);
                    }
                    out[ri] += f * b * c;
                }
            }
        }
        out
    }

    /// Orthonormalize `v` against the basis; returns whether it was added.
    fn insert(&mut self, mut v: Vec<f64>) -> bool {
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        for _ in 0..2 {
            for b in &self.basis {
                let proj = dot(b, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let rest = dot(&v, &v).sqrt();
        if rest < INDEPENDENCE_TOL {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= rest);
        self.basis.push(v);
        true
    }
}

/// Dot product of two coefficient vectors; the shorter one is zero-padded.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the dynamical Lie algebra with its adjoint matrices.
#[derive(Debug, Clone)]
pub struct DlaBasis {
    n: usize,
    couplings: Vec<f64>,
    strings: Vec<PauliString>,
    /// Orthonormal elements as coefficient vectors over `strings`.
    elements: Vec<Vec<f64>>,
    /// `ad_d[(i, j)] = <b_i, i[H_d, b_j]>`.
    ad_d: DMatrix<f64>,
    ad_p: DMatrix<f64>,
    /// `<+|^N b_i |+>^N`.
    w: Vec<f64>,
    /// Coordinates of `H_p`.
    hp: Vec<f64>,
}

/// Closure of the frustrated ring with the default cap.
pub fn lie_closure(model: &RingModel) -> Result<DlaBasis> {
    lie_closure_with(model.couplings(), default_cap(model.n()))
}

/// Closure for an arbitrary periodic ZZ chain with coupling list `couplings`.
pub fn lie_closure_with(couplings: &[f64], cap: usize) -> Result<DlaBasis> {
    let n = couplings.len();
    if n < 2 || n > 63 {
        return Err(Error::UnsupportedSize(n, 2, 63));
    }
    let gens = [driver_terms(n)?, problem_terms(couplings)?];
    let mut b = Builder {
        index: HashMap::new(),
        strings: Vec::new(),
        basis: Vec::new(),
    };
    let mut queue = VecDeque::new();
    for g in &gens {
        let v = b.from_terms(g);
        if b.insert(v) {
            queue.push_back(b.basis.len() - 1);
        }
    }
    while let Some(i) = queue.pop_front() {
        for g in &gens {
            let elem = b.basis[i].clone();
            let r = b.bracket(g, &elem);
            if b.insert(r) {
                if b.basis.len() > cap {
                    return Err(Error::ClosureCapExceeded { cap, n });
                }
                queue.push_back(b.basis.len() - 1);
            }
        }
    }
    let width = b.strings.len();
    for e in &mut b.basis {
        e.resize(width, 0.0);
    }
    let hp_vec = b.from_terms(&gens[1]);
    let mut basis = DlaBasis {
        n,
        couplings: couplings.to_vec(),
        w: b
            .basis
            .iter()
            .map(|e| e.iter().zip(&b.strings).map(|(c, s)| c * s.plus_expectation()).sum())
            .collect(),
        hp: b.basis.iter().map(|e| dot(e, &hp_vec)).collect(),
        strings: b.strings,
        elements: b.basis,
        ad_d: DMatrix::zeros(0, 0),
        ad_p: DMatrix::zeros(0, 0),
    };
    basis.ad_d = basis.adjoint_matrix(&gens[0]);
    basis.ad_p = basis.adjoint_matrix(&gens[1]);
    Ok(basis)
}

impl DlaBasis {
    fn string_index(&self) -> HashMap<PauliString, usize> {
        self.strings.iter().enumerate().map(|(i, s)| (*s, i)).collect()
    }

    /// `i[g, b_j]` over the basis strings plus the weight that falls outside them.
    fn bracket_element(&self, index: &HashMap<PauliString, usize>, g: &[(PauliString, f64)], j: usize) -> (Vec<f64>, f64) {
        let mut out = vec![0.0; self.strings.len()];
        let mut outside: HashMap<PauliString, f64> = HashMap::new();
        for (si, &c) in self.elements[j].iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for &(q, b) in g {
                if let Some((f, r)) = bracket_strings(&q, &self.strings[si]) {
                    match index.get(&r) {
                        Some(&ri) => out[ri] += f * b * c,
                        None => *outside.entry(r).or_insert(0.0) += f * b * c,
                    }
                }
            }
        }
        let extra = outside.values().map(|v| v * v).sum::<f64>();
        (out, extra)
    }

    fn adjoint_matrix(&self, g: &[(PauliString, f64)]) -> DMatrix<f64> {
        let d = self.elements.len();
        let index = self.string_index();
        let mut k = DMatrix::zeros(d, d);
        for j in 0..d {
            let (r, _) = self.bracket_element(&index, g, j);
            for i in 0..d {
                k[(i, j)] = dot(&self.elements[i], &r);
            }
        }
        k
    }

    fn generator_terms(&self, g: Generator) -> Result<Vec<(PauliString, f64)>> {
        match g {
            Generator::Driver => driver_terms(self.n),
            Generator::Problem => problem_terms(&self.couplings),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn dimension(&self) -> usize {
        self.elements.len()
    }

    /// Pauli strings appearing in any basis element.
    pub fn strings(&self) -> &[PauliString] {
        &self.strings
    }

    pub fn element(&self, i: usize) -> DlaElement {
        DlaElement::from_terms(
            self.strings
                .iter()
                .zip(&self.elements[i])
                .filter(|(_, c)| **c != 0.0)
                .map(|(s, c)| (*s, *c)),
        )
    }

    pub fn adjoint(&self, g: Generator) -> &DMatrix<f64> {
        match g {
            Generator::Driver => &self.ad_d,
            Generator::Problem => &self.ad_p,
        }
    }

    pub fn expectation_vector(&self) -> &[f64] {
        &self.w
    }

    pub fn problem_coordinates(&self) -> &[f64] {
        &self.hp
    }

    /// Largest norm of `i[g, b_j] - sum_i ad[i, j] b_i` over all `j` and both
    /// generators; zero up to rounding when the basis is closed.
    pub fn closure_residual(&self) -> Result<f64> {
        let index = self.string_index();
        let mut worst = 0.0f64;
        for g in [Generator::Driver, Generator::Problem] {
            let terms = self.generator_terms(g)?;
            let ad = self.adjoint(g);
            for j in 0..self.dimension() {
                let (mut r, extra) = self.bracket_element(&index, &terms, j);
                for (i, e) in self.elements.iter().enumerate() {
                    let c = ad[(i, j)];
                    for (x, y) in r.iter_mut().zip(e) {
                        *x -= c * y;
                    }
                }
                worst = worst.max((dot(&r, &r) + extra).sqrt());
            }
        }
        Ok(worst)
    }

    /// Basis with its elements reordered by `perm` (element `i` of the result
    /// is element `perm[i]` of `self`).
    pub fn permuted(&self, perm: &[usize]) -> Result<DlaBasis> {
        let d = self.dimension();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the basis".into()));
        }
        Ok(DlaBasis {
            n: self.n,
            couplings: self.couplings.clone(),
            strings: self.strings.clone(),
            elements: perm.iter().map(|&p| self.elements[p].clone()).collect(),
            ad_d: DMatrix::from_fn(d, d, |i, j| self.ad_d[(perm[i], perm[j])]),
            ad_p: DMatrix::from_fn(d, d, |i, j| self.ad_p[(perm[i], perm[j])]),
            w: perm.iter().map(|&p| self.w[p]).collect(),
            hp: perm.iter().map(|&p| self.hp[p]).collect(),
        })
    }
}

/// On-disk form: strings as labels, sparse elements, sparse adjoints.
#[derive(Serialize, Deserialize)]
struct CachedBasis {
    n: usize,
    couplings: Vec<f64>,
    strings: Vec<String>,
    elements: Vec<Vec<(usize, f64)>>,
    ad_d: Vec<(usize, usize, f64)>,
    ad_p: Vec<(usize, usize, f64)>,
    w: Vec<f64>,
    hp: Vec<f64>,
}

fn sparse(m: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                out.push((i, j, m[(i, j)]));
            }
        }
    }
    out
}

fn dense(d: usize, entries: &[(usize, usize, f64)]) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(d, d);
    for &(i, j, v) in entries {
        if i >= d || j >= d {
            return Err(Error::InvalidArgument("adjoint entry out of range in cache".into()));
        }
        m[(i, j)] = v;
    }
    Ok(m)
}

impl DlaBasis {
    pub fn to_json(&self) -> Result<String> {
        let cached = CachedBasis {
            n: self.n,
            couplings: self.couplings.clone(),
            strings: self.strings.iter().map(|s| s.to_string()).collect(),
            elements: self
                .elements
                .iter()
                .map(|e| e.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, c)| (i, *c)).collect())
                .collect(),
            ad_d: sparse(&self.ad_d),
            ad_p: sparse(&self.ad_p),
            w: self.w.clone(),
            hp: self.hp.clone(),
        };
        Ok(serde_json::to_string(&cached)?)
    }

    pub fn from_json(text: &str) -> Result<DlaBasis> {
        let c: CachedBasis = serde_json::from_str(text)?;
        let d = c.elements.len();
        if c.w.len() != d || c.hp.len() != d || c.couplings.len() != c.n {
            return Err(Error::InvalidArgument("inconsistent basis cache".into()));
        }
        let strings = c
            .strings
            .iter()
            .map(|s| PauliString::parse(s))
            .collect::<Result<Vec<_>>>()?;
        if strings.iter().any(|s| s.n() != c.n) {
            return Err(Error::InvalidArgument("cached string size mismatch".into()));
        }
        let mut elements = Vec::with_capacity(d);
        for e in &c.elements {
            let mut v = vec![0.0; strings.len()];
            for &(i, x) in e {
                *v.get_mut(i).ok_or_else(|| Error::InvalidArgument("string index out of range in cache".into()))? = x;
            }
            elements.push(v);
        }
        Ok(DlaBasis {
            n: c.n,
            ad_d: dense(d, &c.ad_d)?,
            ad_p: dense(d, &c.ad_p)?,
            couplings: c.couplings,
            strings,
            elements,
            w: c.w,
            hp: c.hp,
        })
    }
}

/// Cache file for a model; the key holds the exact bit patterns of the couplings.
pub fn cache_path(dir: &Path, model: &RingModel) -> PathBuf {
    dir.join(format!(
        "dla_N{}_JR{:016x}_JL{:016x}_J{:016x}.json",
        model.n(),
        model.j_r().to_bits(),
        model.j_l().to_bits(),
        model.j().to_bits()
    ))
}

/// Load the closure from `dir` or build it and write it there.
pub fn load_or_build(dir: &Path, model: &RingModel) -> Result<DlaBasis> {
    let path = cache_path(dir, model);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(b) = DlaBasis::from_json(&text) {
            if b.n == model.n() && b.couplings == model.couplings() {
                return Ok(b);
            }
        }
    }
    let basis = lie_closure(model)?;
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, basis.to_json()?)?;
    fs::rename(&tmp, &path)?;
    Ok(basis)
}
