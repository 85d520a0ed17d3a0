//! Instantaneous spectra and level populations in the `+1` sector of `X^N`.
//!
//! For odd `N` the sector is spanned by `(|x> + |!x>)/sqrt 2` with `x` ranging
//! over the states whose top bit (site `N`) is zero, so sector index `r`
//! stands for the pair `{r, !r}`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring_model::RingModel;
use crate::schedule::Schedule;
use crate::statevector::{StateVector, TrotterSimulator};

/// Default size limit for dense sector diagonalization.
pub const DEFAULT_MAX_SPECTRUM_N: usize = 15;
/// Eigenvalues closer than this are one level.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Minimum sector weight accepted by [`populations`].
pub const SECTOR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectorBasis {
    n: usize,
}

/// The symmetric sector basis for `n` spins (odd `n`).
pub fn sector_basis(n: usize) -> Result<SectorBasis> {
    if n % 2 == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("sector basis needs odd N, got {n}")));
    }
    if n > crate::statevector::MAX_STATEVECTOR_QUBITS {
        return Err(Error::UnsupportedSize(n, 1, crate::statevector::MAX_STATEVECTOR_QUBITS));
    }
    Ok(SectorBasis { n })
}

impl SectorBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        1 << (self.n - 1)
    }

    /// Orbit representative (sector index) of basis state `x`.
    #[inline]
    pub fn index_of(&self, x: usize) -> usize {
        let half = self.dimension();
        if x < half {
            x
        } else {
            x ^ ((half << 1) - 1)
        }
    }

    /// Full-space amplitudes of sector basis vector `r`.
    pub fn vector(&self, r: usize) -> Result<StateVector> {
        if r >= self.dimension() {
            return Err(Error::InvalidArgument(format!("sector index {r} out of range")));
        }
        let mask = (self.dimension() << 1) - 1;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); mask + 1];
        amps[r].re = h;
        amps[r ^ mask].re = h;
        StateVector::from_amplitudes(self.n, amps)
    }

    /// Sector coordinates `(psi_r + psi_!r)/sqrt 2` and the sector weight.
    pub fn project(&self, state: &StateVector) -> Result<(DVector<nalgebra::Complex<f64>>, f64)> {
        if state.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: state.n(),
            });
        }
        let amps = state.amplitudes();
        let mask = (self.dimension() << 1) - 1;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = DVector::from_iterator(
            self.dimension(),
            (0..self.dimension()).map(|r| (amps[r] + amps[r ^ mask]) * h),
        );
        let weight = v.norm_squared();
        Ok((v, weight))
    }
}

/// Dense `H'(A)` on the sector (real symmetric).
pub fn sector_hamiltonian(model: &RingModel, a: f64) -> Result<DMatrix<f64>> {
    let basis = sector_basis(model.n())?;
    let dim = basis.dimension();
    let mut h = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        h[(r, r)] = a * model.basis_energy(r);
        for q in 0..model.n() {
            let s = basis.index_of(r ^ (1 << q));
            h[(s, r)] -= 1.0 - a;
        }
    }
    Ok(h)
}

fn check_size(model: &RingModel, max_n: usize) -> Result<()> {
    if model.n() > max_n {
        return Err(Error::UnsupportedSize(model.n(), 5, max_n));
    }
    Ok(())
}

/// Ascending eigenpairs of `H'(A)`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub a: f64,
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector of `eigenvalues[i]` in sector coordinates.
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    /// Distinct levels as `(energy, first column, multiplicity)`.
    pub fn levels(&self) -> Vec<(f64, usize, usize)> {
        let mut out: Vec<(f64, usize, usize)> = Vec::new();
        for (i, &e) in self.eigenvalues.iter().enumerate() {
            match out.last_mut() {
                Some(last) if e - self.eigenvalues[last.1 + last.2 - 1] <= DEGENERACY_TOL => last.2 += 1,
                _ => out.push((e, i, 1)),
            }
        }
        out
    }

    /// Gap between the two lowest distinct levels.
    pub fn gap(&self) -> f64 {
        let l = self.levels();
        if l.len() < 2 {
            return f64::INFINITY;
        }
        l[1].0 - l[0].0
    }
}

fn full_spectrum(model: &RingModel, a: f64) -> Result<Spectrum> {
    let h = sector_hamiltonian(model, a)?;
    let eig = SymmetricEigen::try_new(h, 1e-14, 0)
        .ok_or_else(|| Error::Diagonalization(format!("sector Hamiltonian at A = {a}")))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    Ok(Spectrum {
        a,
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: eig.eigenvectors.select_columns(&order),
    })
}

/// Lowest `n_levels` eigenpairs of the sector Hamiltonian at `A`.
pub fn instantaneous_spectrum(model: &RingModel, a: f64, n_levels: usize) -> Result<Spectrum> {
    check_size(model, DEFAULT_MAX_SPECTRUM_N)?;
    if !a.is_finite() {
        return Err(Error::InvalidArgument(format!("A must be finite, got {a}")));
    }
    let mut s = full_spectrum(model, a)?;
    let keep = n_levels.min(s.eigenvalues.len());
    s.eigenvalues.truncate(keep);
    s.eigenvectors = s.eigenvectors.columns(0, keep).into_owned();
    Ok(s)
}

/// Sector gap `E_1(A) - E_0(A)` at each `A`.
pub fn gap_scan(model: &RingModel, a_values: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_size(model, DEFAULT_MAX_SPECTRUM_N)?;
    a_values
        .par_iter()
        .map(|&a| Ok((a, full_spectrum(model, a)?.gap())))
        .collect()
}

/// The grid point with the smallest gap; ties go to the first.
pub fn min_gap(scan: &[(f64, f64)]) -> Option<(f64, f64)> {
    scan.iter().copied().fold(None, |best, p| match best {
        Some(b) if b.1 <= p.1 => Some(b),
        _ => Some(p),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub p0: f64,
    pub p1: f64,
    pub residual: f64,
    pub gap: f64,
    /// Population of every distinct level, ascending in energy.
    pub levels: Vec<f64>,
}

fn populations_in(spectrum: &Spectrum, v: &DVector<nalgebra::Complex<f64>>) -> Populations {
    let levels: Vec<f64> = spectrum
        .levels()
        .iter()
        .map(|&(_, first, mult)| {
            (first..first + mult)
                .map(|c| {
                    let col = spectrum.eigenvectors.column(c);
                    let overlap: nalgebra::Complex<f64> = col.iter().zip(v.iter()).map(|(e, a)| a * *e).sum();
                    overlap.norm_sqr()
                })
                .sum()
        })
        .collect();
    let p0 = levels.first().copied().unwrap_or(0.0);
    let p1 = levels.get(1).copied().unwrap_or(0.0);
    Populations {
        p0,
        p1,
        residual: 1.0 - p0 - p1,
        gap: spectrum.gap(),
        levels,
    }
}

/// Level populations of `state` with respect to `H'(A)`.
pub fn populations(state: &StateVector, model: &RingModel, a: f64) -> Result<Populations> {
    check_size(model, DEFAULT_MAX_SPECTRUM_N)?;
    let basis = sector_basis(model.n())?;
    let (v, weight) = basis.project(state)?;
    if weight < 1.0 - SECTOR_TOL {
        return Err(Error::OutsideSector(weight));
    }
    Ok(populations_in(&full_spectrum(model, a)?, &v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "P0")]
    pub p0: f64,
    #[serde(rename = "P1")]
    pub p1: f64,
    pub residual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTrace {
    pub rows: Vec<TraceRow>,
}

impl PopulationTrace {
    /// Number of sign changes of `P0 - P1` along the trace.
    pub fn inversions(&self) -> usize {
        let signs: Vec<bool> = self
            .rows
            .iter()
            .map(|r| r.p0 - r.p1)
            .filter(|d| *d != 0.0)
            .map(|d| d > 0.0)
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,A,P0,P1,residual,gap")?;
        for r in &self.rows {
            writeln!(out, "{:?},{:?},{:?},{:?},{:?},{:?}", r.t, r.a, r.p0, r.p1, r.residual, r.gap)?;
        }
        Ok(())
    }
}

/// Evolve once with slice width `dt` and record populations at the slice
/// boundaries nearest to `grid` evenly spaced times in `[0, T]`.
pub fn population_trace(model: &RingModel, schedule: &Schedule, dt: f64, grid: usize) -> Result<PopulationTrace> {
    check_size(model, DEFAULT_MAX_SPECTRUM_N)?;
    if grid < 2 {
        return Err(Error::InvalidArgument("trace grid needs at least two points".into()));
    }
    let sim = TrotterSimulator::new(model)?;
    let total = schedule.total_time();
    let slices = crate::statevector::slices(schedule, dt)?;
    // Boundary b sits at time 0 (b = 0) or at the end of slice b - 1.
    let boundaries: Vec<f64> = std::iter::once(0.0)
        .chain(slices.iter().map(|s| s.start + s.width))
        .collect();
    let wanted: Vec<usize> = (0..grid)
        .map(|i| {
            let t = total * i as f64 / (grid - 1) as f64;
            let j = boundaries.partition_point(|&b| b < t);
            if j == 0 {
                0
            } else if j == boundaries.len() || (t - boundaries[j - 1]) <= (boundaries[j] - t) {
                j - 1
            } else {
                j
            }
        })
        .collect();
    let mut snapshots: Vec<(usize, StateVector)> = Vec::new();
    let initial = StateVector::plus_state(model.n())?;
    if wanted.contains(&0) {
        snapshots.push((0, initial));
    }
    sim.evolve_observed(schedule, dt, |slice, state| {
        let b = slice.index + 1;
        if wanted.binary_search(&b).is_ok() {
            snapshots.push((b, state.clone()));
        }
        Ok(())
    })?;
    let rows: Vec<Result<TraceRow>> = snapshots
        .par_iter()
        .map(|(b, state)| {
            let t = boundaries[*b];
            let a = schedule.value_at(t);
            let p = populations(state, model, a)?;
            Ok(TraceRow {
                t,
                a,
                p0: p.p0,
                p1: p.p1,
                residual: p.residual,
                gap: p.gap,
            })
        })
        .collect();
    let by_boundary: Vec<TraceRow> = rows.into_iter().collect::<Result<_>>()?;
    let rows = wanted
        .iter()
        .map(|b| {
            let i = snapshots.iter().position(|(s, _)| s == b).expect("snapshot taken");
            by_boundary[i]
        })
        .collect();
    Ok(PopulationTrace { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_dimension_and_symmetry() {
        let b = sector_basis(3).unwrap();
        assert_eq!(b.dimension(), 4);
        assert!(sector_basis(4).is_err());
        for r in 0..4 {
            let v = b.vector(r).unwrap();
            assert!((v.x_parity() - 1.0).abs() < 1e-15);
            assert!((v.norm_sqr() - 1.0).abs() < 1e-15);
        }
        let plus = StateVector::plus_state(5).unwrap();
        let (_, w) = sector_basis(5).unwrap().project(&plus).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sector_hamiltonian_is_symmetric() {
        let m = RingModel::with_defaults(7).unwrap();
        let h = sector_hamiltonian(&m, 0.37).unwrap();
        assert!((&h - h.transpose()).amax() < 1e-12);
    }

    #[test]
    fn endpoint_spectra() {
        let m = RingModel::with_defaults(7).unwrap();
        let k = m.exact_spectrum();
        let s = instantaneous_spectrum(&m, 1.0, 3).unwrap();
        assert!((s.eigenvalues[0] - k.e0).abs() < 1e-12);
        assert!((s.eigenvalues[1] - k.e1).abs() < 1e-12);
        let s = instantaneous_spectrum(&m, 0.0, 2).unwrap();
        assert!((s.eigenvalues[0] + 7.0).abs() < 1e-12);
        assert!(s.eigenvalues[1] > -7.0 + 1.0);
    }

    #[test]
    fn initial_populations() {
        let m = RingModel::with_defaults(5).unwrap();
        let p = populations(&StateVector::plus_state(5).unwrap(), &m, 0.0).unwrap();
        assert!((p.p0 - 1.0).abs() < 1e-9);
        assert!((p.levels.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let odd = {
            let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 32];
            amps[0].re = std::f64::consts::FRAC_1_SQRT_2;
            amps[31].re = -std::f64::consts::FRAC_1_SQRT_2;
            StateVector::from_amplitudes(5, amps).unwrap()
        };
        assert!(matches!(populations(&odd, &m, 0.5), Err(Error::OutsideSector(_))));
    }

    #[test]
    fn trace_shape() {
        let m = RingModel::with_defaults(5).unwrap();
        let s = Schedule::linear(3.0).unwrap();
        let tr = population_trace(&m, &s, 0.1, 7).unwrap();
        assert_eq!(tr.rows.len(), 7);
        assert_eq!(tr.rows[0].t, 0.0);
        assert!((tr.rows[0].p0 - 1.0).abs() < 1e-9);
        assert!((tr.rows[6].t - 3.0).abs() < 1e-12);
        assert!((tr.rows[3].t - 1.5).abs() < 0.05 + 1e-12);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 8);
    }

    #[test]
    fn levels_group_degenerate_eigenvalues() {
        let m = RingModel::with_defaults(5).unwrap();
        let s = instantaneous_spectrum(&m, 1.0, 16).unwrap();
        let l = s.levels();
        // The first excited level is doubly degenerate inside the sector.
        assert_eq!(l[0].2, 1);
        assert_eq!(l[1].2, 2);
        assert!((s.gap() - m.exact_spectrum().gap).abs() < 1e-12);
    }
}
