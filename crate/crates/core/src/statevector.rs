//! Full state-vector simulation of the anneal with first-order Trotter slices.
//!
//! Each slice of width `w` starting at `t*` applies the `N` ZZ rotations with
//! `theta_Z = -2 w A(t*) J_j` and then the `N` X rotations with
//! `theta_X = -2 w (1 - A(t*))`. The ZZ layer is diagonal, so it is applied as
//! one phase per distinct problem energy.

use std::io::Write;
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring_model::RingModel;
use crate::schedule::Schedule;

/// Largest register the simulator accepts (2^24 amplitudes, 256 MiB).
pub const MAX_STATEVECTOR_QUBITS: usize = 24;

/// Tolerances asserted when invariant checking is enabled.
pub const NORM_TOLERANCE: f64 = 1e-10;
pub const PARITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    fn check_size(n: usize) -> Result<()> {
        if n == 0 || n > MAX_STATEVECTOR_QUBITS {
            return Err(Error::UnsupportedSize(n, 1, MAX_STATEVECTOR_QUBITS));
        }
        Ok(())
    }

    /// `|+>^N`, the ground state of the driver.
    pub fn plus_state(n: usize) -> Result<Self> {
        Self::check_size(n)?;
        let dim = 1usize << n;
        let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(StateVector {
            n,
            amps: vec![amp; dim],
        })
    }

    pub fn basis_state(n: usize, x: usize) -> Result<Self> {
        Self::check_size(n)?;
        let dim = 1usize << n;
        if x >= dim {
            return Err(Error::InvalidArgument(format!("basis index {x} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[x] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        Self::check_size(n)?;
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                got: amps.len(),
            });
        }
        Ok(StateVector { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<psi| X^N |psi>` (real for any state, since X^N is Hermitian).
    pub fn x_parity(&self) -> f64 {
        let mask = (1usize << self.n) - 1;
        self.amps
            .iter()
            .enumerate()
            .map(|(x, a)| {
                let b = self.amps[x ^ mask];
                a.re * b.re + a.im * b.im
            })
            .sum()
    }

    fn site_bit(&self, site: usize) -> Result<usize> {
        if site == 0 || site > self.n {
            return Err(Error::InvalidSite(site.to_string(), self.n));
        }
        Ok(site - 1)
    }

    /// `exp(-i theta/2 Z_j Z_{j_next})` on ring-adjacent sites (1-based).
    pub fn apply_rzz(&mut self, j: usize, j_next: usize, theta: f64) -> Result<()> {
        let a = self.site_bit(j)?;
        let b = self.site_bit(j_next)?;
        if j_next != j % self.n + 1 {
            return Err(Error::InvalidSite(format!("({j}, {j_next})"), self.n));
        }
        let same = Complex64::from_polar(1.0, -theta / 2.0);
        let diff = same.conj();
        for (x, amp) in self.amps.iter_mut().enumerate() {
            let aligned = ((x >> a) ^ (x >> b)) & 1 == 0;
            *amp *= if aligned { same } else { diff };
        }
        Ok(())
    }

    /// `exp(-i theta/2 X_j)` on site `j` (1-based).
    pub fn apply_rx(&mut self, j: usize, theta: f64) -> Result<()> {
        let q = self.site_bit(j)?;
        let (s, c) = (theta / 2.0).sin_cos();
        rotate_x(&mut self.amps, q, c, s);
        Ok(())
    }

    /// The same X rotation on every site.
    pub fn apply_rx_all(&mut self, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        for q in 0..self.n {
            rotate_x(&mut self.amps, q, c, s);
        }
    }

    /// `<psi| H_p |psi>`; the problem Hamiltonian is diagonal.
    pub fn energy(&self, model: &RingModel) -> Result<f64> {
        if self.n != model.n() {
            return Err(Error::DimensionMismatch {
                expected: model.n(),
                got: self.n,
            });
        }
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(x, a)| a.norm_sqr() * model.basis_energy(x))
            .sum())
    }
}

/// `(c I - i s X)` on qubit `q`.
#[inline]
fn rotate_x(amps: &mut [Complex64], q: usize, c: f64, s: f64) {
    let stride = 1usize << q;
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (ar, ai, br, bi) = (a.re, a.im, b.re, b.im);
            *a = Complex64::new(c * ar + s * bi, c * ai - s * br);
            *b = Complex64::new(c * br + s * ai, c * bi - s * ar);
        }
    }
}

/// Controls for the dt-halving convergence loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrotterParams {
    /// First slice width tried.
    pub dt: f64,
    /// Convergence threshold on successive energies.
    pub de_tol: f64,
    pub halving_factor: f64,
    /// Give up once the next slice width would fall below this.
    pub dt_floor: f64,
}

impl Default for TrotterParams {
    fn default() -> Self {
        TrotterParams {
            dt: 1.0,
            de_tol: 1e-3,
            halving_factor: 0.5,
            dt_floor: 1e-4,
        }
    }
}

impl TrotterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.de_tol > 0.0) || !(self.dt_floor > 0.0) {
            return Err(Error::InvalidArgument("Trotter dt, dE and floor must be positive".into()));
        }
        if !(self.halving_factor > 0.0 && self.halving_factor < 1.0) {
            return Err(Error::InvalidArgument("halving factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Outcome of the dt-convergence loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergedEnergy {
    pub energy: f64,
    /// Slice width of the last (accepted) evaluation.
    pub dt: f64,
    /// Number of evolutions performed.
    pub evolutions: usize,
}

/// One Trotter slice `[start, start + width)` with the schedule sampled at `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slice {
    pub index: usize,
    pub start: f64,
    pub width: f64,
    pub a: f64,
}

/// Slices covering `[0, T]`; the last one is shortened to end exactly at `T`.
pub fn slices(schedule: &Schedule, dt: f64) -> Result<Vec<Slice>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let total = schedule.total_time();
    let q = total / dt;
    let count = if (q - q.round()).abs() < 1e-9 { q.round() } else { q.ceil() }.max(1.0) as usize;
    Ok((0..count)
        .map(|index| {
            let start = index as f64 * dt;
            let width = if index + 1 == count { total - start } else { dt };
            Slice {
                index,
                start,
                width,
                a: schedule.value_at(start),
            }
        })
        .collect())
}

/// One row of the optional per-slice diagnostic trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceRecord {
    pub t: f64,
    pub a: f64,
    pub norm: f64,
    pub energy: f64,
    pub x_parity: f64,
}

#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct InvariantStats {
    pub slices_checked: u64,
    pub max_norm_deviation: f64,
    pub max_parity_deviation: f64,
}

/// Trotterized evolution for one model.
#[derive(Debug)]
pub struct TrotterSimulator {
    model: RingModel,
    /// Distinct problem energies.
    levels: Vec<f64>,
    /// Index into `levels` for every basis state.
    level_of: Vec<u32>,
    checks: Option<Mutex<InvariantStats>>,
}

impl TrotterSimulator {
    pub fn new(model: &RingModel) -> Result<Self> {
        StateVector::check_size(model.n())?;
        let dim = 1usize << model.n();
        let diag: Vec<f64> = (0..dim).map(|x| model.basis_energy(x)).collect();
        let mut sorted = diag.clone();
        sorted.sort_by(f64::total_cmp);
        let mut levels: Vec<f64> = Vec::new();
        for e in sorted {
            if levels.last().is_none_or(|&l| (e - l).abs() > 1e-12) {
                levels.push(e);
            }
        }
        let level_of = diag
            .iter()
            .map(|&e| {
                let i = levels.partition_point(|&l| l < e - 1e-12);
                i as u32
            })
            .collect();
        Ok(TrotterSimulator {
            model: model.clone(),
            levels,
            level_of,
            checks: None,
        })
    }

    /// Verify norm and X^N symmetry after every slice, failing the evolution
    /// when either drifts past [`NORM_TOLERANCE`] / [`PARITY_TOLERANCE`].
    pub fn with_invariant_checks(mut self) -> Self {
        self.checks = Some(Mutex::new(InvariantStats::default()));
        self
    }

    pub fn invariant_stats(&self) -> Option<InvariantStats> {
        self.checks.as_ref().map(|m| *m.lock().unwrap())
    }

    pub fn model(&self) -> &RingModel {
        &self.model
    }

    /// Multiply each amplitude by `exp(-i phi E_x)`.
    fn apply_problem_phase(&self, state: &mut StateVector, phi: f64) {
        let phases: Vec<Complex64> = self
            .levels
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -phi * e))
            .collect();
        for (amp, &l) in state.amps.iter_mut().zip(&self.level_of) {
            *amp *= phases[l as usize];
        }
    }

    /// One slice: all ZZ rotations, then all X rotations.
    pub fn apply_slice(&self, state: &mut StateVector, width: f64, a: f64) {
        // Product over j of RZZ(-2 w A J_j) equals exp(-i w A H_p).
        self.apply_problem_phase(state, width * a);
        state.apply_rx_all(-2.0 * width * (1.0 - a));
    }

    fn check(&self, state: &StateVector, slice: &Slice) -> Result<()> {
        let Some(stats) = &self.checks else {
            return Ok(());
        };
        let norm_dev = (state.norm_sqr() - 1.0).abs();
        let parity_dev = (state.x_parity() - 1.0).abs();
        let mut s = stats.lock().unwrap();
        s.slices_checked += 1;
        s.max_norm_deviation = s.max_norm_deviation.max(norm_dev);
        s.max_parity_deviation = s.max_parity_deviation.max(parity_dev);
        if norm_dev >= NORM_TOLERANCE || parity_dev >= PARITY_TOLERANCE {
            return Err(Error::InvariantViolated(format!(
                "after slice {} (t = {}): |norm - 1| = {norm_dev:.3e}, |<X^N> - 1| = {parity_dev:.3e}",
                slice.index, slice.start
            )));
        }
        Ok(())
    }

    /// Evolve `|+>^N` under the schedule, calling `observe` after every slice.
    pub fn evolve_observed<F>(&self, schedule: &Schedule, dt: f64, mut observe: F) -> Result<StateVector>
    where
        F: FnMut(&Slice, &StateVector) -> Result<()>,
    {
        let mut state = StateVector::plus_state(self.model.n())?;
        for slice in slices(schedule, dt)? {
            self.apply_slice(&mut state, slice.width, slice.a);
            self.check(&state, &slice)?;
            observe(&slice, &state)?;
        }
        Ok(state)
    }

    pub fn evolve(&self, schedule: &Schedule, dt: f64) -> Result<StateVector> {
        self.evolve_observed(schedule, dt, |_, _| Ok(()))
    }

    pub fn energy(&self, state: &StateVector) -> Result<f64> {
        if state.n != self.model.n() {
            return Err(Error::DimensionMismatch {
                expected: self.model.n(),
                got: state.n,
            });
        }
        Ok(state
            .amps
            .iter()
            .zip(&self.level_of)
            .map(|(a, &l)| a.norm_sqr() * self.levels[l as usize])
            .sum())
    }

    pub fn energy_at(&self, schedule: &Schedule, dt: f64) -> Result<f64> {
        let state = self.evolve(schedule, dt)?;
        self.energy(&state)
    }

    /// Halve dt until two successive energies agree to `de_tol`; also returns
    /// the final state of the accepted evolution.
    pub fn converged(&self, schedule: &Schedule, params: &TrotterParams) -> Result<(ConvergedEnergy, StateVector)> {
        params.validate()?;
        let mut dt = params.dt;
        let mut state = self.evolve(schedule, dt)?;
        let mut prev = self.energy(&state)?;
        let mut evolutions = 1;
        let mut last_change = f64::NAN;
        loop {
            let next = dt * params.halving_factor;
            if next < params.dt_floor {
                return Err(Error::NotConverged {
                    floor: params.dt_floor,
                    last_change,
                });
            }
            state = self.evolve(schedule, next)?;
            let e = self.energy(&state)?;
            evolutions += 1;
            last_change = (e - prev).abs();
            if last_change < params.de_tol {
                return Ok((
                    ConvergedEnergy {
                        energy: e,
                        dt: next,
                        evolutions,
                    },
                    state,
                ));
            }
            prev = e;
            dt = next;
        }
    }

    pub fn converged_energy(&self, schedule: &Schedule, params: &TrotterParams) -> Result<ConvergedEnergy> {
        self.converged(schedule, params).map(|(c, _)| c)
    }

    /// Per-slice diagnostics: t, A(t), norm, <H_p>, <X^N> at every slice end.
    pub fn slice_trace(&self, schedule: &Schedule, dt: f64) -> Result<Vec<SliceRecord>> {
        let mut rows = Vec::new();
        self.evolve_observed(schedule, dt, |slice, state| {
            rows.push(SliceRecord {
                t: slice.start + slice.width,
                a: slice.a,
                norm: state.norm_sqr(),
                energy: self.energy(state)?,
                x_parity: state.x_parity(),
            });
            Ok(())
        })?;
        Ok(rows)
    }
}

pub fn write_slice_trace_csv<W: Write>(mut out: W, rows: &[SliceRecord]) -> Result<()> {
    writeln!(out, "t,A,norm,energy,x_parity")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.t, r.a, r.norm, r.energy, r.x_parity)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn plus_state_expectations() {
        let s = StateVector::plus_state(2).unwrap();
        assert!(s.amplitudes().iter().all(|a| close(*a, Complex64::new(0.5, 0.0))));
        let m = RingModel::with_defaults(5).unwrap();
        let s = StateVector::plus_state(5).unwrap();
        assert!(s.energy(&m).unwrap().abs() < 1e-12);
        // <H_d> = -sum_j <X_j> = -N for |+>^N.
        let mut shifted = s.clone();
        let mut hd = 0.0;
        for j in 1..=5 {
            // X_j expectation via a pi rotation: RX(pi) = -iX.
            shifted.clone_from(&s);
            shifted.apply_rx(j, PI).unwrap();
            let overlap: Complex64 = s
                .amplitudes()
                .iter()
                .zip(shifted.amplitudes())
                .map(|(a, b)| a.conj() * b)
                .sum();
            hd -= (overlap * Complex64::i()).re;
        }
        assert!((hd + 5.0).abs() < 1e-12);
        assert!(StateVector::plus_state(0).is_err());
        assert!(StateVector::plus_state(MAX_STATEVECTOR_QUBITS + 1).is_err());
    }

    #[test]
    fn rzz_phases() {
        let mut s = StateVector::basis_state(2, 0b00).unwrap();
        s.apply_rzz(1, 2, PI).unwrap();
        assert!(close(s.amplitudes()[0], Complex64::from_polar(1.0, -PI / 2.0)));
        // Site 1 is bit 0: |01> has site 2 flipped.
        let mut s = StateVector::basis_state(2, 0b10).unwrap();
        s.apply_rzz(1, 2, PI).unwrap();
        assert!(close(s.amplitudes()[2], Complex64::from_polar(1.0, PI / 2.0)));
        let mut s = StateVector::plus_state(3).unwrap();
        let before = s.clone();
        s.apply_rzz(3, 1, 0.0).unwrap();
        assert_eq!(s, before);
        assert!(s.apply_rzz(1, 3, 0.3).is_err());
        assert!(s.apply_rzz(0, 1, 0.3).is_err());
    }

    #[test]
    fn rx_rotations() {
        let mut s = StateVector::basis_state(1, 0).unwrap();
        s.apply_rx(1, PI).unwrap();
        assert!(close(s.amplitudes()[1], Complex64::new(0.0, -1.0)));
        assert!(s.amplitudes()[0].norm() < 1e-12);

        let mut s = StateVector::plus_state(3).unwrap();
        let before = s.clone();
        s.apply_rx(2, 0.0).unwrap();
        assert_eq!(s, before);
        s.apply_rx(2, 0.7).unwrap();
        let phase = Complex64::from_polar(1.0, -0.35);
        for (a, b) in s.amplitudes().iter().zip(before.amplitudes()) {
            assert!(close(*a, b * phase));
        }
        assert!(s.apply_rx(4, 0.1).is_err());
    }

    #[test]
    fn fused_problem_layer_matches_individual_gates() {
        let m = RingModel::with_defaults(5).unwrap();
        let sim = TrotterSimulator::new(&m).unwrap();
        let mut a = StateVector::plus_state(5).unwrap();
        a.apply_rx(2, 0.4).unwrap();
        a.apply_rx(5, 1.1).unwrap();
        let mut b = a.clone();
        let (w, amp) = (0.3, 0.8);
        for j in 1..=5 {
            b.apply_rzz(j, j % 5 + 1, -2.0 * w * amp * m.coupling(j).unwrap()).unwrap();
        }
        sim.apply_problem_phase(&mut a, w * amp);
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!(close(*x, *y));
        }
    }

    #[test]
    fn basis_state_energies() {
        let m = RingModel::with_defaults(5).unwrap();
        let e0 = m.exact_spectrum().e0;
        let s = StateVector::basis_state(5, 0).unwrap();
        assert!((s.energy(&m).unwrap() - e0).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![Complex64::new(0.0, 0.0); 32];
        amps[0] = Complex64::new(h, 0.0);
        amps[31] = Complex64::new(0.0, h);
        let s = StateVector::from_amplitudes(5, amps).unwrap();
        assert!((s.energy(&m).unwrap() - e0).abs() < 1e-12);
        let wrong = StateVector::plus_state(3).unwrap();
        assert!(wrong.energy(&m).is_err());
    }

    #[test]
    fn slicing_ends_exactly_at_t() {
        let s = Schedule::linear(12.5).unwrap();
        let sl = slices(&s, 0.1).unwrap();
        assert_eq!(sl.len(), 125);
        let sl = slices(&s, 1.0).unwrap();
        assert_eq!(sl.len(), 13);
        assert!((sl[12].width - 0.5).abs() < 1e-12);
        let total: f64 = sl.iter().map(|x| x.width).sum();
        assert!((total - 12.5).abs() < 1e-12);
        assert_eq!(sl[0].a, 0.0);
    }

    #[test]
    fn tiny_anneal_stays_near_plus_state() {
        let m = RingModel::with_defaults(5).unwrap();
        let sim = TrotterSimulator::new(&m).unwrap().with_invariant_checks();
        let s = Schedule::linear(1e-6).unwrap();
        let c = sim.converged_energy(&s, &TrotterParams::default()).unwrap();
        assert!(c.energy.abs() < 1e-5);
    }

    #[test]
    fn invariants_hold_along_an_anneal() {
        let m = RingModel::with_defaults(5).unwrap();
        let sim = TrotterSimulator::new(&m).unwrap().with_invariant_checks();
        let s = Schedule::new(6.0, vec![(1.5, 0.9), (3.0, 1.4), (4.5, -0.3)]).unwrap();
        let out = sim.evolve(&s, 0.05).unwrap();
        assert!((out.x_parity() - 1.0).abs() < 1e-10);
        let stats = sim.invariant_stats().unwrap();
        assert_eq!(stats.slices_checked, 120);
        assert!(stats.max_norm_deviation < NORM_TOLERANCE);
    }

    #[test]
    fn energy_is_invariant_under_global_flip() {
        // Relabel basis states x -> !x: the flipped state has the same energy.
        let m = RingModel::with_defaults(7).unwrap();
        let sim = TrotterSimulator::new(&m).unwrap();
        let s = Schedule::new(5.0, vec![(2.5, 0.7)]).unwrap();
        let out = sim.evolve(&s, 0.1).unwrap();
        let mask = (1 << 7) - 1;
        let flipped: Vec<Complex64> = (0..1 << 7).map(|x| out.amplitudes()[x ^ mask]).collect();
        let f = StateVector::from_amplitudes(7, flipped).unwrap();
        assert!((sim.energy(&out).unwrap() - sim.energy(&f).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn slice_trace_csv() {
        let m = RingModel::with_defaults(5).unwrap();
        let sim = TrotterSimulator::new(&m).unwrap();
        let rows = sim.slice_trace(&Schedule::linear(2.0).unwrap(), 0.5).unwrap();
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_slice_trace_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,A,norm,energy,x_parity\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn convergence_floor_is_reported() {
        let m = RingModel::with_defaults(5).unwrap();
        let sim = TrotterSimulator::new(&m).unwrap();
        let p = TrotterParams {
            de_tol: 1e-14,
            dt_floor: 0.2,
            ..TrotterParams::default()
        };
        let err = sim.converged_energy(&Schedule::linear(5.0).unwrap(), &p).unwrap_err();
        assert!(matches!(err, Error::NotConverged { .. }));
    }
}
