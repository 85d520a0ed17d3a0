//! Heisenberg-picture energy evaluation inside the Lie algebra.
//!
//! With `U = U_S ... U_1` the Trotterized propagator, the energy is
//! `<+| U^dag H_p U |+>`. Conjugating an algebra element by one slice
//! `exp(-i w (1-A) H_d) exp(-i w A H_p)` acts on coordinates as
//! `exp(w A K_p) exp(w (1-A) K_d)`, where `K_g` is the adjoint of `iH_g`.
//! Slices are therefore applied from the last to the first, starting from the
//! coordinates of `H_p`, and the energy is `w . v`.
//!
//! The exponentials come from Hermitian eigendecompositions of `iK_d` and
//! `iK_p`; the coordinate vector alternates between the two eigenbases.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::closure::{DlaBasis, Generator};
use crate::error::{Error, Result};
use crate::ring_model::RingModel;
use crate::schedule::Schedule;
use crate::statevector::{slices, ConvergedEnergy, TrotterParams};

/// Energy of one evolution plus the largest deviation of `|v|` from its start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisenbergOutcome {
    pub energy: f64,
    pub norm_drift: f64,
}

#[derive(Debug, Clone)]
pub struct DlaSimulator {
    basis: Arc<DlaBasis>,
    /// `iK_d = U_d diag(lam_d) U_d^dag`.
    lam_d: Vec<f64>,
    lam_p: Vec<f64>,
    /// `U_p^dag U_d`.
    m: DMatrix<Complex64>,
    m_adj: DMatrix<Complex64>,
    /// `U_d^dag hp`.
    start: DVector<Complex64>,
    /// `U_d^T w`.
    readout: DVector<Complex64>,
    norm0: f64,
}

fn hermitian_eigen(k: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let h = k.map(|x| Complex64::new(0.0, x));
    let eig = nalgebra::SymmetricEigen::try_new(h, 1e-15, 0)
        .ok_or_else(|| Error::Diagonalization("adjoint eigendecomposition did not converge".into()))?;
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

impl DlaSimulator {
    pub fn new(basis: Arc<DlaBasis>) -> Result<Self> {
        let (lam_d, ud) = hermitian_eigen(basis.adjoint(Generator::Driver))?;
        let (lam_p, up) = hermitian_eigen(basis.adjoint(Generator::Problem))?;
        let m = up.adjoint() * &ud;
        let hp = DVector::from_iterator(
            basis.dimension(),
            basis.problem_coordinates().iter().map(|&x| Complex64::new(x, 0.0)),
        );
        let w = DVector::from_iterator(
            basis.dimension(),
            basis.expectation_vector().iter().map(|&x| Complex64::new(x, 0.0)),
        );
        let norm0 = hp.norm();
        Ok(DlaSimulator {
            start: ud.adjoint() * hp,
            readout: ud.transpose() * w,
            m_adj: m.adjoint(),
            m,
            lam_d,
            lam_p,
            basis,
            norm0,
        })
    }

    /// Build the closure for `model` and set up the propagator.
    pub fn for_model(model: &RingModel) -> Result<Self> {
        Self::new(Arc::new(super::closure::lie_closure(model)?))
    }

    pub fn basis(&self) -> &DlaBasis {
        &self.basis
    }

    fn check_model(&self, model: &RingModel) -> Result<()> {
        if self.basis.couplings() != model.couplings() {
            return Err(Error::InvalidArgument("Lie basis was built for a different model".into()));
        }
        Ok(())
    }

    /// Energy after the Trotterized anneal with slice width `dt`; slices are
    /// identical to the state-vector backend's.
    pub fn evolve(&self, schedule: &Schedule, dt: f64) -> Result<HeisenbergOutcome> {
        let sl = slices(schedule, dt)?;
        let mut y = self.start.clone();
        let mut z = DVector::zeros(y.len());
        let mut drift = 0.0f64;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        for s in sl.iter().rev() {
            let (tau_d, tau_p) = (s.width * (1.0 - s.a), s.width * s.a);
            for (v, &l) in y.iter_mut().zip(&self.lam_d) {
                *v *= Complex64::from_polar(1.0, -tau_d * l);
            }
            z.gemv(one, &self.m, &y, zero);
            for (v, &l) in z.iter_mut().zip(&self.lam_p) {
                *v *= Complex64::from_polar(1.0, -tau_p * l);
            }
            y.gemv(one, &self.m_adj, &z, zero);
            drift = drift.max((y.norm() - self.norm0).abs());
        }
        let e = self.readout.dot(&y);
        Ok(HeisenbergOutcome {
            energy: e.re,
            norm_drift: drift,
        })
    }

    pub fn energy_at(&self, schedule: &Schedule, dt: f64) -> Result<f64> {
        Ok(self.evolve(schedule, dt)?.energy)
    }

    /// Same dt-halving loop as the state-vector backend.
    pub fn converged_energy(&self, schedule: &Schedule, params: &TrotterParams) -> Result<ConvergedEnergy> {
        params.validate()?;
        let mut dt = params.dt;
        let mut prev = self.energy_at(schedule, dt)?;
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
            let e = self.energy_at(schedule, next)?;
            evolutions += 1;
            last_change = (e - prev).abs();
            if last_change < params.de_tol {
                return Ok(ConvergedEnergy {
                    energy: e,
                    dt: next,
                    evolutions,
                });
            }
            prev = e;
            dt = next;
        }
    }

    /// Continuous-time energy from classical RK4 on
    /// `dv/ds = [(1 - A(T-s)) K_d + A(T-s) K_p] v`, halving the step until two
    /// successive energies differ by less than `tol`.
    pub fn rk4_energy(&self, schedule: &Schedule, params: &TrotterParams) -> Result<ConvergedEnergy> {
        params.validate()?;
        let kd = self.basis.adjoint(Generator::Driver);
        let kp = self.basis.adjoint(Generator::Problem);
        let w = DVector::from_column_slice(self.basis.expectation_vector());
        let v0 = DVector::from_column_slice(self.basis.problem_coordinates());
        let total = schedule.total_time();
        let run = |h: f64| -> f64 {
            let steps = (total / h).ceil().max(1.0) as usize;
            let h = total / steps as f64;
            let mut v = v0.clone();
            let rhs = |s: f64, v: &DVector<f64>| -> DVector<f64> {
                let a = schedule.value_at((total - s).max(0.0));
                kd * v * (1.0 - a) + kp * v * a
            };
            for i in 0..steps {
                let s = i as f64 * h;
                let k1 = rhs(s, &v);
                let k2 = rhs(s + h / 2.0, &(&v + &k1 * (h / 2.0)));
                let k3 = rhs(s + h / 2.0, &(&v + &k2 * (h / 2.0)));
                let k4 = rhs(s + h, &(&v + &k3 * h));
                v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
            w.dot(&v)
        };
        let mut dt = params.dt;
        let mut prev = run(dt);
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
            let e = run(next);
            evolutions += 1;
            last_change = (e - prev).abs();
            if last_change < params.de_tol {
                return Ok(ConvergedEnergy {
                    energy: e,
                    dt: next,
                    evolutions,
                });
            }
            prev = e;
            dt = next;
        }
    }
}

/// Converged Heisenberg-picture energy of `schedule` on `model` using a
/// prepared simulator; `integrator_tol` replaces the loop's energy threshold.
pub fn heisenberg_energy(model: &RingModel, schedule: &Schedule, sim: &DlaSimulator, integrator_tol: f64) -> Result<f64> {
    sim.check_model(model)?;
    let params = TrotterParams {
        de_tol: integrator_tol,
        ..TrotterParams::default()
    };
    Ok(sim.converged_energy(schedule, &params)?.energy)
}
