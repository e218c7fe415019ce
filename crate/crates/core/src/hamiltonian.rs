//! Time-dependent system Hamiltonians seen by the propagators.

use crate::driving::DriveSchedule;
use crate::spin::{build_coupling_operator, ControlPoint, HamiltonianBlocks, SpinSystem};
use crate::{CMatrix, Result};

/// Anything that can report `H(t)` on a fixed Hilbert space.
pub trait HamiltonianSource {
    fn dim(&self) -> usize;

    /// Writes `H(t)` into `out`, which has shape `dim x dim`.
    fn write_at(&self, t: f64, out: &mut CMatrix) -> Result<()>;

    fn at(&self, t: f64) -> Result<CMatrix> {
        let mut h = CMatrix::zeros(self.dim(), self.dim());
        self.write_at(t, &mut h)?;
        Ok(h)
    }
}

impl<T: HamiltonianSource + ?Sized> HamiltonianSource for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn write_at(&self, t: f64, out: &mut CMatrix) -> Result<()> {
        (**self).write_at(t, out)
    }
}

/// A constant Hamiltonian.
#[derive(Debug, Clone)]
pub struct StaticHamiltonian(pub CMatrix);

impl HamiltonianSource for StaticHamiltonian {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn write_at(&self, _t: f64, out: &mut CMatrix) -> Result<()> {
        out.copy_from(&self.0);
        Ok(())
    }
}

/// `H_S(Lambda(t))` assembled from cached operator blocks, plus the optional
/// counterterm `(q/N) Q^2`.
#[derive(Debug, Clone)]
pub struct DrivenHamiltonian {
    blocks: HamiltonianBlocks,
    schedule: DriveSchedule,
    counterterm: Option<CMatrix>,
}

impl DrivenHamiltonian {
    /// `counterterm = Some((q, theta))` adds `(q/N) Q(theta)^2`.
    pub fn new(sys: &SpinSystem, schedule: DriveSchedule, counterterm: Option<(f64, f64)>) -> Self {
        let counterterm = counterterm.map(|(q, theta)| {
            let coupling = build_coupling_operator(sys, theta);
            (&coupling * &coupling).scale(q / sys.n_qubits() as f64)
        });
        Self { blocks: sys.blocks().clone(), schedule, counterterm }
    }

    pub fn schedule(&self) -> &DriveSchedule {
        &self.schedule
    }

    pub fn point_at(&self, t: f64) -> Result<ControlPoint> {
        self.schedule.lambda_at(t)
    }

    /// Hamiltonian at a control point, including the counterterm.
    pub fn at_point(&self, point: ControlPoint) -> CMatrix {
        let mut h = self.blocks.at(point);
        if let Some(c) = &self.counterterm {
            h += c;
        }
        h
    }
}

impl HamiltonianSource for DrivenHamiltonian {
    fn dim(&self) -> usize {
        self.blocks.jz.nrows()
    }

    fn write_at(&self, t: f64, out: &mut CMatrix) -> Result<()> {
        let point = self.schedule.lambda_at(t)?;
        out.copy_from(&self.blocks.jz);
        self.blocks.add_interaction(point, out);
        if let Some(c) = &self.counterterm {
            *out += c;
        }
        Ok(())
    }
}
