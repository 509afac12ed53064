//! Zero-order-hold discretization and stepping of LTI blocks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SsError};
use crate::linalg;
use crate::statespace::StateSpace;

/// `x[k+1] = Phi x[k] + Gamma u[k]`, `y[k] = C x[k] + D u[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl Discrete {
    /// Exact discretization with inputs held constant over each step.
    pub fn zoh(g: &StateSpace, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(SsError::Dimension("dt must be positive".into()));
        }
        let (n, m) = (g.nstates(), g.ninputs());
        let aug = linalg::block(&[&[&g.a, &g.b], &[&DMatrix::zeros(m, n), &DMatrix::zeros(m, m)]]) * dt;
        let e = aug.exp();
        Ok(Discrete {
            phi: e.view((0, 0), (n, n)).into_owned(),
            gamma: e.view((0, n), (n, m)).into_owned(),
            c: g.c.clone(),
            d: g.d.clone(),
        })
    }

    pub fn nstates(&self) -> usize {
        self.phi.nrows()
    }
}

/// A discretized block together with its state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBlock {
    pub sys: Discrete,
    pub x: DVector<f64>,
}

impl DiscreteBlock {
    pub fn new(g: &StateSpace, dt: f64) -> Result<Self> {
        let sys = Discrete::zoh(g, dt)?;
        let x = DVector::zeros(sys.nstates());
        Ok(DiscreteBlock { sys, x })
    }

    /// Output for the current state and input.
    pub fn output(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.sys.c * &self.x + &self.sys.d * u
    }

    /// Advance the state with `u` held over the step.
    pub fn advance(&mut self, u: &DVector<f64>) {
        self.x = &self.sys.phi * &self.x + &self.sys.gamma * u;
    }

    /// Output, then advance.
    pub fn step(&mut self, u: &DVector<f64>) -> DVector<f64> {
        let y = self.output(u);
        self.advance(u);
        y
    }

    pub fn reset(&mut self) {
        self.x.fill(0.0);
    }
}
