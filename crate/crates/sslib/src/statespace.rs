use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsError};
use crate::linalg;

/// A named, contiguous block of input or output channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelGroup {
    pub name: String,
    pub size: usize,
}

/// Ordered list of channel groups labelling the inputs or outputs of a system.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Channels {
    groups: Vec<ChannelGroup>,
}

impl Channels {
    pub fn new<S: Into<String>>(groups: impl IntoIterator<Item = (S, usize)>) -> Self {
        Channels {
            groups: groups
                .into_iter()
                .map(|(name, size)| ChannelGroup { name: name.into(), size })
                .collect(),
        }
    }

    pub fn single(name: &str, size: usize) -> Self {
        Self::new([(name, size)])
    }

    pub fn groups(&self) -> &[ChannelGroup] {
        &self.groups
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.size).sum()
    }

    /// Index range of the first group called `name`.
    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        let mut start = 0;
        for g in &self.groups {
            if g.name == name {
                return Some(start..start + g.size);
            }
            start += g.size;
        }
        None
    }

    pub fn require(&self, name: &str) -> Result<Range<usize>> {
        self.range(name).ok_or_else(|| SsError::UnknownChannel(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.groups.iter().any(|g| g.name == name)
    }

    pub fn concat(&self, other: &Channels) -> Channels {
        let mut groups = self.groups.clone();
        groups.extend(other.groups.iter().cloned());
        Channels { groups }
    }
}

/// Continuous-time LTI system `x' = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub inputs: Channels,
    pub outputs: Channels,
}

fn check_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SsError::NonFinite(what))
    }
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(SsError::Dimension(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        check_finite(&a, "A")?;
        check_finite(&b, "B")?;
        check_finite(&c, "C")?;
        check_finite(&d, "D")?;
        let inputs = Channels::single("u", b.ncols());
        let outputs = Channels::single("y", c.nrows());
        Ok(StateSpace { a, b, c, d, inputs, outputs })
    }

    /// Static gain with no states.
    pub fn gain(d: DMatrix<f64>) -> Self {
        let (p, m) = d.shape();
        StateSpace::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, m), DMatrix::zeros(p, 0), d)
            .expect("static gain dimensions are consistent")
    }

    pub fn zero(p: usize, m: usize) -> Self {
        Self::gain(DMatrix::zeros(p, m))
    }

    pub fn identity(m: usize) -> Self {
        Self::gain(DMatrix::identity(m, m))
    }

    pub fn with_inputs(mut self, inputs: Channels) -> Result<Self> {
        if inputs.total() != self.ninputs() {
            return Err(SsError::Dimension(format!(
                "input labels cover {} channels, system has {}",
                inputs.total(),
                self.ninputs()
            )));
        }
        self.inputs = inputs;
        Ok(self)
    }

    pub fn with_outputs(mut self, outputs: Channels) -> Result<Self> {
        if outputs.total() != self.noutputs() {
            return Err(SsError::Dimension(format!(
                "output labels cover {} channels, system has {}",
                outputs.total(),
                self.noutputs()
            )));
        }
        self.outputs = outputs;
        Ok(self)
    }

    pub fn nstates(&self) -> usize {
        self.a.nrows()
    }

    pub fn ninputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn noutputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.a)
    }

    /// Largest real part of the poles, `-inf` for a static system.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        Ok(self.poles()?.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn is_stable(&self) -> bool {
        matches!(self.spectral_abscissa(), Ok(a) if a < -1e-9)
    }

    pub fn ensure_stable(&self) -> Result<()> {
        let a = self.spectral_abscissa()?;
        if a < -1e-9 {
            Ok(())
        } else {
            Err(SsError::Unstable(a))
        }
    }

    /// Transfer matrix at complex frequency `s`.
    pub fn eval(&self, s: Complex64) -> DMatrix<Complex64> {
        let d = self.d.map(|v| Complex64::new(v, 0.0));
        let n = self.nstates();
        if n == 0 {
            return d;
        }
        let mut m = self.a.map(|v| Complex64::new(-v, 0.0));
        for i in 0..n {
            m[(i, i)] += s;
        }
        let b = self.b.map(|v| Complex64::new(v, 0.0));
        let x = m.lu().solve(&b).unwrap_or_else(|| DMatrix::from_element(n, self.ninputs(), Complex64::new(f64::INFINITY, 0.0)));
        self.c.map(|v| Complex64::new(v, 0.0)) * x + d
    }

    pub fn freq_resp(&self, w: f64) -> DMatrix<Complex64> {
        self.eval(Complex64::new(0.0, w))
    }

    pub fn dc_gain(&self) -> Result<DMatrix<f64>> {
        if self.nstates() == 0 {
            return Ok(self.d.clone());
        }
        let x = self.a.clone().lu().solve(&self.b).ok_or(SsError::Singular("dc gain"))?;
        Ok(&self.d - &self.c * x)
    }

    /// Output map `C x + D u`.
    pub fn output(&self, x: &nalgebra::DVector<f64>, u: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        &self.c * x + &self.d * u
    }

    pub fn select(&self, inputs: Range<usize>, outputs: Range<usize>) -> Result<StateSpace> {
        if inputs.end > self.ninputs() || outputs.end > self.noutputs() {
            return Err(SsError::Dimension("channel selection out of range".into()));
        }
        let n = self.nstates();
        let (mi, po) = (inputs.len(), outputs.len());
        StateSpace::new(
            self.a.clone(),
            self.b.view((0, inputs.start), (n, mi)).into_owned(),
            self.c.view((outputs.start, 0), (po, n)).into_owned(),
            self.d.view((outputs.start, inputs.start), (po, mi)).into_owned(),
        )
    }

    /// Subsystem from the named input groups to the named output groups.
    pub fn select_groups(&self, inputs: &[&str], outputs: &[&str]) -> Result<StateSpace> {
        let ins: Vec<Range<usize>> = inputs.iter().map(|g| self.inputs.require(g)).collect::<Result<_>>()?;
        let outs: Vec<Range<usize>> = outputs.iter().map(|g| self.outputs.require(g)).collect::<Result<_>>()?;
        let icols: Vec<usize> = ins.iter().flat_map(|r| r.clone()).collect();
        let orows: Vec<usize> = outs.iter().flat_map(|r| r.clone()).collect();
        let n = self.nstates();
        let b = DMatrix::from_fn(n, icols.len(), |i, j| self.b[(i, icols[j])]);
        let c = DMatrix::from_fn(orows.len(), n, |i, j| self.c[(orows[i], j)]);
        let d = DMatrix::from_fn(orows.len(), icols.len(), |i, j| self.d[(orows[i], icols[j])]);
        let in_labels = Channels::new(inputs.iter().zip(&ins).map(|(g, r)| (g.to_string(), r.len())));
        let out_labels = Channels::new(outputs.iter().zip(&outs).map(|(g, r)| (g.to_string(), r.len())));
        StateSpace::new(self.a.clone(), b, c, d)?.with_inputs(in_labels)?.with_outputs(out_labels)
    }

    /// Series connection: `next` driven by the output of `self`.
    pub fn then(&self, next: &StateSpace) -> Result<StateSpace> {
        if next.ninputs() != self.noutputs() {
            return Err(SsError::Dimension(format!(
                "series: {} outputs feed {} inputs",
                self.noutputs(),
                next.ninputs()
            )));
        }
        let (n1, n2) = (self.nstates(), next.nstates());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&next.b * &self.c));
        let mut b = DMatrix::zeros(n1 + n2, self.ninputs());
        b.view_mut((0, 0), (n1, self.ninputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.ninputs())).copy_from(&(&next.b * &self.d));
        let mut c = DMatrix::zeros(next.noutputs(), n1 + n2);
        c.view_mut((0, 0), (next.noutputs(), n1)).copy_from(&(&next.d * &self.c));
        c.view_mut((0, n1), (next.noutputs(), n2)).copy_from(&next.c);
        let d = &next.d * &self.d;
        let mut g = StateSpace::new(a, b, c, d)?;
        g.inputs = self.inputs.clone();
        g.outputs = next.outputs.clone();
        Ok(g)
    }

    /// Product `self * rhs` as transfer matrices.
    pub fn mul(&self, rhs: &StateSpace) -> Result<StateSpace> {
        rhs.then(self)
    }

    fn parallel(&self, other: &StateSpace, sign: f64) -> Result<StateSpace> {
        if self.ninputs() != other.ninputs() || self.noutputs() != other.noutputs() {
            return Err(SsError::Dimension("parallel connection needs equal shapes".into()));
        }
        let (n1, n2) = (self.nstates(), other.nstates());
        let a = linalg::blkdiag(&self.a, &other.a);
        let b = linalg::vstack(&self.b, &other.b);
        let c = linalg::hstack(&self.c, &(&other.c * sign));
        let d = &self.d + &other.d * sign;
        debug_assert_eq!(a.nrows(), n1 + n2);
        let mut g = StateSpace::new(a, b, c, d)?;
        g.inputs = self.inputs.clone();
        g.outputs = self.outputs.clone();
        Ok(g)
    }

    pub fn add(&self, other: &StateSpace) -> Result<StateSpace> {
        self.parallel(other, 1.0)
    }

    pub fn sub(&self, other: &StateSpace) -> Result<StateSpace> {
        self.parallel(other, -1.0)
    }

    pub fn neg(&self) -> StateSpace {
        let mut g = self.clone();
        g.c = -g.c;
        g.d = -g.d;
        g
    }

    /// `M * G` for a constant matrix `M`.
    pub fn scale_outputs(&self, m: &DMatrix<f64>) -> Result<StateSpace> {
        if m.ncols() != self.noutputs() {
            return Err(SsError::Dimension("output scaling".into()));
        }
        let mut g = StateSpace::new(self.a.clone(), self.b.clone(), m * &self.c, m * &self.d)?;
        if m.nrows() == self.noutputs() {
            g.outputs = self.outputs.clone();
        }
        g.inputs = self.inputs.clone();
        Ok(g)
    }

    /// `G * M` for a constant matrix `M`.
    pub fn scale_inputs(&self, m: &DMatrix<f64>) -> Result<StateSpace> {
        if m.nrows() != self.ninputs() {
            return Err(SsError::Dimension("input scaling".into()));
        }
        let mut g = StateSpace::new(self.a.clone(), &self.b * m, self.c.clone(), &self.d * m)?;
        if m.ncols() == self.ninputs() {
            g.inputs = self.inputs.clone();
        }
        g.outputs = self.outputs.clone();
        Ok(g)
    }

    /// `[G1 G2 ...]`: common output, stacked inputs.
    pub fn hstack(systems: &[&StateSpace]) -> Result<StateSpace> {
        let first = systems.first().ok_or_else(|| SsError::Dimension("empty hstack".into()))?;
        let p = first.noutputs();
        let mut acc = (*first).clone();
        for g in &systems[1..] {
            if g.noutputs() != p {
                return Err(SsError::Dimension("hstack needs equal output counts".into()));
            }
            let a = linalg::blkdiag(&acc.a, &g.a);
            let b = linalg::blkdiag(&acc.b, &g.b);
            let c = linalg::hstack(&acc.c, &g.c);
            let d = linalg::hstack(&acc.d, &g.d);
            let inputs = acc.inputs.concat(&g.inputs);
            let outputs = acc.outputs.clone();
            acc = StateSpace::new(a, b, c, d)?;
            acc.inputs = inputs;
            acc.outputs = outputs;
        }
        Ok(acc)
    }

    /// `[G1; G2; ...]`: common input, stacked outputs.
    pub fn vstack(systems: &[&StateSpace]) -> Result<StateSpace> {
        let first = systems.first().ok_or_else(|| SsError::Dimension("empty vstack".into()))?;
        let m = first.ninputs();
        let mut acc = (*first).clone();
        for g in &systems[1..] {
            if g.ninputs() != m {
                return Err(SsError::Dimension("vstack needs equal input counts".into()));
            }
            let a = linalg::blkdiag(&acc.a, &g.a);
            let b = linalg::vstack(&acc.b, &g.b);
            let c = linalg::blkdiag(&acc.c, &g.c);
            let d = linalg::vstack(&acc.d, &g.d);
            let outputs = acc.outputs.concat(&g.outputs);
            let inputs = acc.inputs.clone();
            acc = StateSpace::new(a, b, c, d)?;
            acc.inputs = inputs;
            acc.outputs = outputs;
        }
        Ok(acc)
    }

    /// Block-diagonal append.
    pub fn blkdiag(systems: &[&StateSpace]) -> Result<StateSpace> {
        let first = systems.first().ok_or_else(|| SsError::Dimension("empty blkdiag".into()))?;
        let mut acc = (*first).clone();
        for g in &systems[1..] {
            let inputs = acc.inputs.concat(&g.inputs);
            let outputs = acc.outputs.concat(&g.outputs);
            acc = StateSpace::new(
                linalg::blkdiag(&acc.a, &g.a),
                linalg::blkdiag(&acc.b, &g.b),
                linalg::blkdiag(&acc.c, &g.c),
                linalg::blkdiag(&acc.d, &g.d),
            )?;
            acc.inputs = inputs;
            acc.outputs = outputs;
        }
        Ok(acc)
    }

    /// Inverse system; requires square invertible `D`.
    pub fn inverse(&self) -> Result<StateSpace> {
        if self.ninputs() != self.noutputs() {
            return Err(SsError::Dimension("inverse of non-square system".into()));
        }
        let di = self.d.clone().try_inverse().ok_or(SsError::Singular("feedthrough inverse"))?;
        let a = &self.a - &self.b * &di * &self.c;
        let b = &self.b * &di;
        let c = -(&di * &self.c);
        let mut g = StateSpace::new(a, b, c, di)?;
        g.inputs = Channels::new(self.outputs.groups().iter().map(|g| (g.name.clone(), g.size)));
        g.outputs = Channels::new(self.inputs.groups().iter().map(|g| (g.name.clone(), g.size)));
        Ok(g)
    }

    /// Dual system `(A', C', B', D')`.
    pub fn transpose(&self) -> StateSpace {
        StateSpace {
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
            d: self.d.transpose(),
            inputs: self.outputs.clone(),
            outputs: self.inputs.clone(),
        }
    }
}
