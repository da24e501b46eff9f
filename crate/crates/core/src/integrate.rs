//! Fixed-step explicit Runge–Kutta integration.
//!
//! RK6 is Butcher's seven-stage sixth-order method:
//!
//! ```text
//!   0   |
//!  1/3  | 1/3
//!  2/3  | 0      2/3
//!  1/3  | 1/12   1/3   -1/12
//!  1/2  | -1/16  9/8   -3/16  -3/8
//!  1/2  | 0      9/8   -3/8   -3/4   1/2
//!   1   | 9/44  -9/11  63/44  18/11  0     -16/11
//! ------+-------------------------------------------------
//!       | 11/120  0    27/40  27/40  -4/15  -4/15  11/120
//! ```
//!
//! RK4 is the classical four-stage method. Time is advanced as `t0 + k h`
//! and the final step is shortened to land exactly on `t1`.

use std::io::Write;
use std::ops::ControlFlow;

use crate::dynamics::{NetworkSystem, OscillatorModel};
use crate::error::{Error, Result};

/// Right-hand side of an autonomous or non-autonomous ODE `x' = F(t, x)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()>;
}

impl<M: OscillatorModel> OdeSystem for NetworkSystem<'_, M> {
    fn dim(&self) -> usize {
        self.state_dim()
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        self.network_rhs(t, x, dx)
    }
}

/// Adapts a closure into an [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> FnSystem<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        (self.f)(t, x, dx);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk6,
    Rk4,
}

struct Tableau {
    c: &'static [f64],
    /// Row `i` holds `a_{i,0..i}`.
    a: &'static [&'static [f64]],
    b: &'static [f64],
}

const RK6: Tableau = Tableau {
    c: &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 0.5, 0.5, 1.0],
    a: &[
        &[],
        &[1.0 / 3.0],
        &[0.0, 2.0 / 3.0],
        &[1.0 / 12.0, 1.0 / 3.0, -1.0 / 12.0],
        &[-1.0 / 16.0, 9.0 / 8.0, -3.0 / 16.0, -3.0 / 8.0],
        &[0.0, 9.0 / 8.0, -3.0 / 8.0, -3.0 / 4.0, 0.5],
        &[9.0 / 44.0, -9.0 / 11.0, 63.0 / 44.0, 18.0 / 11.0, 0.0, -16.0 / 11.0],
    ],
    b: &[11.0 / 120.0, 0.0, 27.0 / 40.0, 27.0 / 40.0, -4.0 / 15.0, -4.0 / 15.0, 11.0 / 120.0],
};

const RK4: Tableau = Tableau {
    c: &[0.0, 0.5, 0.5, 1.0],
    a: &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]],
    b: &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
};

impl Method {
    fn tableau(self) -> &'static Tableau {
        match self {
            Method::Rk6 => &RK6,
            Method::Rk4 => &RK4,
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Method::Rk6 => 6,
            Method::Rk4 => 4,
        }
    }

    pub fn stages(self) -> usize {
        self.tableau().b.len()
    }

    /// Stability function `R(z)` for real `z`, i.e. one step applied to
    /// `y' = lambda y` with `z = h lambda`.
    pub fn stability_function(self, z: f64) -> f64 {
        let tab = self.tableau();
        let mut k = Vec::with_capacity(tab.b.len());
        for row in tab.a {
            let y = 1.0 + row.iter().zip(&k).map(|(a, kj)| a * kj).sum::<f64>();
            k.push(z * y);
        }
        1.0 + tab.b.iter().zip(&k).map(|(b, kj)| b * kj).sum::<f64>()
    }

    /// Largest `x` such that `|R(-s)| <= 1` for all `s` in `[0, x]`.
    pub fn real_stability_limit(self) -> f64 {
        let ds = 1e-3;
        let mut s = 0.0;
        while self.stability_function(-(s + ds)).abs() <= 1.0 {
            s += ds;
        }
        s
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk6" => Ok(Method::Rk6),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::Parse(format!("unknown method {other:?} (expected rk6 or rk4)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Rk6 => "rk6",
            Method::Rk4 => "rk4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub h: f64,
    pub method: Method,
    /// Record every k-th step (the endpoint is always recorded).
    pub sample_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { h: 0.01, method: Method::Rk6, sample_stride: 1 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidParameter(format!("step h must be > 0, got {}", self.h)));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParameter("sample_stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps used to cover `[t0, t1]`.
    pub fn step_count(&self, t0: f64, t1: f64) -> usize {
        let ratio = (t1 - t0) / self.h;
        (ratio - 1e-9).ceil().max(0.0) as usize
    }
}

/// Reusable stage storage for one system dimension.
pub struct Stepper {
    method: Method,
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
}

impl Stepper {
    pub fn new(method: Method, dim: usize) -> Self {
        let s = method.stages();
        Self { method, k: vec![vec![0.0; dim]; s], stage: vec![0.0; dim] }
    }

    /// Advances `x` from `t` to `t + h` in place.
    pub fn step<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, h: f64, x: &mut [f64]) -> Result<()> {
        let tab = self.method.tableau();
        for (i, row) in tab.a.iter().enumerate() {
            self.stage.copy_from_slice(x);
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    let ha = h * a;
                    for (s, kj) in self.stage.iter_mut().zip(&self.k[j]) {
                        *s += ha * kj;
                    }
                }
            }
            let (stage, k) = (&self.stage, &mut self.k[i]);
            sys.eval(t + tab.c[i] * h, stage, k)?;
        }
        for (j, &b) in tab.b.iter().enumerate() {
            if b != 0.0 {
                let hb = h * b;
                for (xv, kj) in x.iter_mut().zip(&self.k[j]) {
                    *xv += hb * kj;
                }
            }
        }
        Ok(())
    }
}

/// How a streaming run ended.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEnd {
    /// Time of the last accepted state.
    pub t: f64,
    pub state: Vec<f64>,
    /// Set when the vector field reported a blow-up; carries its time.
    pub blow_up: Option<f64>,
    /// The observer asked to stop before `t1`.
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub terminated_early: Option<f64>,
}

impl Trajectory {
    /// CSV with header `t,x_1_1,…,x_n_q` (1-based node and component).
    pub fn write_csv<W: Write>(&self, mut w: W, n: usize, q: usize) -> std::io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=n {
            for a in 1..=q {
                header.push_str(&format!(",x_{i}_{a}"));
            }
        }
        writeln!(w, "{header}")?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in x {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Core loop: the observer sees `(t, x)` at `t0`, at every
/// `sample_stride`-th step and at `t1`, and may break early.
pub fn integrate_until<S, F>(
    sys: &S,
    x0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    mut observer: F,
) -> Result<RunEnd>
where
    S: OdeSystem + ?Sized,
    F: FnMut(f64, &[f64]) -> ControlFlow<()>,
{
    cfg.validate()?;
    if x0.len() != sys.dim() {
        return Err(Error::InvalidParameter(format!("x0 has length {}, expected {}", x0.len(), sys.dim())));
    }
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!("need finite t1 >= t0, got [{t0}, {t1}]")));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("x0 must be finite".into()));
    }

    let mut x = x0.to_vec();
    let end = |t, x, blow_up, stopped| RunEnd { t, state: x, blow_up, stopped };
    if observer(t0, &x).is_break() {
        return Ok(end(t0, x, None, true));
    }
    let steps = cfg.step_count(t0, t1);
    let mut stepper = Stepper::new(cfg.method, x.len());
    let mut t_prev = t0;
    for k in 1..=steps {
        let last = k == steps;
        let t_next = if last { t1 } else { t0 + k as f64 * cfg.h };
        match stepper.step(sys, t_prev, t_next - t_prev, &mut x) {
            Ok(()) => {}
            Err(Error::BlowUp { t }) => return Ok(end(t_prev, x, Some(t), false)),
            Err(e) => return Err(e),
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Ok(end(t_next, x, Some(t_next), false));
        }
        t_prev = t_next;
        if (last || k % cfg.sample_stride == 0) && observer(t_next, &x).is_break() {
            return Ok(end(t_next, x, None, !last));
        }
    }
    Ok(end(t_prev, x, None, false))
}

/// Integrates without storing the trajectory; `observer` sees every
/// sampled state.
pub fn integrate_streaming<S, F>(
    sys: &S,
    x0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    mut observer: F,
) -> Result<RunEnd>
where
    S: OdeSystem + ?Sized,
    F: FnMut(f64, &[f64]),
{
    integrate_until(sys, x0, t0, t1, cfg, |t, x| {
        observer(t, x);
        ControlFlow::Continue(())
    })
}

pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    let end = integrate_streaming(sys, x0, t0, t1, cfg, |t, x| {
        traj.times.push(t);
        traj.states.push(x.to_vec());
    })?;
    traj.terminated_early = end.blow_up;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> FnSystem<impl Fn(f64, &[f64], &mut [f64])> {
        FnSystem::new(1, |_t, x: &[f64], dx: &mut [f64]| dx[0] = -x[0])
    }

    #[test]
    fn tableau_rows_are_consistent() {
        for m in [Method::Rk6, Method::Rk4] {
            let tab = m.tableau();
            for (row, c) in tab.a.iter().zip(tab.c) {
                assert!((row.iter().sum::<f64>() - c).abs() < 1e-15);
            }
            assert!((tab.b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exponential_decay_rk6() {
        let cfg = IntegratorConfig { h: 0.1, ..Default::default() };
        let traj = integrate(&decay(), &[1.0], 0.0, 1.0, &cfg).unwrap();
        let last = traj.states.last().unwrap()[0];
        assert!((last - (-1.0f64).exp()).abs() < 1e-9);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
    }

    #[test]
    fn stability_function_matches_exp_to_order() {
        let z = 0.01f64;
        assert!((Method::Rk6.stability_function(z) - z.exp()).abs() < 1e-15);
        assert!(Method::Rk4.real_stability_limit() > 2.78 && Method::Rk4.real_stability_limit() < 2.79);
    }

    #[test]
    fn partial_final_step_lands_on_t1() {
        let cfg = IntegratorConfig { h: 0.3, ..Default::default() };
        let traj = integrate(&decay(), &[1.0], 0.0, 1.0, &cfg).unwrap();
        assert_eq!(traj.times.len(), 5);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
        assert!((traj.times[3] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn observer_call_counts() {
        let sys = decay();
        for (h, stride, t1) in [(0.01, 1, 1.0), (0.01, 7, 1.0), (0.1, 3, 2.05), (0.5, 1, 0.0)] {
            let cfg = IntegratorConfig { h, sample_stride: stride, ..Default::default() };
            let mut calls = 0usize;
            integrate_streaming(&sys, &[1.0], 0.0, t1, &cfg, |_, _| calls += 1).unwrap();
            let expected = if t1 == 0.0 { 1 } else { ((t1 / (h * stride as f64)) - 1e-9).ceil() as usize + 1 };
            assert_eq!(calls, expected, "h={h} stride={stride} t1={t1}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = decay();
        let cfg = IntegratorConfig::default();
        assert!(integrate(&sys, &[1.0], 1.0, 0.0, &cfg).is_err());
        assert!(integrate(&sys, &[f64::NAN], 0.0, 1.0, &cfg).is_err());
        assert!(integrate(&sys, &[1.0, 2.0], 0.0, 1.0, &cfg).is_err());
        let bad = IntegratorConfig { h: 0.0, ..Default::default() };
        assert!(integrate(&sys, &[1.0], 0.0, 1.0, &bad).is_err());
        let bad = IntegratorConfig { sample_stride: 0, ..Default::default() };
        assert!(integrate(&sys, &[1.0], 0.0, 1.0, &bad).is_err());
    }

    #[test]
    fn blow_up_terminates_early() {
        let sys = FnSystem::new(1, |_t, x: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0]);
        let cfg = IntegratorConfig { h: 0.01, ..Default::default() };
        let traj = integrate(&sys, &[1.0], 0.0, 2.0, &cfg).unwrap();
        let t = traj.terminated_early.expect("x' = x^2 escapes at t = 1");
        assert!(t > 0.9 && t < 1.1);
    }

    #[test]
    fn csv_dump_header() {
        let traj = Trajectory { times: vec![0.0], states: vec![vec![1.0, 2.0, 3.0, 4.0]], terminated_early: None };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, 2, 2).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x_1_1,x_1_2,x_2_1,x_2_2\n0,1,2,3,4\n");
    }
}
