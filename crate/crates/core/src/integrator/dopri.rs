//! Dormand–Prince 5(4) stepper with PI step-size control and the
//! fourth-order continuous extension (Hairer, Nørsett & Wanner, DOPRI5).

use num_complex::Complex64;

use super::IntegrationConfig;
use crate::error::{IntegrationError, IntegrationFailure};

/// Autonomous-in-segment ODE right-hand side over complex vectors.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]);
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// error coefficients b - b*
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Stepper state. Reused across segments: `restart` discards FSAL and PI
/// history so no step ever straddles a discontinuity in the right-hand side.
pub struct Dopri5 {
    cfg: IntegrationConfig,
    n: usize,
    k: [Vec<Complex64>; 7],
    y_stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
    cont: [Vec<Complex64>; 5],
    h_hint: Option<f64>,
    err_old: f64,
    fsal_valid: bool,
    pub stats: StepStats,
}

impl Dopri5 {
    pub fn new(cfg: IntegrationConfig, dim: usize) -> Self {
        let z = || vec![Complex64::new(0.0, 0.0); dim];
        Dopri5 {
            cfg,
            n: dim,
            k: [z(), z(), z(), z(), z(), z(), z()],
            y_stage: z(),
            y_new: z(),
            cont: [z(), z(), z(), z(), z()],
            h_hint: None,
            err_old: 1e-4,
            fsal_valid: false,
            stats: StepStats::default(),
        }
    }

    pub fn config(&self) -> &IntegrationConfig {
        &self.cfg
    }

    /// Forget the FSAL stage and controller memory (keeps the step-size hint).
    pub fn restart(&mut self) {
        self.fsal_valid = false;
        self.err_old = 1e-4;
    }

    fn fail(&self, kind: IntegrationFailure, t: f64, y: &[Complex64]) -> IntegrationError {
        IntegrationError { kind, time: t, steps: self.stats.accepted, last_state: y.to_vec() }
    }

    fn scale(&self, a: Complex64, b: Complex64) -> f64 {
        self.cfg.abs_tol + self.cfg.rel_tol * a.norm().max(b.norm())
    }

    fn initial_step<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &[Complex64], span: f64) -> f64 {
        if self.cfg.initial_step > 0.0 {
            return self.cfg.initial_step.min(self.cfg.max_step).min(span);
        }
        // Hairer's starting step heuristic.
        let n = self.n as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..self.n {
            let sc = self.cfg.abs_tol + self.cfg.rel_tol * y[i].norm();
            d0 += (y[i].norm() / sc).powi(2);
            d1 += (self.k[0][i].norm() / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.cfg.max_step).min(span);
        for i in 0..self.n {
            self.y_stage[i] = y[i] + h0 * self.k[0][i];
        }
        sys.rhs(t + h0, &self.y_stage, &mut self.k[1]);
        self.stats.evaluations += 1;
        let mut d2 = 0.0;
        for i in 0..self.n {
            let sc = self.cfg.abs_tol + self.cfg.rel_tol * y[i].norm();
            d2 += ((self.k[1][i] - self.k[0][i]).norm() / sc).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / dm).powf(0.2) };
        (100.0 * h0).min(h1).min(self.cfg.max_step).min(span)
    }

    /// Integrates `y` from `t0` to `t1`, calling `on_sample(t, y(t))` for every
    /// entry of `samples` (sorted, within (t0, t1]) via dense output.
    pub fn advance<S, F>(
        &mut self,
        sys: &S,
        t0: f64,
        t1: f64,
        y: &mut [Complex64],
        samples: &[f64],
        mut on_sample: F,
    ) -> Result<(), IntegrationError>
    where
        S: OdeSystem,
        F: FnMut(f64, &[Complex64]),
    {
        assert_eq!(sys.dim(), self.n);
        assert_eq!(y.len(), self.n);
        let mut next_sample = 0;
        let mut t = t0;
        if t1 <= t0 {
            return Ok(());
        }
        if !self.fsal_valid {
            sys.rhs(t, y, &mut self.k[0]);
            self.stats.evaluations += 1;
            self.fsal_valid = true;
        }
        let span = t1 - t0;
        let mut h = match self.h_hint {
            Some(h) => h.min(self.cfg.max_step).min(span),
            None => self.initial_step(sys, t, y, span),
        };
        let mut reject = false;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];

        while t < t1 {
            if self.stats.accepted + self.stats.rejected >= self.cfg.max_steps {
                return Err(self.fail(IntegrationFailure::MaxStepsExceeded, t, y));
            }
            let h_floor = 16.0 * f64::EPSILON * t.abs().max(span);
            if h < h_floor {
                return Err(self.fail(IntegrationFailure::StepUnderflow, t, y));
            }
            let last = t + 1.01 * h >= t1;
            if last {
                h = t1 - t;
            }
            self.stages(sys, t, h, y);

            let mut err = 0.0;
            for i in 0..self.n {
                let e = h
                    * (E1 * self.k[0][i]
                        + E3 * self.k[2][i]
                        + E4 * self.k[3][i]
                        + E5 * self.k[4][i]
                        + E6 * self.k[5][i]
                        + E7 * self.k[6][i]);
                let sc = self.scale(y[i], self.y_new[i]);
                err += (e.norm() / sc).powi(2);
            }
            let err = (err / self.n as f64).sqrt();
            if !err.is_finite() {
                if h * FAC_MIN < h_floor {
                    return Err(self.fail(IntegrationFailure::NonFinite, t, y));
                }
                h *= FAC_MIN;
                reject = true;
                self.stats.rejected += 1;
                continue;
            }

            let fac11 = err.powf(0.2 - BETA * 0.75);
            let mut fac = fac11 / self.err_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;

            if err <= 1.0 {
                self.err_old = err.max(1e-4);
                self.stats.accepted += 1;
                let t_new = if last { t1 } else { t + h };
                if next_sample < samples.len() && samples[next_sample] <= t_new {
                    self.prepare_dense(h, y);
                    while next_sample < samples.len() && samples[next_sample] <= t_new {
                        let ts = samples[next_sample];
                        if ts >= t_new {
                            on_sample(ts, &self.y_new);
                        } else {
                            let theta = ((ts - t) / h).clamp(0.0, 1.0);
                            self.dense_eval(theta, &mut buf);
                            on_sample(ts, &buf);
                        }
                        next_sample += 1;
                    }
                }
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                t = t_new;
                if reject {
                    h_new = h_new.min(h);
                }
                reject = false;
                if h_new.is_finite() {
                    self.h_hint = Some(h_new.min(self.cfg.max_step));
                }
            } else {
                h_new = h / (1.0 / FAC_MIN).min(fac11 / SAFETY);
                reject = true;
                self.stats.rejected += 1;
            }
            h = h_new.min(self.cfg.max_step);
        }
        while next_sample < samples.len() && samples[next_sample] <= t1 {
            on_sample(samples[next_sample], y);
            next_sample += 1;
        }
        Ok(())
    }

    fn stages<S: OdeSystem>(&mut self, sys: &S, t: f64, h: f64, y: &[Complex64]) {
        let n = self.n;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let ys = &mut self.y_stage;
        for i in 0..n {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + C2 * h, ys, k2);
        for i in 0..n {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * h, ys, k3);
        for i in 0..n {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * h, ys, k4);
        for i in 0..n {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * h, ys, k5);
        for i in 0..n {
            ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + h, ys, k6);
        let yn = &mut self.y_new;
        for i in 0..n {
            yn[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(t + h, yn, k7);
        self.stats.evaluations += 6;
    }

    fn prepare_dense(&mut self, h: f64, y: &[Complex64]) {
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        for i in 0..self.n {
            let ydiff = self.y_new[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            self.cont[0][i] = y[i];
            self.cont[1][i] = ydiff;
            self.cont[2][i] = bspl;
            self.cont[3][i] = ydiff - h * k7[i] - bspl;
            self.cont[4][i] =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
    }

    fn dense_eval(&self, theta: f64, out: &mut [Complex64]) {
        let theta1 = 1.0 - theta;
        for i in 0..self.n {
            out[i] = self.cont[0][i]
                + theta
                    * (self.cont[1][i]
                        + theta1 * (self.cont[2][i] + theta * (self.cont[3][i] + theta1 * self.cont[4][i])));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator {
        omega: f64,
        decay: f64,
    }

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
            dy[0] = Complex64::new(-self.decay, -self.omega) * y[0];
        }
    }

    fn cfg(rtol: f64) -> IntegrationConfig {
        IntegrationConfig { rel_tol: rtol, abs_tol: rtol * 1e-3, ..IntegrationConfig::default() }
    }

    #[test]
    fn damped_rotation_matches_closed_form_at_dense_samples() {
        let sys = Oscillator { omega: 7.0, decay: 0.3 };
        let mut stepper = Dopri5::new(cfg(1e-10), 1);
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let samples: Vec<f64> = (1..=200).map(|k| k as f64 * 0.025).collect();
        let mut worst: f64 = 0.0;
        stepper
            .advance(&sys, 0.0, 5.0, &mut y, &samples, |t, v| {
                let exact = Complex64::new(-0.3 * t, -7.0 * t).exp();
                worst = worst.max((v[0] - exact).norm());
            })
            .unwrap();
        assert!(worst < 1e-8, "{worst}");
        assert!(stepper.stats.accepted > 10);
    }

    #[test]
    fn max_steps_reports_last_state() {
        let sys = Oscillator { omega: 1e3, decay: 0.0 };
        let mut c = cfg(1e-10);
        c.max_steps = 5;
        let mut stepper = Dopri5::new(c, 1);
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let err = stepper.advance(&sys, 0.0, 100.0, &mut y, &[], |_, _| {}).unwrap_err();
        assert_eq!(err.kind, IntegrationFailure::MaxStepsExceeded);
        assert_eq!(err.last_state.len(), 1);
        assert!((err.last_state[0].norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn blow_up_is_reported() {
        struct Explode;
        impl OdeSystem for Explode {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
                dy[0] = y[0] * y[0];
            }
        }
        let mut stepper = Dopri5::new(cfg(1e-8), 1);
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let err = stepper.advance(&Explode, 0.0, 2.0, &mut y, &[], |_, _| {}).unwrap_err();
        assert!(matches!(
            err.kind,
            IntegrationFailure::StepUnderflow | IntegrationFailure::NonFinite | IntegrationFailure::MaxStepsExceeded
        ));
        assert!(err.time < 1.0 + 1e-6);
    }
}
