//! Adaptive Dormand–Prince 5(4) integration of small autonomous-in-form ODE
//! systems `y' = f(r, y)` with a fixed-size state.

/// Outcome of integrating up to a target radius or an event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// Reached the requested end point.
    Reached,
    /// The event predicate fired; the state is the last accepted step.
    Event,
}

/// Step-size controlled integrator with relative/absolute error tolerances.
#[derive(Debug, Clone, Copy)]
pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// differences between the fifth- and fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const M: usize>(y: &[f64; M], terms: &[(f64, &[f64; M])], h: f64) -> [f64; M] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..M {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl DormandPrince {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, max_steps: 1_000_000 }
    }

    /// Integrates from `(r, y)` to `r_end`, stopping early when `event(r, y)`
    /// returns true after an accepted step. `h` carries the step size between
    /// calls. Returns the stop reason, or `None` if the step budget ran out.
    pub fn integrate<const M: usize, F, E>(
        &self,
        f: &F,
        r: &mut f64,
        y: &mut [f64; M],
        r_end: f64,
        h: &mut f64,
        event: &mut E,
    ) -> Option<Stop>
    where
        F: Fn(f64, &[f64; M]) -> [f64; M],
        E: FnMut(f64, &[f64; M]) -> bool,
    {
        let mut steps = 0;
        while *r < r_end {
            if steps >= self.max_steps {
                return None;
            }
            steps += 1;
            let last = *h >= r_end - *r;
            let step = if last { r_end - *r } else { *h };
            let k1 = f(*r, y);
            let k2 = f(*r + C2 * step, &axpy(y, &[(A21, &k1)], step));
            let k3 = f(*r + C3 * step, &axpy(y, &[(A31, &k1), (A32, &k2)], step));
            let k4 = f(*r + C4 * step, &axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], step));
            let k5 = f(*r + C5 * step, &axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], step));
            let k6 = f(*r + step, &axpy(y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], step));
            let y5 = axpy(y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], step);
            let k7 = f(*r + step, &y5);
            let mut err: f64 = 0.0;
            for i in 0..M {
                let e = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                err = err.max((e / sc).abs());
            }
            if err <= 1.0 || step < 1e-14 * r.abs().max(1.0) {
                *r = if last { r_end } else { *r + step };
                *y = y5;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    *h = step * grow;
                }
                if event(*r, y) {
                    return Some(Stop::Event);
                }
            } else {
                *h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        Some(Stop::Reached)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let dp = DormandPrince::new(1e-12, 1e-14);
        let f = |_r: f64, y: &[f64; 2]| [y[1], -y[0]];
        let (mut r, mut y, mut h) = (0.0, [1.0, 0.0], 1e-3);
        let stop = dp.integrate(&f, &mut r, &mut y, 2.0 * std::f64::consts::PI, &mut h, &mut |_, _| false);
        assert_eq!(stop, Some(Stop::Reached));
        assert!((y[0] - 1.0).abs() < 1e-10 && y[1].abs() < 1e-10);
    }

    #[test]
    fn event_stops_at_first_sign_change() {
        let dp = DormandPrince::new(1e-10, 1e-12);
        let f = |_r: f64, y: &[f64; 1]| [-1.0 + 0.0 * y[0]];
        let (mut r, mut y, mut h) = (0.0, [1.0], 0.01);
        let stop = dp.integrate(&f, &mut r, &mut y, 5.0, &mut h, &mut |_, y| y[0] < 0.0);
        assert_eq!(stop, Some(Stop::Event));
        // the event fires on the first accepted step past the crossing
        assert!(r > 1.0 && r < 5.0 && y[0] < 0.0);
        assert!((y[0] - (1.0 - r)).abs() < 1e-12);
    }
}
