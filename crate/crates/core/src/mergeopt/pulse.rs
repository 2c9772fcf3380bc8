//! Control pulses: knot tables with monotone cubic interpolation.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PULSE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Fritsch-Carlson monotone piecewise cubic.
    Pchip,
}

impl Interpolation {
    pub fn id(self) -> &'static str {
        match self {
            Interpolation::Pchip => "pchip",
        }
    }

    pub fn parse(id: &str) -> Result<Self> {
        match id {
            "pchip" => Ok(Interpolation::Pchip),
            other => Err(Error::Parse(format!("unknown interpolation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    /// s
    pub t: f64,
    /// primary depth, E_r(lambda2)
    pub a1: f64,
    /// primary phase, rad
    pub phi: f64,
}

/// Piecewise cubic Hermite interpolant with monotonicity-preserving slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn pchip_end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || m0 == 0.0 {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::InvalidParameter("interpolant needs at least two knots".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("knot times must be strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for k in 1..n - 1 {
                if m[k - 1] * m[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            d[0] = pchip_end_slope(h[0], h[1], m[0], m[1]);
            d[n - 1] = pchip_end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Pchip {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        })
    }

    /// Value at `t`, clamped to the end values outside the knot range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

/// Primary-lattice depth `A1(t)` and phase `phi(t)` over `[0, tau]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPulse {
    pub tau: f64,
    pub knots: Vec<Knot>,
    pub interpolation: Interpolation,
    a1: Pchip,
    phi: Pchip,
}

impl ControlPulse {
    pub fn new(knots: Vec<Knot>, interpolation: Interpolation) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParameter("pulse needs at least two knots".into()));
        }
        if knots[0].t != 0.0 {
            return Err(Error::InvalidParameter("first knot must be at t = 0".into()));
        }
        if knots
            .iter()
            .any(|k| !(k.a1 >= 0.0) || !k.phi.is_finite() || !k.t.is_finite())
        {
            return Err(Error::InvalidParameter(
                "knot depths must be non-negative and values finite".into(),
            ));
        }
        let t: Vec<f64> = knots.iter().map(|k| k.t).collect();
        let a: Vec<f64> = knots.iter().map(|k| k.a1).collect();
        let p: Vec<f64> = knots.iter().map(|k| k.phi).collect();
        let a1 = Pchip::new(&t, &a)?;
        let phi = Pchip::new(&t, &p)?;
        Ok(ControlPulse {
            tau: *t.last().unwrap(),
            knots,
            interpolation,
            a1,
            phi,
        })
    }

    /// Knots uniformly spaced over `[0, tau]`.
    pub fn uniform(tau: f64, a1: &[f64], phi: &[f64]) -> Result<Self> {
        if a1.len() != phi.len() || a1.len() < 2 {
            return Err(Error::InvalidParameter(
                "knot arrays must match and hold two or more values".into(),
            ));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pulse duration must be positive, got {tau}"
            )));
        }
        let m = a1.len() - 1;
        let knots = a1
            .iter()
            .zip(phi)
            .enumerate()
            .map(|(k, (&a, &p))| Knot {
                t: if k == m { tau } else { tau * k as f64 / m as f64 },
                a1: a,
                phi: p,
            })
            .collect();
        Self::new(knots, Interpolation::Pchip)
    }

    /// Smooth-step ramp of `A1` from `a_start` to `a_end` at constant phase.
    pub fn smooth_step(tau: f64, knots: usize, a_start: f64, a_end: f64, phi: f64) -> Result<Self> {
        let m = knots.max(2) - 1;
        let a: Vec<f64> = (0..=m)
            .map(|k| {
                let s = k as f64 / m as f64;
                a_start + (a_end - a_start) * s * s * (3.0 - 2.0 * s)
            })
            .collect();
        Self::uniform(tau, &a, &vec![phi; m + 1])
    }

    /// Linear ramp of `A1` at constant phase.
    pub fn linear(tau: f64, knots: usize, a_start: f64, a_end: f64, phi: f64) -> Result<Self> {
        let m = knots.max(2) - 1;
        let a: Vec<f64> = (0..=m)
            .map(|k| a_start + (a_end - a_start) * k as f64 / m as f64)
            .collect();
        Self::uniform(tau, &a, &vec![phi; m + 1])
    }

    pub fn a1(&self, t: f64) -> f64 {
        self.a1.eval(t).max(0.0)
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.phi.eval(t)
    }

    /// Same control values on a stretched time axis.
    pub fn rescaled(&self, tau: f64) -> Result<Self> {
        let f = tau / self.tau;
        let knots = self.knots.iter().map(|k| Knot { t: k.t * f, ..*k }).collect();
        Self::new(knots, self.interpolation)
    }

    /// Played backwards: `A1(tau - t)`, `phi(tau - t)`.
    pub fn reversed(&self) -> Result<Self> {
        let knots = self
            .knots
            .iter()
            .rev()
            .map(|k| Knot {
                t: self.tau - k.t,
                ..*k
            })
            .collect();
        Self::new(knots, self.interpolation)
    }

    /// Resampled onto `count` uniform knots.
    pub fn resampled(&self, count: usize) -> Result<Self> {
        let m = count.max(2) - 1;
        let a: Vec<f64> = (0..=m).map(|k| self.a1(self.tau * k as f64 / m as f64)).collect();
        let p: Vec<f64> = (0..=m).map(|k| self.phi(self.tau * k as f64 / m as f64)).collect();
        Self::uniform(self.tau, &a, &p)
    }

    /// Global offsets `A1 (1 + amp)`, `phi + phase`.
    pub fn perturbed(&self, amp: f64, phase: f64) -> Result<Self> {
        let knots = self
            .knots
            .iter()
            .map(|k| Knot {
                t: k.t,
                a1: k.a1 * (1.0 + amp),
                phi: k.phi + phase,
            })
            .collect();
        Self::new(knots, self.interpolation)
    }

    pub fn write<W: Write>(&self, mut out: W, config_hash: &str) -> Result<()> {
        writeln!(out, "# slgate-pulse {PULSE_FORMAT_VERSION}")?;
        writeln!(out, "# tau_us {:.17e}", self.tau * 1e6)?;
        writeln!(out, "# config_hash {config_hash}")?;
        writeln!(out, "# interpolation {}", self.interpolation.id())?;
        writeln!(out, "# t_us A1 phi")?;
        for k in &self.knots {
            writeln!(out, "{:.17e} {:.17e} {:.17e}", k.t * 1e6, k.a1, k.phi)?;
        }
        Ok(())
    }

    pub fn to_text(&self, config_hash: &str) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, config_hash).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Pulse file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseFile {
    pub pulse: ControlPulse,
    pub config_hash: String,
}

pub fn read_pulse<R: BufRead>(input: R) -> Result<PulseFile> {
    let mut version = None;
    let mut tau_us = None;
    let mut hash = None;
    let mut interp = None;
    let mut knots = Vec::new();
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            match (it.next(), it.next()) {
                (Some("slgate-pulse"), Some(v)) => {
                    version = Some(v.parse::<u32>().map_err(|_| Error::Parse("bad pulse version".into()))?)
                }
                (Some("tau_us"), Some(v)) => {
                    tau_us = Some(v.parse::<f64>().map_err(|_| Error::Parse("bad tau_us".into()))?)
                }
                (Some("config_hash"), Some(v)) => hash = Some(v.to_string()),
                (Some("interpolation"), Some(v)) => interp = Some(Interpolation::parse(v)?),
                _ => {}
            }
            continue;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|c| c.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{c}'"))))
            .collect::<Result<_>>()?;
        if cols.len() != 3 {
            return Err(Error::Parse(format!("pulse row needs 3 columns: '{line}'")));
        }
        knots.push(Knot {
            t: cols[0] / 1e6,
            a1: cols[1],
            phi: cols[2],
        });
    }
    match version {
        Some(PULSE_FORMAT_VERSION) => {}
        Some(v) => return Err(Error::Parse(format!("unsupported pulse version {v}"))),
        None => return Err(Error::Parse("missing pulse header".into())),
    }
    let interpolation = interp.ok_or_else(|| Error::Parse("missing interpolation".into()))?;
    let pulse = ControlPulse::new(knots, interpolation)?;
    if let Some(t) = tau_us {
        if (t / 1e6 - pulse.tau).abs() > 1e-9 * pulse.tau {
            return Err(Error::Parse(format!(
                "header tau {t} us disagrees with last knot {} us",
                pulse.tau * 1e6
            )));
        }
    }
    Ok(PulseFile {
        pulse,
        config_hash: hash.unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pchip_reproduces_knots_and_stays_monotone() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 0.1, 3.0, 3.1, 10.0];
        let p = Pchip::new(&x, &y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(p.eval(*a), *b);
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=400 {
            let v = p.eval(4.0 * k as f64 / 400.0);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn pchip_matches_reference_values() {
        // values from scipy.interpolate.PchipInterpolator
        let p = Pchip::new(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 0.5, 2.0]).unwrap();
        assert!((p.eval(0.5) - 0.71875).abs() < 1e-12, "{}", p.eval(0.5));
        assert!((p.eval(2.5) - 0.9375).abs() < 1e-12, "{}", p.eval(2.5));
        assert!((p.eval(1.7) - 0.608).abs() < 1e-12, "{}", p.eval(1.7));
        let q = Pchip::new(&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.0, 0.1, 3.0, 3.1, 10.0]).unwrap();
        assert!((q.eval(0.3) - 0.00942).abs() < 1e-12);
        assert!((q.eval(3.6) - 6.106925714285715).abs() < 1e-12);
    }

    #[test]
    fn reversal_and_rescaling() {
        let p = ControlPulse::uniform(2e-4, &[1.0, 5.0, 20.0, 40.0], &[0.1, 0.2, 0.0, 0.3]).unwrap();
        let r = p.reversed().unwrap();
        for k in 0..=50 {
            let t = 2e-4 * k as f64 / 50.0;
            assert!((r.a1(t) - p.a1(2e-4 - t)).abs() < 1e-12);
            assert!((r.phi(t) - p.phi(2e-4 - t)).abs() < 1e-12);
        }
        let s = p.rescaled(4e-4).unwrap();
        assert!((s.a1(2e-4) - p.a1(1e-4)).abs() < 1e-12);
    }

    #[test]
    fn file_round_trip() {
        let p = ControlPulse::smooth_step(2.89e-4, 6, 0.0, 80.0, 0.1).unwrap();
        let text = p.to_text("abc123");
        let back = read_pulse(text.as_bytes()).unwrap();
        assert_eq!(back.config_hash, "abc123");
        for (a, b) in back.pulse.knots.iter().zip(&p.knots) {
            assert!((a.t - b.t).abs() <= 1e-15 * b.t.abs().max(1e-12));
            assert_eq!(a.a1, b.a1);
            assert_eq!(a.phi, b.phi);
        }
    }

    #[test]
    fn invalid_pulses_are_rejected() {
        assert!(ControlPulse::uniform(1e-4, &[1.0, -1.0], &[0.0, 0.0]).is_err());
        assert!(read_pulse("0 1 0\n1 2 0\n".as_bytes()).is_err());
    }
}
