//! Moving ground-truth field: a sum of signed Gaussian bumps ("clouds")
//! drifting at constant velocity, clamped to [-1, 1]. Up-drafts are positive
//! bumps; each is ringed by negative satellites so the field shows the
//! red/blue structure of a convective cell.

use crate::error::{Error, Result};
use crate::nystrom::AxisBox;

/// One drifting Gaussian bump.
#[derive(Debug, Clone, PartialEq)]
pub struct Cloud {
    /// Center position at t = 0.
    pub center: Vec<f64>,
    /// Constant velocity in domain units per step.
    pub velocity: Vec<f64>,
    /// Signed peak value in [-1, 1].
    pub amplitude: f64,
    /// Gaussian radius (standard deviation), > 0.
    pub radius: f64,
}

impl Cloud {
    pub fn new(center: Vec<f64>, velocity: Vec<f64>, amplitude: f64, radius: f64) -> Result<Self> {
        if center.len() != velocity.len() {
            return Err(Error::DimensionMismatch(center.len(), velocity.len()));
        }
        if !(-1.0..=1.0).contains(&amplitude) {
            return Err(Error::InvalidInput(format!(
                "cloud amplitude must lie in [-1, 1], got {amplitude}"
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cloud radius must be > 0, got {radius}"
            )));
        }
        Ok(Self { center, velocity, amplitude, radius })
    }
}

/// The time-varying scalar field sampled by the agents.
#[derive(Debug, Clone, PartialEq)]
pub struct WindField {
    clouds: Vec<Cloud>,
    domain: AxisBox,
}

impl WindField {
    pub fn new(clouds: Vec<Cloud>, domain: AxisBox) -> Result<Self> {
        for c in &clouds {
            if c.center.len() != domain.dim() {
                return Err(Error::DimensionMismatch(c.center.len(), domain.dim()));
            }
        }
        Ok(Self { clouds, domain })
    }

    pub fn clouds(&self) -> &[Cloud] {
        &self.clouds
    }

    pub fn domain(&self) -> &AxisBox {
        &self.domain
    }

    /// Default convective layout for a 2-D domain: three up-draft cells
    /// (amplitude +1) each flanked by two down-draft satellites (amplitude
    /// -0.5), all drifting at constant speed and wrapping at the boundary.
    pub fn default_cumulus(domain: &AxisBox) -> Result<Self> {
        if domain.dim() != 2 {
            return Err(Error::InvalidInput(
                "default cloud layout is defined for 2-D domains".into(),
            ));
        }
        let w = domain.side(0);
        let h = domain.side(1);
        let at = |fx: f64, fy: f64| vec![domain.lo()[0] + fx * w, domain.lo()[1] + fy * h];

        let cells: [(Vec<f64>, Vec<f64>); 3] = [
            (at(0.25, 0.25), vec![0.020, 0.012]),
            (at(0.75, 0.40), vec![-0.016, 0.018]),
            (at(0.45, 0.75), vec![0.010, -0.022]),
        ];
        let satellite_offsets = [[3.2, 0.8], [-1.6, -2.9]];

        let mut clouds = Vec::new();
        for (center, vel) in cells {
            clouds.push(Cloud::new(center.clone(), vel.clone(), 1.0, 2.2)?);
            for off in satellite_offsets {
                let sat = vec![center[0] + off[0], center[1] + off[1]];
                clouds.push(Cloud::new(sat, vel.clone(), -0.5, 1.6)?);
            }
        }
        Self::new(clouds, domain.clone())
    }

    /// A cloud center at time t, wrapped into the domain box.
    pub fn center_at(&self, cloud: usize, t: u64) -> Vec<f64> {
        let c = &self.clouds[cloud];
        (0..c.center.len())
            .map(|axis| {
                let lo = self.domain.lo()[axis];
                let side = self.domain.side(axis);
                let raw = c.center[axis] + t as f64 * c.velocity[axis] - lo;
                lo + raw.rem_euclid(side)
            })
            .collect()
    }

    /// Field value at a point and time: the clamped bump sum.
    pub fn eval(&self, x: &[f64], t: u64) -> f64 {
        let mut sum = 0.0;
        for (idx, c) in self.clouds.iter().enumerate() {
            let center = self.center_at(idx, t);
            let d_sq: f64 = x
                .iter()
                .zip(center.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sum += c.amplitude * (-d_sq / (2.0 * c.radius * c.radius)).exp();
        }
        sum.clamp(-1.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain() -> AxisBox {
        AxisBox::square(20.0).unwrap()
    }

    #[test]
    fn peak_value_at_cloud_center() {
        let field = WindField::new(
            vec![Cloud::new(vec![5.0, 5.0], vec![0.0, 0.0], 1.0, 2.0).unwrap()],
            domain(),
        )
        .unwrap();
        assert_eq!(field.eval(&[5.0, 5.0], 0), 1.0);
    }

    #[test]
    fn field_decays_far_from_all_clouds() {
        let field = WindField::new(
            vec![Cloud::new(vec![2.0, 2.0], vec![0.0, 0.0], 1.0, 1.0).unwrap()],
            domain(),
        )
        .unwrap();
        assert!(field.eval(&[19.0, 19.0], 0).abs() < 1e-10);
    }

    #[test]
    fn translation_identity_for_a_single_unwrapped_cloud() {
        // Away from the boundary, f(x, t + 1) = f(x - v, t).
        let v = [0.05, -0.03];
        let field = WindField::new(
            vec![Cloud::new(vec![10.0, 10.0], v.to_vec(), 0.8, 2.0).unwrap()],
            domain(),
        )
        .unwrap();
        for t in [0u64, 3, 10] {
            let x = [11.0, 9.5];
            let shifted = [x[0] - v[0], x[1] - v[1]];
            let a = field.eval(&x, t + 1);
            let b = field.eval(&shifted, t);
            assert!((a - b).abs() < 1e-12, "t = {t}: {a} vs {b}");
        }
    }

    #[test]
    fn centers_wrap_at_domain_boundary() {
        let field = WindField::new(
            vec![Cloud::new(vec![19.0, 10.0], vec![1.0, 0.0], 1.0, 2.0).unwrap()],
            domain(),
        )
        .unwrap();
        let c = field.center_at(0, 3);
        assert!((c[0] - 2.0).abs() < 1e-12, "wrapped center {c:?}");
        assert!(field.domain().contains(&c));
    }

    #[test]
    fn default_layout_stays_in_bounds() {
        let field = WindField::default_cumulus(&domain()).unwrap();
        assert_eq!(field.clouds().len(), 9);
        for t in [0u64, 100, 300, 600] {
            for x in [[0.0, 0.0], [10.0, 10.0], [19.9, 3.3]] {
                let v = field.eval(&x, t);
                assert!((-1.0..=1.0).contains(&v));
            }
        }
    }
}
