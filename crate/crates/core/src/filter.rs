//! Gaussian belief tracking: Kalman prediction under the known
//! double-integrator target model and an EKF update for range-bearing
//! measurements.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{wrap_angle, Point};
use crate::world::{range_bearing, Measurement, Pose, SensorSpec};

/// Ranges at or below this are treated as the robot sitting on the belief mean.
pub const DEGENERATE_RANGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("robot is within {DEGENERATE_RANGE} m of the belief mean; bearing is undefined")]
    DegenerateRange,
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
}

/// Mean and covariance of one target's state `(px, py, vx, vy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl GaussianBelief {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn isotropic(mean: Vector4<f64>, variance: f64) -> Self {
        Self::new(mean, Matrix4::identity() * variance)
    }

    pub fn position(&self) -> Point {
        Point::new(self.mean[0], self.mean[1])
    }

    pub fn log_det(&self) -> Result<f64, FilterError> {
        log_det_cov(&self.cov)
    }
}

/// Known linear target model: double integrator with white-acceleration noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetModel {
    tau: f64,
    q: f64,
    a: Matrix4<f64>,
    w: Matrix4<f64>,
    // Per-axis Cholesky factor of [[qτ³/3, qτ²/2], [qτ²/2, qτ]].
    chol: [f64; 3],
}

impl TargetModel {
    pub fn new(tau: f64, q: f64) -> Self {
        let (t2, t3) = (tau * tau, tau * tau * tau);
        #[rustfmt::skip]
        let a = Matrix4::new(
            1.0, 0.0, tau, 0.0,
            0.0, 1.0, 0.0, tau,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        let (pp, pv, vv) = (q * t3 / 3.0, q * t2 / 2.0, q * tau);
        #[rustfmt::skip]
        let w = Matrix4::new(
            pp, 0.0, pv, 0.0,
            0.0, pp, 0.0, pv,
            pv, 0.0, vv, 0.0,
            0.0, pv, 0.0, vv,
        );
        let l11 = libm::sqrt(pp);
        let l21 = if l11 > 0.0 { pv / l11 } else { 0.0 };
        let l22 = libm::sqrt((vv - l21 * l21).max(0.0));
        Self {
            tau,
            q,
            a,
            w,
            chol: [l11, l21, l22],
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn transition(&self) -> &Matrix4<f64> {
        &self.a
    }

    pub fn process_noise(&self) -> &Matrix4<f64> {
        &self.w
    }

    /// Draw `w ~ N(0, W)` ordered `(px, py, vx, vy)`.
    pub fn sample_process_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 4] {
        if self.q == 0.0 {
            return [0.0; 4];
        }
        let [l11, l21, l22] = self.chol;
        let mut out = [0.0; 4];
        for axis in 0..2 {
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            out[axis] = l11 * e1;
            out[axis + 2] = l21 * e1 + l22 * e2;
        }
        out
    }
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Prediction step: `mean' = A mean`, `cov' = A cov Aᵀ + W`.
pub fn kf_predict(b: &GaussianBelief, model: &TargetModel) -> GaussianBelief {
    let a = model.transition();
    GaussianBelief {
        mean: a * b.mean,
        cov: symmetrize(&(a * b.cov * a.transpose() + model.process_noise())),
    }
}

/// Jacobian of the range-bearing model with respect to the target state,
/// evaluated at `mean`.
pub fn obs_jacobian(pose: &Pose, mean: &Vector4<f64>) -> Result<Matrix2x4<f64>, FilterError> {
    let dx = mean[0] - pose.x;
    let dy = mean[1] - pose.y;
    let r = libm::hypot(dx, dy);
    if r <= DEGENERATE_RANGE {
        return Err(FilterError::DegenerateRange);
    }
    // x_θ + α is the world-frame bearing to the mean.
    let world_bearing = libm::atan2(dy, dx);
    #[rustfmt::skip]
    let h = Matrix2x4::new(
        dx, dy, 0.0, 0.0,
        -libm::sin(world_bearing), libm::cos(world_bearing), 0.0, 0.0,
    );
    Ok(h / r)
}

fn noise_cov(spec: &SensorSpec) -> Matrix2<f64> {
    Matrix2::new(spec.sigma_r * spec.sigma_r, 0.0, 0.0, spec.sigma_b * spec.sigma_b)
}

/// Gain and Joseph-form posterior covariance for a measurement linearised at
/// `linearize_at`.
fn joseph_update(
    cov: &Matrix4<f64>,
    h: &Matrix2x4<f64>,
    r: &Matrix2<f64>,
) -> Result<(Matrix4x2<f64>, Matrix4<f64>), FilterError> {
    let s = h * cov * h.transpose() + r;
    let s_inv = s.try_inverse().ok_or(FilterError::SingularInnovation)?;
    if !s_inv.iter().all(|v| v.is_finite()) {
        return Err(FilterError::SingularInnovation);
    }
    let k = cov * h.transpose() * s_inv;
    let i_kh = Matrix4::identity() - k * h;
    let post = i_kh * cov * i_kh.transpose() + k * r * k.transpose();
    Ok((k, symmetrize(&post)))
}

/// EKF measurement update. An undetected measurement leaves the belief
/// unchanged.
pub fn ekf_update(
    b: &GaussianBelief,
    z: &Measurement,
    pose: &Pose,
    spec: &SensorSpec,
) -> Result<GaussianBelief, FilterError> {
    let Some(reading) = z.reading else {
        return Ok(*b);
    };
    let h = obs_jacobian(pose, &b.mean)?;
    let (k, cov) = joseph_update(&b.cov, &h, &noise_cov(spec))?;
    let predicted = range_bearing(pose, b.position());
    let innovation = Vector2::new(reading.r - predicted.r, wrap_angle(reading.alpha - predicted.alpha));
    Ok(GaussianBelief {
        mean: b.mean + k * innovation,
        cov,
    })
}

/// Covariance-only update assuming a measurement arrives at the predicted
/// mean; the mean is left untouched.
pub fn ekf_covariance_update(
    b: &GaussianBelief,
    pose: &Pose,
    spec: &SensorSpec,
) -> Result<GaussianBelief, FilterError> {
    let h = obs_jacobian(pose, &b.mean)?;
    let (_, cov) = joseph_update(&b.cov, &h, &noise_cov(spec))?;
    Ok(GaussianBelief { mean: b.mean, cov })
}

/// Natural log of `det(cov)` through a Cholesky factorisation.
pub fn log_det_cov(cov: &Matrix4<f64>) -> Result<f64, FilterError> {
    let chol = nalgebra::Cholesky::new(*cov).ok_or(FilterError::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..4 {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return Err(FilterError::NotPositiveDefinite);
        }
        acc += libm::log(d);
    }
    Ok(2.0 * acc)
}

/// Predict/update pair so other Bayes filters can stand in for the EKF.
pub trait BayesFilter {
    fn predict(&self, b: &GaussianBelief) -> GaussianBelief;
    fn update(
        &self,
        b: &GaussianBelief,
        z: &Measurement,
        pose: &Pose,
    ) -> Result<GaussianBelief, FilterError>;
}

/// Kalman prediction with the EKF range-bearing update.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedKalman {
    pub model: TargetModel,
    pub sensor: SensorSpec,
}

impl BayesFilter for ExtendedKalman {
    fn predict(&self, b: &GaussianBelief) -> GaussianBelief {
        kf_predict(b, &self.model)
    }

    fn update(
        &self,
        b: &GaussianBelief,
        z: &Measurement,
        pose: &Pose,
    ) -> Result<GaussianBelief, FilterError> {
        ekf_update(b, z, pose, &self.sensor)
    }
}
