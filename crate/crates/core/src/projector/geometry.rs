use crate::error::{Error, Result};
use crate::image::OBJECT_SIDE_CM;

/// Source-to-detector distance (cm).
pub const SDD_CM: f64 = 107.2;
/// Isocenter-to-detector distance (cm).
pub const IDD_CM: f64 = 47.2;
/// Detector pitch as a fraction of the image pixel scale.
pub const DETECTOR_PITCH_FACTOR: f64 = 0.8;

pub type Point = [f64; 2];

/// Fan-beam acquisition with a flat, equispaced detector.
///
/// The source sits on a circle of radius `sdd - idd` around the isocenter.
/// At angle 0 it is on the +y axis; positive angles rotate it
/// counterclockwise. The detector is centred diametrically opposite, at
/// `idd` from the isocenter, perpendicular to the central ray. Element `e`
/// has its centre at offset `(e - (n_det - 1) / 2) * det_spacing` along the
/// detector axis `(cos θ, sin θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub sdd_cm: f64,
    pub idd_cm: f64,
    pub n_det: usize,
    pub det_spacing_cm: f64,
    pub angles_deg: Vec<f64>,
    pub image_side_cm: f64,
    pub n: usize,
}

/// Equally spaced full-rotation geometry for an `n × n` image.
pub fn make_geometry(n: usize, n_angles: usize) -> Result<Geometry> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("image side must be >= 2, got {n}")));
    }
    if n_angles == 0 {
        return Err(Error::InvalidSize("at least one projection angle is required".into()));
    }
    let step = 360.0 / n_angles as f64;
    Geometry::new(
        n,
        (0..n_angles).map(|a| a as f64 * step).collect(),
        2 * n,
        DETECTOR_PITCH_FACTOR * OBJECT_SIDE_CM / n as f64,
    )
}

impl Geometry {
    /// Standard distances and object size with custom sampling.
    pub fn new(n: usize, angles_deg: Vec<f64>, n_det: usize, det_spacing_cm: f64) -> Result<Self> {
        let g = Self {
            sdd_cm: SDD_CM,
            idd_cm: IDD_CM,
            n_det,
            det_spacing_cm,
            angles_deg,
            image_side_cm: OBJECT_SIDE_CM,
            n,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sdd_cm > self.idd_cm && self.idd_cm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need sdd > idd > 0, got sdd={} idd={}",
                self.sdd_cm, self.idd_cm
            )));
        }
        if self.n == 0 || self.n_det == 0 || self.angles_deg.is_empty() {
            return Err(Error::InvalidSize("geometry has an empty dimension".into()));
        }
        if !(self.det_spacing_cm > 0.0 && self.image_side_cm > 0.0) {
            return Err(Error::InvalidParameter("spacings must be positive".into()));
        }
        if let Some(a) = self.angles_deg.iter().find(|a| !(0.0..360.0).contains(*a)) {
            return Err(Error::InvalidParameter(format!("angle {a} outside [0, 360)")));
        }
        let mut sorted = self.angles_deg.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("angles must be distinct".into()));
        }
        Ok(())
    }

    pub fn n_angles(&self) -> usize {
        self.angles_deg.len()
    }

    /// Number of rays, `n_angles * n_det`.
    pub fn n_rays(&self) -> usize {
        self.n_angles() * self.n_det
    }

    /// Source-to-isocenter distance.
    pub fn source_radius_cm(&self) -> f64 {
        self.sdd_cm - self.idd_cm
    }

    pub fn pixel_scale_cm(&self) -> f64 {
        self.image_side_cm / self.n as f64
    }

    /// Offset of detector element `det` from the detector centre along its axis.
    pub fn detector_offset(&self, det: usize) -> f64 {
        (det as f64 - (self.n_det as f64 - 1.0) / 2.0) * self.det_spacing_cm
    }

    /// Unit vector from the isocenter towards the source, and the detector axis.
    pub fn frame(&self, angle: usize) -> (Point, Point) {
        let (s, c) = self.angles_deg[angle].to_radians().sin_cos();
        ([-s, c], [c, s])
    }

    pub fn source(&self, angle: usize) -> Point {
        let (to_src, _) = self.frame(angle);
        let r = self.source_radius_cm();
        [r * to_src[0], r * to_src[1]]
    }

    pub fn detector_center(&self, angle: usize, det: usize) -> Point {
        let (to_src, axis) = self.frame(angle);
        let off = self.detector_offset(det);
        [-self.idd_cm * to_src[0] + off * axis[0], -self.idd_cm * to_src[1] + off * axis[1]]
    }

    /// Endpoints of ray `row = angle * n_det + det`.
    pub fn ray(&self, row: usize) -> (Point, Point) {
        let (angle, det) = (row / self.n_det, row % self.n_det);
        (self.source(angle), self.detector_center(angle, det))
    }
}
