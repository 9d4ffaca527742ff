//! Fixed inputs shared by the benchmarks.

use momentshape::domains::{conformal_moments, disk_moments, interval_moments};
use momentshape::{Complex64, MomentTable1D, MomentTable2D};

pub fn shifted_disk(d: usize) -> MomentTable2D {
    disk_moments(Complex64::new(0.2, 0.1), 0.5, d).expect("valid disk")
}

pub fn quadratic_image(d: usize) -> MomentTable2D {
    let phi = [
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.3, 0.0),
    ];
    conformal_moments(&phi, d).expect("univalent map")
}

pub fn four_intervals(m: usize) -> MomentTable1D {
    interval_moments(&[[-0.9, -0.7], [-0.4, -0.1], [0.05, 0.35], [0.6, 0.95]], m)
        .expect("valid intervals")
}
