//! Shared fixtures for the benchmarks.

use quasireg_core::exogen::{affine_carrier_generator, Carrier};
use quasireg_core::numerics::TimeGrid;
use quasireg_core::{Generator, Matrix, Plant};

/// Second-order plant with a stable zero at -1 and unit relative degree.
pub fn plant(d: f64) -> Plant {
    Plant::new(
        Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]),
        Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
        d,
        Matrix::from_row_slice(2, 2, &[0.3, -0.2, 0.5, 0.1]),
        Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
    )
    .expect("valid plant")
}

pub fn triangular() -> Generator {
    affine_carrier_generator(Carrier::Triangular { period: 2.0, amplitude: 1.0 }, 0.0).expect("valid carrier")
}

pub fn square() -> Generator {
    let c = Carrier::Square {
        period: 2.0,
        duty: 0.5,
        low: 0.0,
        high: 1.0,
    };
    affine_carrier_generator(c, 0.0).expect("valid carrier")
}

pub fn grid(t_end: f64, step: f64) -> TimeGrid {
    TimeGrid::new(0.0, t_end, step, &[]).expect("valid grid")
}
