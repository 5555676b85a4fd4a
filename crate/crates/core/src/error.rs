use thiserror::Error;

use crate::assoc::AssocError;
use crate::geometry::GeometryError;
use crate::interchange::InterchangeError;
use crate::metrics::MetricsError;
use crate::simulator::SimulatorError;
use crate::tracker::TrackerError;

/// Any error produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Interchange(#[from] InterchangeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assoc(#[from] AssocError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Simulator(#[from] SimulatorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
