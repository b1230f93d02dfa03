// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module.

use std::path::PathBuf;

/// Errors produced while reading traces or running the numerical kernels.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Dump directory is malformed: missing file, wrong size, bad manifest.
    #[error("{0}")]
    Format(String),

    /// Payload decoded but holds unusable values (NaN, Inf).
    #[error("{0}")]
    Data(String),

    /// Filesystem failure outside of format validation.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Invalid synthetic or cascade specification.
    #[error("{0}")]
    Spec(String),

    /// Input with no usable geometry (too few rows, all-zero rows).
    #[error("{0}")]
    DegenerateInput(String),

    /// Projection preconditions violated (complement too small, bad schedule).
    #[error("{0}")]
    Geometry(String),

    /// Baseline cannot anchor a calibration.
    #[error("{0}")]
    Calibration(String),

    /// Dimension formula undefined for the measured correlators.
    #[error("{0}")]
    Estimation(String),

    /// Error raised while processing a specific layer of a trace.
    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_layer(self, layer: usize) -> Self {
        Self::Layer {
            layer,
            source: Box::new(self),
        }
    }

    /// Machine-readable kind, e.g. `"FormatError"`. Layer wrappers report
    /// the kind of the underlying error.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Format(_) => "FormatError",
            Self::Data(_) => "DataError",
            Self::Io { .. } => "IoError",
            Self::Spec(_) => "SpecError",
            Self::DegenerateInput(_) => "DegenerateInput",
            Self::Geometry(_) => "GeometryError",
            Self::Calibration(_) => "CalibrationError",
            Self::Estimation(_) => "EstimationError",
            Self::Layer { source, .. } => source.kind(),
        }
    }

    /// Process exit status: 2 for input/validation errors, 3 for
    /// numerical or degenerate-input errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Format(_)
            | Self::Data(_)
            | Self::Io { .. }
            | Self::Spec(_)
            | Self::Calibration(_) => 2,
            Self::DegenerateInput(_) | Self::Geometry(_) | Self::Estimation(_) => 3,
            Self::Layer { source, .. } => source.exit_code(),
        }
    }

    /// Layer index attached to this error, if any.
    pub fn layer(&self) -> Option<usize> {
        match self {
            Self::Layer { layer, .. } => Some(*layer),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_wrapper_keeps_inner_kind_and_code() {
        let err = Error::DegenerateInput("all rows zero".into()).at_layer(4);
        assert_eq!(err.kind(), "DegenerateInput");
        assert_eq!(err.exit_code(), 3);
        assert_eq!(err.layer(), Some(4));
        assert_eq!(err.to_string(), "layer 4: all rows zero");
    }

    #[test]
    fn validation_errors_exit_with_two() {
        assert_eq!(Error::Format("x".into()).exit_code(), 2);
        assert_eq!(Error::Calibration("x".into()).exit_code(), 2);
        assert_eq!(Error::Estimation("x".into()).exit_code(), 3);
    }
}
