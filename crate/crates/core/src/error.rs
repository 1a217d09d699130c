use thiserror::Error;

use crate::coding::CodingError;
use crate::numerics::NumericsError;
use crate::softmaps::SoftmapError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Softmap(#[from] SoftmapError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{what}: expected shape {expected:?}, found {found:?}")]
    Dimension {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error(
        "user {user}: interferer channel has rank {rank}, leaving a {available}-dimensional \
         null space; {required} dimensions are required"
    )]
    InsufficientNullSpace {
        user: usize,
        rank: usize,
        available: usize,
        required: usize,
    },
    #[error("precoder needs rank {required} but the user channel has rank {rank}")]
    PrecoderRank { rank: usize, required: usize },
    #[error("noise variance must be positive, got {0}")]
    NoiseVariance(f64),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
