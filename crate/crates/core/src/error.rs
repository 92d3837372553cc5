use alloc::string::String;
use core::fmt;

/// Failures while building or querying a [`DistanceGraph`](crate::DistanceGraph).
#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    /// The prompt part must hold at least one vertex.
    EmptyPrompt,
    /// The response part must hold at least one vertex.
    EmptyResponse { n: usize, prompt_len: usize },
    /// A packed buffer does not match `n (n + 1) / 2`.
    SizeMismatch { expected: usize, actual: usize },
    /// A weight or distance is NaN or outside `[0, 1]`.
    OutOfRange { index: usize, value: f64 },
    /// MST over an empty vertex set.
    EmptySubset,
    /// A vertex index is not in the graph.
    VertexOutOfBounds { vertex: usize, n: usize },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::EmptyPrompt => write!(f, "prompt part is empty"),
            GraphError::EmptyResponse { n, prompt_len } => write!(
                f,
                "response part is empty (n = {n}, prompt_len = {prompt_len})"
            ),
            GraphError::SizeMismatch { expected, actual } => write!(
                f,
                "packed buffer holds {actual} values, expected {expected}"
            ),
            GraphError::OutOfRange { index, value } => {
                write!(f, "value {value} at packed index {index} is outside [0, 1]")
            }
            GraphError::EmptySubset => write!(f, "vertex subset is empty"),
            GraphError::VertexOutOfBounds { vertex, n } => {
                write!(f, "vertex {vertex} out of bounds for graph of {n} vertices")
            }
        }
    }
}

impl core::error::Error for GraphError {}

/// Failures of the head statistics and selection routines.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionError {
    /// One of the two classes has no samples.
    EmptyClass,
    /// AUROC or selection needs both a positive and a negative label.
    SingleClass { positives: usize, negatives: usize },
    /// Labels and scores differ in length.
    LengthMismatch { labels: usize, scores: usize },
    /// A label other than 0/1.
    NonBinaryLabel { index: usize, value: u8 },
    /// A sample used for selection carries no label.
    MissingLabel { sample: usize },
    /// NaN or infinite score/divergence.
    NonFinite { index: usize },
    /// A head needed for prediction is absent from the table.
    MissingHead { layer: u32, head: u32 },
    /// Table shape does not match its heads x samples grid.
    Shape { expected: usize, actual: usize },
    /// The table holds no heads, or `n_max` is zero.
    NoHeads,
    /// A requested sample id is not in the table.
    UnknownSample(String),
    /// A head appears twice in the table.
    DuplicateHead { layer: u32, head: u32 },
}

impl fmt::Display for SelectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionError::EmptyClass => write!(f, "a class has no samples"),
            SelectionError::SingleClass {
                positives,
                negatives,
            } => write!(
                f,
                "need both classes, got {positives} positive and {negatives} negative samples"
            ),
            SelectionError::LengthMismatch { labels, scores } => {
                write!(f, "{labels} labels but {scores} scores")
            }
            SelectionError::NonBinaryLabel { index, value } => {
                write!(f, "label {value} at index {index} is not 0 or 1")
            }
            SelectionError::MissingLabel { sample } => {
                write!(f, "sample {sample} has no label")
            }
            SelectionError::NonFinite { index } => write!(f, "non-finite value at index {index}"),
            SelectionError::MissingHead { layer, head } => {
                write!(f, "head (layer {layer}, head {head}) missing from table")
            }
            SelectionError::Shape { expected, actual } => {
                write!(f, "table holds {actual} values, expected {expected}")
            }
            SelectionError::NoHeads => write!(f, "no heads to select from"),
            SelectionError::UnknownSample(id) => write!(f, "sample {id:?} not in table"),
            SelectionError::DuplicateHead { layer, head } => {
                write!(f, "head (layer {layer}, head {head}) listed twice")
            }
        }
    }
}

impl core::error::Error for SelectionError {}
