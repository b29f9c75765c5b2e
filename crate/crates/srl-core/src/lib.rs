pub mod data;
pub mod decode;
pub mod encoder;
pub mod eval;
pub mod model;
pub mod params;
pub mod synthetic;
pub mod syntax;
pub mod tensor;
pub mod train;
pub use data::{LabelSpaces, Sentence, Span, Vocabulary};
pub use decode::TransitionModel;
pub use encoder::ModelConfig;
pub use eval::EvalReport;
pub use model::{OracleSource, ParseSource, PredicateSource, SrlModel};
pub use tensor::{Array, Tape, TensorError, Var};
pub use train::TrainConfig;
