//! Single-line failures: `hlspower: <Kind>: <message>`.

use std::fmt;
use std::path::Path;

use hlspower_core::activity::ActivityError;
use hlspower_core::bench::BenchError;
use hlspower_core::design::DesignError;
use hlspower_core::dse::DseError;
use hlspower_core::features::FeatureError;
use hlspower_core::model::ModelError;
use hlspower_core::pipeline::PipelineError;
use hlspower_core::synth::SynthError;

#[derive(Debug)]
pub struct Failure {
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Self { kind: kind.into(), message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("InvalidArgument", message)
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::new("IoFailure", format!("{}: {e}", path.display()))
    }

    /// Prefixes the message with the file it concerns.
    pub fn at(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "hlspower: {}: {one_line}", self.kind)
    }
}

/// Variant name from the derived `Debug` output.
fn variant<E: fmt::Debug>(e: &E) -> String {
    format!("{e:?}").chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect()
}

fn leaf<E: fmt::Debug + fmt::Display>(e: &E) -> Failure {
    Failure { kind: variant(e), message: e.to_string() }
}

fn kind_of_synth(e: &SynthError) -> String {
    match e {
        SynthError::Activity(a) => variant(a),
        SynthError::Design(d) => variant(d),
        other => variant(other),
    }
}

fn kind_of_bench(e: &BenchError) -> String {
    match e {
        BenchError::Io { .. } => "IoFailure".into(),
        BenchError::Format { .. } => "MalformedDocument".into(),
        BenchError::Design { source, .. } => variant(source),
        BenchError::Stimuli { source, .. } => variant(source),
        BenchError::Synth(s) => kind_of_synth(s),
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Failure { kind: kind_of_bench(&e), message: e.to_string() }
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        Failure { kind: kind_of_synth(&e), message: e.to_string() }
    }
}

macro_rules! leaf_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                leaf(&e)
            }
        }
    )*};
}

leaf_errors!(ModelError, FeatureError, DseError, DesignError, ActivityError);

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let kind = match &e {
            PipelineError::Activity { source, .. } => variant(source),
            PipelineError::Feature { source, .. } => variant(source),
            PipelineError::Synth(s) => kind_of_synth(s),
            PipelineError::Model(m) => variant(m),
            PipelineError::Dse(d) => variant(d),
            PipelineError::Bench(b) => kind_of_bench(b),
            PipelineError::Data(_) => "InvalidData".into(),
        };
        Failure { kind, message: e.to_string() }
    }
}
