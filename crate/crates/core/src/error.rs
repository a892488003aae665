use std::path::PathBuf;

/// Crate-wide error type. Pipeline stages wrap causes in [`Error::Stage`] so
/// a failure deep in a run still names the stage that raised it.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    ObjParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: non-triangular face with {arity} vertices")]
    NonTriangularFace {
        path: PathBuf,
        line: usize,
        arity: usize,
    },

    #[error("json error on {path}: {msg}")]
    Json { path: PathBuf, msg: String },

    #[error("non-manifold edge ({a}, {b}) shared by {count} triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },

    #[error("degenerate triangle {tri} (area {area:.3e} below {min_area:.3e})")]
    DegenerateTriangle { tri: usize, area: f64, min_area: f64 },

    #[error("invalid parameter {name}: {msg}")]
    Parameter { name: &'static str, msg: String },

    #[error("{what} failed to converge after {iters} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    #[error(
        "mesh is not symmetric about plane {plane}: {fraction:.1}% of triangle barycenters \
         have no mirror image within {tol:.3e} (worst: triangle {worst_tri}, deviation {worst_dev:.3e})"
    )]
    Asymmetric {
        plane: usize,
        fraction: f64,
        tol: f64,
        worst_tri: usize,
        worst_dev: f64,
    },

    #[error("field is not symmetric under the configured planes: {msg}")]
    FieldAsymmetric { msg: String },

    #[error("refinement still has {remaining} over-long edges after {rounds} rounds")]
    RefinementCap { rounds: usize, remaining: usize },

    #[error("sampling radius {r:.6} is below the resolution limit 2q = {limit:.6}")]
    RadiusTooSmall { r: f64, limit: f64 },

    #[error("inconsistent region adjacency around region {region}: {msg}")]
    RegionAdjacency { region: usize, msg: String },

    #[error("welding would create a non-manifold edge near {pos:?}")]
    WeldNonManifold { pos: [f64; 3] },

    #[error("structural mechanism: stiffness matrix is singular ({hint})")]
    Mechanism { hint: String },

    #[error("mesh has no boundary; the frame model needs boundary supports")]
    NoBoundary,

    #[error("bisection on the sampling radius failed: {msg}")]
    Bisection { msg: String },

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps `self` with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Name of the outermost stage tag, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
