//! Serial CNNs executed in place on a single activation buffer.

pub mod arch;
pub mod exec;
pub mod kernels;
pub mod layer;
pub mod model;
pub mod plan;
pub mod search;
pub mod train;

pub use arch::{enumerate_models, ArchSpec, PATTERNS};
pub use exec::{forward_inplace, InplaceRun};
pub use layer::{LayerSpec, Shape};
pub use model::{forward_naive, CnnModel};
pub use plan::{
    cnn_footprint, memory_plan, plan_herringbone, plan_row_major, FootprintCache, Layout,
    MemoryPlan, TraversalPlan,
};
pub use search::{catalog, feasible_models, sampling_search, CnnSearchConfig, CnnSearchOutcome};
pub use train::{train_cnn, CnnTrainConfig};
