//! Raw datasets and messy-pool construction.

mod dataset;
mod idx;
mod pool;
mod synthetic;
mod tabular;

pub use dataset::{Dataset, TaskSpec};
pub use idx::{load_idx, write_idx_images, write_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use pool::{
    build_messy_pool, class_quotas, sample_initial_labeled, BaseData, MessyPoolConfig, PoolSplits,
};
pub use synthetic::{make_synthetic_messy, SyntheticConfig};
pub use tabular::load_csv;
