//! Dataset ingestion, raw-record coding, model documents and published fixtures.

mod csv;
pub mod fixtures;
mod persist;
mod raw;

pub use self::csv::{
    complete_cases, load_dataset, load_dataset_path, save_dataset, save_dataset_path,
    IngestReport, RejectedRow, YEAR_COLUMN,
};
pub use fixtures::{published_fixtures, published_marginals, MarginalTable, PublishedFixtures};
pub use persist::{
    content_checksum, load_model, load_model_path, model_checksum, save_model, save_model_path,
    MODEL_FORMAT_MAJOR, MODEL_FORMAT_VERSION,
};
pub use raw::{
    age_group, bmi_class, clean_continuous, discretize, prepare_records, read_raw_records,
    sleep_class, ContinuousField, DiscretizeRejection, ExclusionReport, FieldStats,
    PrepareReport, RawRecord, SesBinning,
};
