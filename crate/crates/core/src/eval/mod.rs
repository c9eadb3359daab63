//! Full-ranking evaluation, quartile analyses, seed aggregation and
//! significance testing.

mod metrics;
mod profile;
mod quartile;
mod ranking;
mod welch;

pub use metrics::{
    aggregate_seeds, hit_rate_at_k, metric_report, metric_values, ndcg_at_k, GroupReport, MeanStd,
    MetricReport, CUTOFFS,
};
pub use profile::{lfc_hfc_norm_profile, pad_region_means, NormProfileRow};
pub use quartile::{group_by_scaled_dc, group_by_target_occurrence, quartile_labels, Quartiles};
pub use ranking::{rank_all_items, rank_examples, rank_of_target, RankRecord};
pub use welch::{welch_t_test, WelchResult};
