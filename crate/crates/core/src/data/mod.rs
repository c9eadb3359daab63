//! Interaction corpora: parsing, vocabulary, category maps and splits.

mod corpus;
mod split;
pub mod synthetic;

pub use corpus::{
    compute_stats, load_category_map, parse_corpus, parse_corpus_str, CategoryMapReport,
    DatasetStats, InteractionCorpus, ParseReport, UserHistory, Vocabulary, MIN_HISTORY_LEN,
};
pub use split::{
    leave_last_out_split, make_window, prefix_windows, SplitExample, SplitSet, Splits,
};
