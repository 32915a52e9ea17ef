//! Parsers for scenario inputs: reviewer bid files and demographic tables.

mod bids;
mod demographics;

pub use bids::{bids_to_instance, parse_bids, parse_bids_str, write_bids, BidCorpus, BidLabel};
pub use demographics::{
    parse_demographics, read_demographics, read_demographics_from, write_demographics, DemographicRow,
    DemographicTable, FeatureConfig,
};
