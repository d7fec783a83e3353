//! Channel access: CSMA/CA for 802.11p, sensing-based semi-persistent
//! scheduling for the LTE sidelink, and the half-duplex constraint both share.

pub mod csma;
pub mod half_duplex;
pub mod sps;

pub use csma::{csma_carrier_sense, CsmaParams, CsmaPhase, CsmaState, PendingPacket};
pub use half_duplex::{blocked_by_own_tx, half_duplex_filter, Interval};
pub use sps::{
    build_candidates, select_resource, Candidate, Footprint, SciRecord, SelectionOutcome, SensingWindow, SpsParams,
    SpsState, TxOutcome,
};
