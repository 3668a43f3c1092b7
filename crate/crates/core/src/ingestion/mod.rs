//! Chain data acquisition: JSON-RPC fetching, the two-step contract
//! gathering procedure, token metadata calls and the NDJSON fixture format.

mod fixture;
mod gather;
pub mod memnode;
mod metadata;
mod profile;
pub mod rpc;

pub use fixture::{
    read_fixture, read_fixture_str, write_fixture, write_fixture_string, FixtureError,
    FixtureFile, Record, FIXTURE_FORMAT,
};
pub use gather::{expand_transfer_emitters, gather, merge_records, GatherOptions};
pub use metadata::{decode_string_return, decode_uint_return, Field, MetadataProbe};
pub use profile::{ChainProfile, ProfileError};
pub use rpc::{BlockRange, FetchError, HttpTransport, RpcClient, RpcConfig, Transport};
