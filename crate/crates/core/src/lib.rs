//! Runtime access-control enforcement for Web service compositions over a
//! software-defined network.
//!
//! Owner policy over services and consumers ([`policy::Spm`]) is mapped onto
//! data-plane terminals ([`policy::Rspm`]), uploaded to a [`controller::Controller`]
//! and enforced by OpenFlow-style switches simulated in [`dataplane`].
//! [`verify`] checks that what the network actually delivers matches the policy.

pub mod controller;
pub mod dataplane;
pub mod harness;
pub mod model;
pub mod policy;
pub mod verify;
