//! The chapters of the book under `book/src`, compiled as doc-tests so their
//! code samples stay in sync with the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/sphere.md")]
pub mod sphere {}

#[doc = include_str!("../../../book/src/ensemble.md")]
pub mod ensemble {}

#[doc = include_str!("../../../book/src/covariance.md")]
pub mod covariance {}

#[doc = include_str!("../../../book/src/chaos.md")]
pub mod chaos {}

#[doc = include_str!("../../../book/src/measuring.md")]
pub mod measuring {}

#[doc = include_str!("../../../book/src/moments.md")]
pub mod moments {}

#[doc = include_str!("../../../book/src/local_limit.md")]
pub mod local_limit {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
