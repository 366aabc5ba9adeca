//! Serde adapter writing vectors as plain number arrays.

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Vector;

pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
    v.as_slice().serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
    Vec::<f64>::deserialize(d).map(DVector::from_vec)
}
