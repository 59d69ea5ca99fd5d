//! Complex numbers in scenario files: a bare number for real values, or a
//! `[re, im]` pair.

use serde::de::{self, Deserializer};
use serde::ser::{SerializeTuple, Serializer};
use serde::Deserialize;

use crate::C64;

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Real(f64),
    Pair([f64; 2]),
}

pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
    if z.im == 0.0 {
        s.serialize_f64(z.re)
    } else {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&z.re)?;
        t.serialize_element(&z.im)?;
        t.end()
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
    match Repr::deserialize(d) {
        Ok(Repr::Real(re)) => Ok(C64::new(re, 0.0)),
        Ok(Repr::Pair([re, im])) => Ok(C64::new(re, im)),
        Err(_) => Err(de::Error::custom("expected a number or a [re, im] pair")),
    }
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
        match z {
            Some(z) => super::serialize(z, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<C64>, D::Error> {
        match Option::<Repr>::deserialize(d) {
            Ok(None) => Ok(None),
            Ok(Some(Repr::Real(re))) => Ok(Some(C64::new(re, 0.0))),
            Ok(Some(Repr::Pair([re, im]))) => Ok(Some(C64::new(re, im))),
            Err(_) => Err(de::Error::custom("expected a number or a [re, im] pair")),
        }
    }
}

pub mod map {
    use alloc::collections::BTreeMap;
    use alloc::string::String;

    use serde::ser::SerializeMap;

    use super::*;

    struct Wrapped(C64);

    impl serde::Serialize for Wrapped {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            super::serialize(&self.0, s)
        }
    }

    impl<'de> Deserialize<'de> for Wrapped {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            super::deserialize(d).map(Wrapped)
        }
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, C64>, s: S) -> Result<S::Ok, S::Error> {
        let mut out = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            out.serialize_entry(k, &Wrapped(*v))?;
        }
        out.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, C64>, D::Error> {
        let raw = BTreeMap::<String, Wrapped>::deserialize(d)?;
        Ok(raw.into_iter().map(|(k, v)| (k, v.0)).collect())
    }
}
