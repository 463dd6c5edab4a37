//! Studies shared by the tests of one binary, computed once per key.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use inflap::asymptotics::{default_p_list, run_study, Study, StudyConfig};
use inflap::geometry::DomainSpec;

type Slot = Arc<OnceLock<Study>>;

fn slot(key: String) -> Slot {
    static CACHE: OnceLock<Mutex<HashMap<String, Slot>>> = OnceLock::new();
    let mut map = CACHE.get_or_init(Default::default).lock().unwrap();
    map.entry(key).or_default().clone()
}

/// Default-config study over the default exponents, cached by shape and `h`.
pub fn study(spec: &DomainSpec, h: f64) -> Slot {
    let s = slot(format!("{}@{}", spec.name(), h));
    s.get_or_init(|| run_study(spec, h, &default_p_list(), &StudyConfig::default()).expect("study runs"));
    s
}

pub fn get(slot: &Slot) -> &Study {
    slot.get().expect("initialized")
}
