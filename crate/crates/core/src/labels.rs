//! Names of the comb ports: `I0` and `O0` are the open input/output, slot `k`
//! (1-based) has input `Ik` and output `Ok`.

pub const OPEN_IN: &str = "I0";
pub const OPEN_OUT: &str = "O0";

pub fn input(slot: usize) -> String {
    format!("I{slot}")
}

pub fn output(slot: usize) -> String {
    format!("O{slot}")
}

/// `I1, O1, ..., IK, OK`
pub fn slot_labels(slots: usize) -> Vec<String> {
    (1..=slots).flat_map(|k| [input(k), output(k)]).collect()
}

/// `I0, I1, O1, ..., IK, OK, O0`
pub fn comb_labels(slots: usize) -> Vec<String> {
    let mut v = vec![OPEN_IN.to_string()];
    v.extend(slot_labels(slots));
    v.push(OPEN_OUT.to_string());
    v
}
