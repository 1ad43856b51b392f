//! Second, deliberately naive OSC encoder used only as a test oracle.
//! Shares no code with the crate's codec.

use jamloop_core::osc::{OscArg, OscMessage};

fn push_padded_cstring(out: &mut Vec<u8>, s: &[u8]) {
    out.extend_from_slice(s);
    out.push(0);
    while !out.len().is_multiple_of(4) {
        out.push(0);
    }
}

pub fn reference_encode(m: &OscMessage) -> Vec<u8> {
    let mut out = Vec::new();
    push_padded_cstring(&mut out, m.address.as_bytes());
    let mut tags = vec![b','];
    for a in &m.args {
        tags.push(match a {
            OscArg::Int(_) => b'i',
            OscArg::Float(_) => b'f',
            OscArg::Str(_) => b's',
            OscArg::Blob(_) => b'b',
        });
    }
    push_padded_cstring(&mut out, &tags);
    for a in &m.args {
        match a {
            OscArg::Int(v) => {
                let u = *v as u32;
                out.extend([(u >> 24) as u8, (u >> 16) as u8, (u >> 8) as u8, u as u8]);
            }
            OscArg::Float(f) => {
                let u = f.to_bits();
                out.extend([(u >> 24) as u8, (u >> 16) as u8, (u >> 8) as u8, u as u8]);
            }
            OscArg::Str(s) => push_padded_cstring(&mut out, s.as_bytes()),
            OscArg::Blob(b) => {
                let n = b.len() as u32;
                out.extend([(n >> 24) as u8, (n >> 16) as u8, (n >> 8) as u8, n as u8]);
                out.extend_from_slice(b);
                while out.len() % 4 != 0 {
                    out.push(0);
                }
            }
        }
    }
    out
}
