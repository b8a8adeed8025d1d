//! Plain-text triplet dump of a cone program, for standalone testing and
//! external cross-checks.
//!
//! Format (line oriented, `#` starts a comment):
//!
//! ```text
//! conicprogram v1
//! dims <n_rows> <n_free> <n_nonneg>
//! soc <d1> <d2> ...          # omitted when there are no cones
//! c <var> <value>            # sparse objective entries
//! A <row> <var> <value>      # equality matrix entries
//! b <row> <value>            # sparse right-hand side
//! end
//! ```

use crate::{ConicProgram, CscMatrix};
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum TripletError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("missing header line 'conicprogram v1'")]
    MissingHeader,
    #[error("missing 'dims' line")]
    MissingDims,
    #[error("missing 'end' line")]
    MissingEnd,
}

pub fn write_triplets(prog: &ConicProgram) -> String {
    let mut out = String::new();
    out.push_str("conicprogram v1\n");
    let _ = writeln!(
        out,
        "dims {} {} {}",
        prog.num_rows(),
        prog.n_free,
        prog.n_nonneg
    );
    if !prog.soc_dims.is_empty() {
        out.push_str("soc");
        for d in &prog.soc_dims {
            let _ = write!(out, " {d}");
        }
        out.push('\n');
    }
    for (i, &v) in prog.c.iter().enumerate() {
        if v != 0.0 {
            let _ = writeln!(out, "c {i} {v:.17e}");
        }
    }
    for col in 0..prog.a.ncols() {
        for (row, v) in prog.a.col_iter(col) {
            let _ = writeln!(out, "A {row} {col} {v:.17e}");
        }
    }
    for (j, &v) in prog.b.iter().enumerate() {
        if v != 0.0 {
            let _ = writeln!(out, "b {j} {v:.17e}");
        }
    }
    out.push_str("end\n");
    out
}

pub fn read_triplets(text: &str) -> Result<ConicProgram, TripletError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut header_seen = false;
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut soc_dims: Vec<usize> = Vec::new();
    let mut c_entries: Vec<(usize, f64)> = Vec::new();
    let mut a_entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut b_entries: Vec<(usize, f64)> = Vec::new();
    let mut end_seen = false;

    for (ln, line) in &mut lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line == "conicprogram v1" {
                header_seen = true;
                continue;
            }
            return Err(TripletError::MissingHeader);
        }
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap();
        let parse_usize = |s: Option<&str>, ln: usize| {
            s.ok_or_else(|| TripletError::Parse(ln, "missing field".into()))?
                .parse::<usize>()
                .map_err(|e| TripletError::Parse(ln, e.to_string()))
        };
        let parse_f64 = |s: Option<&str>, ln: usize| {
            s.ok_or_else(|| TripletError::Parse(ln, "missing field".into()))?
                .parse::<f64>()
                .map_err(|e| TripletError::Parse(ln, e.to_string()))
        };
        match tag {
            "dims" => {
                let m = parse_usize(parts.next(), ln)?;
                let f = parse_usize(parts.next(), ln)?;
                let p = parse_usize(parts.next(), ln)?;
                dims = Some((m, f, p));
            }
            "soc" => {
                for s in parts {
                    soc_dims.push(
                        s.parse::<usize>()
                            .map_err(|e| TripletError::Parse(ln, e.to_string()))?,
                    );
                }
            }
            "c" => {
                let i = parse_usize(parts.next(), ln)?;
                let v = parse_f64(parts.next(), ln)?;
                c_entries.push((i, v));
            }
            "A" => {
                let r = parse_usize(parts.next(), ln)?;
                let c = parse_usize(parts.next(), ln)?;
                let v = parse_f64(parts.next(), ln)?;
                a_entries.push((r, c, v));
            }
            "b" => {
                let j = parse_usize(parts.next(), ln)?;
                let v = parse_f64(parts.next(), ln)?;
                b_entries.push((j, v));
            }
            "end" => {
                end_seen = true;
                break;
            }
            other => {
                return Err(TripletError::Parse(ln, format!("unknown tag '{other}'")));
            }
        }
    }
    if !end_seen {
        return Err(TripletError::MissingEnd);
    }
    let (m, n_free, n_nonneg) = dims.ok_or(TripletError::MissingDims)?;
    let n = n_free + n_nonneg + soc_dims.iter().sum::<usize>();
    let mut c = vec![0.0; n];
    for (i, v) in c_entries {
        c[i] = v;
    }
    let mut b = vec![0.0; m];
    for (j, v) in b_entries {
        b[j] = v;
    }
    Ok(ConicProgram {
        c,
        a: CscMatrix::from_triplets(m, n, &a_entries),
        b,
        n_free,
        n_nonneg,
        soc_dims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let prog = ConicProgram {
            c: vec![0.0, 1.0, 0.0, 0.0, 0.0],
            a: CscMatrix::from_triplets(2, 5, &[(0, 0, 1.0), (0, 2, -1.0), (1, 3, 2.5), (1, 4, 1.0)]),
            b: vec![1.0, 0.0],
            n_free: 1,
            n_nonneg: 1,
            soc_dims: vec![3],
        };
        let text = write_triplets(&prog);
        let back = read_triplets(&text).unwrap();
        assert_eq!(back.c, prog.c);
        assert_eq!(back.b, prog.b);
        assert_eq!(back.soc_dims, prog.soc_dims);
        assert_eq!(back.a, prog.a);
    }
}
