//! Textual export of models in the common LP file format: a Maximize
//! section, Subject To rows, explicit Bounds for every variable, a Binary
//! section, and End. Names are sanitized to `[A-Za-z0-9_]`, never start with
//! a digit or `e`, and are de-duplicated, all deterministically, so repeated
//! exports of the same model are byte-identical. The objective constant,
//! which the format cannot carry, is preserved in a leading comment.

use std::collections::HashSet;
use std::io::{self, Write};

use super::{MilpModel, VarKind};

pub fn to_lp_string(model: &MilpModel) -> String {
    let mut buf = Vec::new();
    write_lp(model, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("exporter emits ASCII")
}

pub fn write_lp<W: Write>(model: &MilpModel, out: &mut W) -> io::Result<()> {
    let names = sanitized_var_names(model);
    writeln!(out, "\\ objective constant: {}", model.objective_offset())?;
    writeln!(out, "Maximize")?;
    let obj_terms: Vec<(usize, f64)> = model
        .objective()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| (i, *c))
        .collect();
    write!(out, " obj:")?;
    write_terms(out, &obj_terms, &names)?;
    writeln!(out)?;

    writeln!(out, "Subject To")?;
    let mut row_names = HashSet::new();
    for c in model.constraints() {
        let rname = unique_name(sanitize(&c.name), &mut row_names);
        write!(out, " {rname}:")?;
        if c.terms.is_empty() {
            // Degenerate row; anchor it on the first variable with weight 0.
            write!(out, " 0 {}", names[0])?;
        } else {
            write_terms(out, &c.terms, &names)?;
        }
        writeln!(out, " {} {}", c.sense, c.rhs)?;
    }

    writeln!(out, "Bounds")?;
    for (j, v) in model.vars().iter().enumerate() {
        let n = &names[j];
        match (v.lo.is_finite(), v.hi.is_finite()) {
            (true, true) => writeln!(out, " {} <= {} <= {}", v.lo, n, v.hi)?,
            (true, false) => writeln!(out, " {} >= {}", n, v.lo)?,
            (false, true) => writeln!(out, " -inf <= {} <= {}", n, v.hi)?,
            (false, false) => writeln!(out, " {} free", n)?,
        }
    }

    writeln!(out, "Binary")?;
    let mut line = String::new();
    for (j, v) in model.vars().iter().enumerate() {
        if v.kind != VarKind::Binary {
            continue;
        }
        if line.len() + names[j].len() + 1 > 78 {
            writeln!(out, " {line}")?;
            line.clear();
        }
        if !line.is_empty() {
            line.push(' ');
        }
        line.push_str(&names[j]);
    }
    if !line.is_empty() {
        writeln!(out, " {line}")?;
    }
    writeln!(out, "End")?;
    Ok(())
}

fn write_terms<W: Write>(
    out: &mut W,
    terms: &[(usize, f64)],
    names: &[String],
) -> io::Result<()> {
    for (k, &(id, c)) in terms.iter().enumerate() {
        if k > 0 && k % 8 == 0 {
            write!(out, "\n  ")?;
        }
        if c < 0.0 {
            write!(out, " - {} {}", -c, names[id])?;
        } else if k == 0 {
            write!(out, " {} {}", c, names[id])?;
        } else {
            write!(out, " + {} {}", c, names[id])?;
        }
    }
    Ok(())
}

/// Sanitized, de-duplicated export name per variable id.
pub fn sanitized_var_names(model: &MilpModel) -> Vec<String> {
    let mut taken = HashSet::new();
    model
        .vars()
        .iter()
        .map(|v| unique_name(sanitize(&v.name), &mut taken))
        .collect()
}

fn sanitize(raw: &str) -> String {
    let mut s: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        s.push('v');
    }
    let first = s.chars().next().unwrap();
    if first.is_ascii_digit() {
        s.insert(0, 'v');
    } else if first == 'e' || first == 'E' {
        // A leading `e` can be mistaken for an exponent by LP readers.
        s.insert_str(0, "v_");
    }
    s
}

fn unique_name(base: String, taken: &mut HashSet<String>) -> String {
    let name = if taken.contains(&base) {
        let mut k = 2usize;
        loop {
            let candidate = format!("{base}_{k}");
            if !taken.contains(&candidate) {
                break candidate;
            }
            k += 1;
        }
    } else {
        base
    };
    taken.insert(name.clone());
    name
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::test_oracle::random_model;
    use crate::milp::{solve, MilpModel, SolveParams};
    use crate::rng::Rng64;

    #[test]
    fn golden_export_of_a_small_model() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("pos x", 0.0, 5.0).unwrap();
        let b = m.add_binary("3b");
        m.add_continuous("e_scale", f64::NEG_INFINITY, 2.0).unwrap();
        m.add_constraint("row one", vec![(x, 1.0), (b, 3.0)], Sense::Le, 4.0)
            .unwrap();
        m.set_objective(&[(x, 2.0), (b, -1.0)]);
        m.set_objective_offset(7.0);
        let expected = "\\ objective constant: 7\n\
                        Maximize\n \
                        obj: 2 pos_x - 1 v3b\n\
                        Subject To\n \
                        row_one: 1 pos_x + 3 v3b <= 4\n\
                        Bounds\n \
                        0 <= pos_x <= 5\n \
                        0 <= v3b <= 1\n \
                        -inf <= v_e_scale <= 2\n\
                        Binary\n \
                        v3b\n\
                        End\n";
        assert_eq!(to_lp_string(&m), expected);
    }

    #[test]
    fn repeated_export_is_byte_identical() {
        let mut rng = Rng64::new(12);
        let m = random_model(&mut rng);
        assert_eq!(to_lp_string(&m), to_lp_string(&m));
    }

    #[test]
    fn duplicate_names_are_disambiguated() {
        let mut m = MilpModel::new();
        m.add_continuous("x", 0.0, 1.0).unwrap();
        m.add_continuous("x", 0.0, 2.0).unwrap();
        m.add_continuous("x_2", 0.0, 3.0).unwrap();
        let names = sanitized_var_names(&m);
        assert_eq!(names, vec!["x", "x_2", "x_2_2"]);
    }

    use crate::milp::Sense;

    /// Minimal reader for the exporter's own output, used to check that the
    /// text carries the whole model. Variables are declared by the Bounds
    /// section in export order, so ids survive the round trip.
    fn parse_lp(text: &str) -> MilpModel {
        let mut offset = 0.0;
        let mut lines: Vec<&str> = Vec::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("\\ objective constant: ") {
                offset = rest.trim().parse().unwrap();
            } else if !line.starts_with('\\') {
                lines.push(line);
            }
        }
        let section_at = |name: &str| {
            lines
                .iter()
                .position(|l| l.trim() == name)
                .unwrap_or_else(|| panic!("missing section {name}"))
        };
        let maximize = section_at("Maximize");
        let subject = section_at("Subject To");
        let bounds = section_at("Bounds");
        let binary = section_at("Binary");
        let end = section_at("End");

        // Binary names first so variables get the right kind on declaration.
        let binary_names: HashSet<String> = lines[binary + 1..end]
            .iter()
            .flat_map(|l| l.split_whitespace())
            .map(str::to_string)
            .collect();

        let mut m = MilpModel::new();
        let mut ids: Vec<(String, usize)> = Vec::new();
        for line in &lines[bounds + 1..binary] {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let (name, lo, hi) = match toks.as_slice() {
                [lo, "<=", name, "<=", hi] => {
                    let lo = if *lo == "-inf" {
                        f64::NEG_INFINITY
                    } else {
                        lo.parse().unwrap()
                    };
                    (name.to_string(), lo, hi.parse().unwrap())
                }
                [name, ">=", lo] => (name.to_string(), lo.parse().unwrap(), f64::INFINITY),
                [name, "free"] => (name.to_string(), f64::NEG_INFINITY, f64::INFINITY),
                other => panic!("bad bounds line {other:?}"),
            };
            let kind = if binary_names.contains(&name) {
                VarKind::Binary
            } else {
                VarKind::Continuous
            };
            let id = m.add_var(name.clone(), kind, lo, hi).unwrap();
            ids.push((name, id));
        }
        let id_of = |name: &str| -> usize {
            ids.iter().find(|(n, _)| n == name).map(|(_, i)| *i).unwrap()
        };

        // Terms: sequence of [sign] coefficient name.
        let parse_terms = |toks: &[&str]| -> Vec<(usize, f64)> {
            let mut out = Vec::new();
            let mut sign = 1.0;
            let mut pending: Option<f64> = None;
            for t in toks {
                match *t {
                    "+" => sign = 1.0,
                    "-" => sign = -1.0,
                    _ => {
                        if let Some(c) = pending.take() {
                            out.push((id_of(t), sign * c));
                            sign = 1.0;
                        } else {
                            pending = Some(t.parse().unwrap());
                        }
                    }
                }
            }
            assert!(pending.is_none(), "dangling coefficient");
            out
        };

        let obj_text = lines[maximize + 1..subject].join(" ");
        let obj_text = obj_text.trim().strip_prefix("obj:").unwrap().trim();
        let toks: Vec<&str> = obj_text.split_whitespace().collect();
        m.set_objective(&parse_terms(&toks));
        m.set_objective_offset(offset);

        let rows_text = lines[subject + 1..bounds].join(" ");
        // Each row: name: terms sense rhs. Split on known senses.
        let mut toks = rows_text.split_whitespace().peekable();
        while toks.peek().is_some() {
            let name = toks.next().unwrap().strip_suffix(':').unwrap().to_string();
            let mut body: Vec<&str> = Vec::new();
            let sense = loop {
                let t = toks.next().expect("sense before end");
                match t {
                    "<=" => break Sense::Le,
                    ">=" => break Sense::Ge,
                    "=" => break Sense::Eq,
                    other => body.push(other),
                }
            };
            let rhs: f64 = toks.next().unwrap().parse().unwrap();
            m.add_constraint(name, parse_terms(&body), sense, rhs).unwrap();
        }
        m
    }

    #[test]
    fn export_round_trips_through_a_reader_and_resolves_identically() {
        let mut rng = Rng64::new(0x1F0001);
        for case in 0..60 {
            let m = random_model(&mut rng);
            let text = to_lp_string(&m);
            let back = parse_lp(&text);
            assert_eq!(back.num_vars(), m.num_vars(), "case {case}");
            assert_eq!(back.num_binaries(), m.num_binaries(), "case {case}");
            let a = solve(&m, &SolveParams::default());
            let b = solve(&back, &SolveParams::default());
            assert_eq!(a.status, b.status, "case {case}");
            if a.values.is_some() {
                assert!(
                    (a.objective - b.objective).abs() <= 1e-9 * (1.0 + a.objective.abs()),
                    "case {case}: {} vs {}",
                    a.objective,
                    b.objective
                );
            }
        }
    }

    #[test]
    fn abs_value_construction_survives_export() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", -4.0, 9.0).unwrap();
        let z = m.linearize_abs("dist", &[(x, 1.0)], -5.0).unwrap();
        // Maximize |x - 5| over [-4, 9]: best is x = -4 giving 9.
        m.set_objective(&[(z, 1.0)]);
        let direct = solve(&m, &SolveParams::default());
        let via_text = solve(&parse_lp(&to_lp_string(&m)), &SolveParams::default());
        assert!((direct.objective - 9.0).abs() < 1e-6, "{}", direct.objective);
        assert!((via_text.objective - 9.0).abs() < 1e-6);
    }
}
