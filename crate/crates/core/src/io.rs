//! Plain columnar text: one header line of column names, then one row per
//! line, fields separated by tabs. Infinite gains are written as `-inf`/`inf`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::closedloop::{ClosedLoopTrace, DecisionRecord};
use crate::error::{Error, Result};
use crate::field::{FieldBundle, PatternCut};
use crate::geometry::Geometry;
use crate::weights::{PhaseAlphabet, QuantizedWeights, Regime, WeightVector};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip formatting; infinities as `inf`/`-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:?}")
    }
}

pub fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("not a number: {s:?}") })
}

fn parse_int<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse::<T>().map_err(|_| Error::Parse { line, message: format!("not an integer: {s:?}") })
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::LengthMismatch { expected: self.columns.len(), actual: row.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_f64(&mut self, row: &[f64]) -> Result<()> {
        self.push(row.iter().map(|&x| fmt_f64(x)).collect())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.columns.join("\t"));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join("\t"));
        }
        s
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.render().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Line numbers in errors are 1-based and count the header.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, message: "missing header".into() })?;
        let columns: Vec<String> = header.split('\t').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, l) in lines {
            let row: Vec<String> = l.split('\t').map(|s| s.trim().to_string()).collect();
            if row.len() != columns.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {} fields, found {}", columns.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column {name:?}") })
    }

    /// Numeric column by name.
    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows.iter().enumerate().map(|(i, r)| parse_f64(&r[c], i + 2)).collect()
    }

    fn expect_columns(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.column(n)).collect()
    }
}

pub fn geometry_table(geometry: &Geometry) -> Table {
    let mut t = Table::new(&[
        "index", "ring", "x_m", "y_m", "z_m", "jx_re", "jx_im", "jy_re", "jy_im", "jz_re", "jz_im", "area_m2",
    ]);
    for e in geometry.elements() {
        let mut row = vec![e.index.to_string(), e.ring.to_string()];
        row.extend(e.position_m.iter().map(|&v| fmt_f64(v)));
        for c in e.current {
            row.push(fmt_f64(c.re));
            row.push(fmt_f64(c.im));
        }
        row.push(fmt_f64(e.area_m2));
        t.rows.push(row);
    }
    t
}

/// The fixed field is the row with index `fixed`; element rows follow.
pub fn bundle_table(bundle: &FieldBundle) -> Table {
    let mut t = Table::new(&["index", "psi_rad", "re", "im"]);
    let psi = fmt_f64(bundle.psi_rad);
    t.rows.push(vec!["fixed".into(), psi.clone(), fmt_f64(bundle.fixed_field.re), fmt_f64(bundle.fixed_field.im)]);
    for (i, e) in bundle.element_vector.iter().enumerate() {
        t.rows.push(vec![i.to_string(), psi.clone(), fmt_f64(e.re), fmt_f64(e.im)]);
    }
    t
}

pub fn read_bundle(text: &str) -> Result<FieldBundle> {
    let t = Table::parse(text)?;
    let c = t.expect_columns(&["index", "psi_rad", "re", "im"])?;
    let mut fixed = None;
    let mut psi = None;
    let mut elems = Vec::new();
    for (i, r) in t.rows.iter().enumerate() {
        let line = i + 2;
        let z = Complex64::new(parse_f64(&r[c[2]], line)?, parse_f64(&r[c[3]], line)?);
        psi.get_or_insert(parse_f64(&r[c[1]], line)?);
        if r[c[0]] == "fixed" {
            fixed = Some(z);
        } else {
            let k: usize = parse_int(&r[c[0]], line)?;
            if k != elems.len() {
                return Err(Error::Parse { line, message: format!("element index {k} out of sequence") });
            }
            elems.push(z);
        }
    }
    Ok(FieldBundle {
        psi_rad: psi.unwrap_or(0.0),
        fixed_field: fixed.ok_or(Error::Parse { line: 1, message: "no fixed-field row".into() })?,
        element_vector: elems,
    })
}

pub fn weights_table(w: &WeightVector) -> Table {
    let tag = w.regime().tag();
    let mut t = Table::new(&["index", "re", "im", "regime"]);
    for (i, v) in w.values().iter().enumerate() {
        t.rows.push(vec![i.to_string(), fmt_f64(v.re), fmt_f64(v.im), tag.clone()]);
    }
    t
}

pub fn read_weights(text: &str) -> Result<WeightVector> {
    let t = Table::parse(text)?;
    let c = t.expect_columns(&["index", "re", "im", "regime"])?;
    let mut values = Vec::with_capacity(t.rows.len());
    let mut regime = None;
    for (i, r) in t.rows.iter().enumerate() {
        let line = i + 2;
        let k: usize = parse_int(&r[c[0]], line)?;
        if k != i {
            return Err(Error::Parse { line, message: format!("index {k} out of sequence") });
        }
        let g = Regime::from_tag(&r[c[3]])
            .ok_or_else(|| Error::Parse { line, message: format!("unknown regime {:?}", r[c[3]]) })?;
        if *regime.get_or_insert(g) != g {
            return Err(Error::Parse { line, message: "mixed regimes".into() });
        }
        values.push(Complex64::new(parse_f64(&r[c[1]], line)?, parse_f64(&r[c[2]], line)?));
    }
    Ok(WeightVector::new(values, regime.unwrap_or(Regime::Unconstrained)))
}

/// Phase index written as k = 1..M, so e^{j 2 pi k / M}.
pub fn quantized_table(q: &QuantizedWeights) -> Table {
    let m = q.alphabet().levels().to_string();
    let mut t = Table::new(&["index", "k", "levels"]);
    for (i, &v) in q.indices().iter().enumerate() {
        t.rows.push(vec![i.to_string(), (v as usize + 1).to_string(), m.clone()]);
    }
    t
}

pub fn read_quantized(text: &str) -> Result<QuantizedWeights> {
    let t = Table::parse(text)?;
    let c = t.expect_columns(&["index", "k", "levels"])?;
    let mut levels = None;
    let mut idx = Vec::with_capacity(t.rows.len());
    for (i, r) in t.rows.iter().enumerate() {
        let line = i + 2;
        let m: usize = parse_int(&r[c[2]], line)?;
        if *levels.get_or_insert(m) != m {
            return Err(Error::Parse { line, message: "mixed alphabet sizes".into() });
        }
        let k: usize = parse_int(&r[c[1]], line)?;
        if k == 0 || k > m {
            return Err(Error::Parse { line, message: format!("phase index {k} outside 1..={m}") });
        }
        idx.push((k - 1) as u16);
    }
    let m = levels.ok_or(Error::Parse { line: 1, message: "no rows".into() })?;
    QuantizedWeights::new(PhaseAlphabet::new(m)?, idx)
}

/// (iteration, cost) columns; `label` names the first column.
pub fn cost_trace_table(label: &str, costs: &[f64]) -> Table {
    let mut t = Table::new(&[label, "cost"]);
    for (i, c) in costs.iter().enumerate() {
        t.rows.push(vec![i.to_string(), fmt_f64(*c)]);
    }
    t
}

pub const TRACE_COLUMNS: [&str; 7] =
    ["decision_index", "time_s", "psi_deg", "Z", "accepted", "true_gain_dbi", "weights_id"];

pub fn trace_table(trace: &ClosedLoopTrace) -> Table {
    let mut t = Table::new(&TRACE_COLUMNS);
    for r in &trace.records {
        t.rows.push(vec![
            r.index.to_string(),
            fmt_f64(r.time_s),
            fmt_f64(r.psi_rad.to_degrees()),
            fmt_f64(r.measured),
            (r.accepted as u8).to_string(),
            fmt_f64(r.true_gain_dbi),
            r.weights_id.to_string(),
        ]);
    }
    t
}

/// Angles come back through a degree round trip and may differ in the last
/// bit.
pub fn read_trace(text: &str) -> Result<ClosedLoopTrace> {
    let t = Table::parse(text)?;
    let c = t.expect_columns(&TRACE_COLUMNS)?;
    let mut records = Vec::with_capacity(t.rows.len());
    for (i, r) in t.rows.iter().enumerate() {
        let line = i + 2;
        let accepted = match r[c[4]].as_str() {
            "1" => true,
            "0" => false,
            s => return Err(Error::Parse { line, message: format!("accepted must be 0 or 1, got {s:?}") }),
        };
        records.push(DecisionRecord {
            index: parse_int(&r[c[0]], line)?,
            time_s: parse_f64(&r[c[1]], line)?,
            psi_rad: parse_f64(&r[c[2]], line)?.to_radians(),
            measured: parse_f64(&r[c[3]], line)?,
            accepted,
            true_gain_dbi: parse_f64(&r[c[5]], line)?,
            weights_id: parse_int(&r[c[6]], line)?,
        });
    }
    Ok(ClosedLoopTrace { records })
}

pub fn pattern_table(cut: &PatternCut) -> Table {
    let mut t = Table::new(&["psi_deg", "gain_dbi", "crosspol_dbi"]);
    for ((a, g), x) in cut.angles_rad.iter().zip(&cut.gain_dbi).zip(cut.crosspol_gain_dbi()) {
        t.rows.push(vec![fmt_f64(a.to_degrees()), fmt_f64(*g), fmt_f64(x)]);
    }
    t
}
